//! Small 3-D geometry kernels: closest points between segments, points and
//! triangles, rotations and bounding boxes.

use nalgebra::{Matrix3, Vector3};

use crate::math;

pub type V3 = Vector3<f64>;
pub type M3 = Matrix3<f64>;

pub fn rot_x(a: f64) -> M3 {
    let (s, c) = (math::sin(a), math::cos(a));
    M3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> M3 {
    let (s, c) = (math::sin(a), math::cos(a));
    M3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> M3 {
    let (s, c) = (math::sin(a), math::cos(a));
    M3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn norm(v: &V3) -> f64 {
    math::sqrt(v.dot(v))
}

/// Rotation matrix of a unit quaternion `[w, x, y, z]`.
pub fn quat_to_matrix(q: [f64; 4]) -> M3 {
    let [w, x, y, z] = q;
    M3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

pub fn quat_from_yaw(yaw: f64) -> [f64; 4] {
    [math::cos(yaw / 2.0), 0.0, 0.0, math::sin(yaw / 2.0)]
}

/// Geodesic angle (radians, in `[0, π]`) of a rotation by `angle` about any
/// axis, as measured between unit quaternions in the same hemisphere.
pub fn quat_geodesic(a: [f64; 4], b: [f64; 4]) -> f64 {
    let d: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    2.0 * math::acos(d.abs().min(1.0))
}

/// Quaternion of a rotation by `angle` about `axis` (need not be normalised).
pub fn quat_axis_angle(axis: &V3, angle: f64) -> [f64; 4] {
    let n = norm(axis);
    if n == 0.0 || angle == 0.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    let s = math::sin(angle / 2.0) / n;
    [math::cos(angle / 2.0), axis.x * s, axis.y * s, axis.z * s]
}

/// Closest point on segment `[a, b]` to `p`, as a parameter in `[0, 1]`.
pub fn closest_on_segment(p: &V3, a: &V3, b: &V3) -> f64 {
    let ab = b - a;
    let l2 = ab.dot(&ab);
    if l2 == 0.0 {
        return 0.0;
    }
    ((p - a).dot(&ab) / l2).clamp(0.0, 1.0)
}

pub fn point_segment_distance(p: &V3, a: &V3, b: &V3) -> f64 {
    let t = closest_on_segment(p, a, b);
    norm(&(p - (a + (b - a) * t)))
}

/// Parameters `(s, t)` of the closest points between segments `p1 q1` and
/// `p2 q2`, following the clamped two-step projection method.
pub fn closest_segment_segment(p1: &V3, q1: &V3, p2: &V3, q2: &V3) -> (f64, f64) {
    const EPS: f64 = 1e-15;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    if a <= EPS && e <= EPS {
        return (0.0, 0.0);
    }
    if a <= EPS {
        return (0.0, (f / e).clamp(0.0, 1.0));
    }
    let c = d1.dot(&r);
    if e <= EPS {
        return ((-c / a).clamp(0.0, 1.0), 0.0);
    }
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > EPS {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    (s, t)
}

pub fn segment_segment_distance(p1: &V3, q1: &V3, p2: &V3, q2: &V3) -> f64 {
    let (s, t) = closest_segment_segment(p1, q1, p2, q2);
    norm(&((p1 + (q1 - p1) * s) - (p2 + (q2 - p2) * t)))
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_on_triangle(p: &V3, a: &V3, b: &V3, c: &V3) -> V3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Signed solid angle subtended by triangle `abc` seen from `p`
/// (Van Oosterom–Strackee). Summing over a closed, consistently oriented
/// mesh gives 4π inside and 0 outside.
pub fn solid_angle(p: &V3, a: &V3, b: &V3, c: &V3) -> f64 {
    let ra = a - p;
    let rb = b - p;
    let rc = c - p;
    let (la, lb, lc) = (norm(&ra), norm(&rb), norm(&rc));
    let num = ra.dot(&rb.cross(&rc));
    let den = la * lb * lc + ra.dot(&rb) * lc + rb.dot(&rc) * la + rc.dot(&ra) * lb;
    2.0 * math::atan2(num, den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: V3,
    pub max: V3,
}

impl Aabb {
    pub fn of_capsule(a: &V3, b: &V3, r: f64) -> Self {
        let rv = V3::repeat(r);
        Self {
            min: a.inf(b) - rv,
            max: a.sup(b) + rv,
        }
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= o.max[i] && o.min[i] <= self.max[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64, z: f64) -> V3 {
        V3::new(x, y, z)
    }

    #[test]
    fn segment_distances() {
        // Crossing skew segments one unit apart.
        let d = segment_segment_distance(
            &v(-1.0, 0.0, 0.0),
            &v(1.0, 0.0, 0.0),
            &v(0.0, -1.0, 1.0),
            &v(0.0, 1.0, 1.0),
        );
        assert!((d - 1.0).abs() < 1e-15);
        // Parallel, offset end to end.
        let d = segment_segment_distance(
            &v(0.0, 0.0, 0.0),
            &v(1.0, 0.0, 0.0),
            &v(2.0, 0.0, 0.0),
            &v(3.0, 0.0, 0.0),
        );
        assert!((d - 1.0).abs() < 1e-15);
        assert!((point_segment_distance(&v(0.5, 2.0, 0.0), &v(0.0, 0.0, 0.0), &v(1.0, 0.0, 0.0)) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn quaternion_helpers() {
        let q = quat_axis_angle(&v(0.0, 0.0, 2.0), 0.7);
        let m = quat_to_matrix(q);
        assert!((m - rot_z(0.7)).abs().max() < 1e-15);
        assert!((quat_geodesic([1.0, 0.0, 0.0, 0.0], q) - 0.7).abs() < 1e-12);
        assert!((quat_to_matrix(quat_from_yaw(0.3)) - rot_z(0.3)).abs().max() < 1e-15);
    }

    #[test]
    fn solid_angle_of_closed_tetrahedron() {
        let p = [v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), v(0.0, 0.0, 1.0)];
        // Outward-oriented faces.
        let f = [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
        let w = |q: V3| -> f64 { f.iter().map(|t| solid_angle(&q, &p[t[0]], &p[t[1]], &p[t[2]])).sum() };
        assert!((w(v(0.1, 0.1, 0.1)) - 4.0 * core::f64::consts::PI).abs() < 1e-9);
        assert!(w(v(2.0, 2.0, 2.0)).abs() < 1e-9);
    }

    fn pt() -> impl Strategy<Value = V3> {
        (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(x, y, z)| v(x, y, z))
    }

    proptest! {
        #[test]
        fn segment_distance_is_minimal(p1 in pt(), q1 in pt(), p2 in pt(), q2 in pt()) {
            let d = segment_segment_distance(&p1, &q1, &p2, &q2);
            // Dense sampling can never beat the closed form.
            let mut best = f64::INFINITY;
            for i in 0..=40 {
                for j in 0..=40 {
                    let a = p1 + (q1 - p1) * (i as f64 / 40.0);
                    let b = p2 + (q2 - p2) * (j as f64 / 40.0);
                    best = best.min(norm(&(a - b)));
                }
            }
            prop_assert!(d <= best + 1e-12);
            prop_assert!(best - d < 0.2);
            prop_assert!((d - segment_segment_distance(&p2, &q2, &p1, &q1)).abs() < 1e-12);
        }

        #[test]
        fn triangle_closest_point_is_minimal(p in pt(), a in pt(), b in pt(), c in pt()) {
            let q = closest_on_triangle(&p, &a, &b, &c);
            let d = norm(&(p - q));
            for i in 0..=20 {
                for j in 0..=(20 - i) {
                    let u = i as f64 / 20.0;
                    let w = j as f64 / 20.0;
                    let s = a + (b - a) * u + (c - a) * w;
                    prop_assert!(d <= norm(&(p - s)) + 1e-9);
                }
            }
        }
    }
}
