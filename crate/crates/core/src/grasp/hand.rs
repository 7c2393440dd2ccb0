//! Kinematic hand model: a palm disc with serial fingers on its rim.
//!
//! In the hand frame the palm's top surface is the plane `z = 0`. Finger `i`
//! is mounted on the rim at angle `a_i`; with cumulative joint angle `φ_k`,
//! segment `k` points along `cos φ_k ẑ − sin φ_k ρ_i` where `ρ_i` is the
//! outward radial direction, so positive angles curl the finger towards the
//! palm axis. Segments are capsules and the fingertip is a sphere at the end
//! of the last segment.

use alloc::vec::Vec;

use crate::design::{GraspCommands, HandMorphology};
use crate::geometry::{self, Aabb, M3, V3};
use crate::math::{self, PI};

pub const PALM_RADIUS: f64 = 2.0;
pub const PALM_THICKNESS: f64 = 0.2;
pub const PALM_JOINT_LIMITS: (f64, f64) = (-PI / 6.0, PI / 2.0);
pub const FINGER_JOINT_LIMITS: (f64, f64) = (-PI / 12.0, PI / 2.0);

/// A capsule (sphere when `a == b`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub a: V3,
    pub b: V3,
    pub r: f64,
}

impl Link {
    pub fn aabb(&self) -> Aabb {
        Aabb::of_capsule(&self.a, &self.b, self.r)
    }

    pub fn overlaps(&self, o: &Link) -> bool {
        if !self.aabb().overlaps(&o.aabb()) {
            return false;
        }
        let d = geometry::segment_segment_distance(&self.a, &self.b, &o.a, &o.b);
        d < self.r + o.r - 1e-9
    }
}

/// Affine map from the hand frame into the frame used for queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub rotation: M3,
    pub translation: V3,
}

impl Frame {
    pub fn apply(&self, p: &V3) -> V3 {
        self.rotation * p + self.translation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finger {
    pub mount: V3,
    pub radial: V3,
    pub heights: Vec<f64>,
    pub radii: Vec<f64>,
    pub tip_radius: f64,
    pub angles: Vec<f64>,
    /// Commanded joint velocity after damping, rad/s.
    pub velocity: Vec<f64>,
    pub frozen: Vec<bool>,
}

impl Finger {
    pub fn n_joints(&self) -> usize {
        self.heights.len()
    }

    /// Links `0..n_joints` are segments, link `n_joints` is the fingertip.
    pub fn n_links(&self) -> usize {
        self.heights.len() + 1
    }

    pub fn tip_link(&self) -> usize {
        self.heights.len()
    }

    /// The fingertip is the distal segment together with its tip sphere.
    pub fn is_tip(&self, link: usize) -> bool {
        link + 1 >= self.heights.len()
    }

    pub fn limits(joint: usize) -> (f64, f64) {
        if joint == 0 {
            PALM_JOINT_LIMITS
        } else {
            FINGER_JOINT_LIMITS
        }
    }

    /// Whether any joint can still move.
    pub fn is_active(&self) -> bool {
        (0..self.n_joints()).any(|j| !self.frozen[j])
    }

    /// Writes the links for `angles` into `out` (length `n_links`).
    pub fn links_into(&self, angles: &[f64], frame: &Frame, out: &mut [Link]) {
        let mut p = self.mount;
        let mut phi = 0.0;
        let mut pa = frame.apply(&p);
        for k in 0..self.n_joints() {
            phi += angles[k];
            let d = V3::z() * math::cos(phi) - self.radial * math::sin(phi);
            p += d * self.heights[k];
            let pb = frame.apply(&p);
            out[k] = Link {
                a: pa,
                b: pb,
                r: self.radii[k],
            };
            pa = pb;
        }
        out[self.n_joints()] = Link {
            a: pa,
            b: pa,
            r: self.tip_radius,
        };
    }

    pub fn links(&self, frame: &Frame) -> Vec<Link> {
        let zero = Link {
            a: V3::zeros(),
            b: V3::zeros(),
            r: 0.0,
        };
        let mut v = alloc::vec![zero; self.n_links()];
        self.links_into(&self.angles, frame, &mut v);
        v
    }

    /// Freezes the joints that carry link `link`.
    pub fn freeze_through(&mut self, link: usize) {
        let last = link.min(self.n_joints() - 1);
        for j in 0..=last {
            self.frozen[j] = true;
        }
    }
}

/// Builds the fingers of `morph` driven by `commands`. Joints with zero
/// commanded velocity start frozen.
pub fn build_fingers(morph: &HandMorphology, commands: &GraspCommands) -> Vec<Finger> {
    (0..morph.n_fingers)
        .map(|i| {
            let a = morph.mount_angles[i];
            let radial = V3::new(math::cos(a), math::sin(a), 0.0);
            let s = morph.segments_per_finger[i];
            let velocity: Vec<f64> = (0..s)
                .map(|j| commands.joint_velocity(i, j, s) / morph.joint_damping)
                .collect();
            Finger {
                mount: radial * PALM_RADIUS,
                radial,
                heights: morph.segment_dims[i].iter().map(|d| d.height).collect(),
                radii: morph.segment_dims[i].iter().map(|d| d.radius).collect(),
                tip_radius: morph.fingertip_radius[i],
                angles: alloc::vec![0.0; s],
                frozen: velocity.iter().map(|&v| v == 0.0).collect(),
                velocity,
            }
        })
        .collect()
}

/// True if any two non-adjacent links of the hand overlap. Links `k` and
/// `k + 1` of the same finger are adjacent (they share a joint).
pub fn self_collision(links: &[Vec<Link>]) -> bool {
    for (fi, la) in links.iter().enumerate() {
        for (i, a) in la.iter().enumerate() {
            for b in &la[(i + 2).min(la.len())..] {
                if a.overlaps(b) {
                    return true;
                }
            }
            for lb in &links[fi + 1..] {
                for b in lb {
                    if a.overlaps(b) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{decode, DesignLayout, ParamVector, PARAM_DIM};
    use crate::grasp::GraspType;

    fn identity() -> Frame {
        Frame {
            rotation: M3::identity(),
            translation: V3::zeros(),
        }
    }

    fn hand(mounts_deg: &[f64], seg_raw: f64, radius_raw: f64) -> Vec<Finger> {
        let l = DesignLayout::standard();
        let mut t = alloc::vec![0.5; PARAM_DIM];
        t[2] = DesignLayout::finger_count_raw(mounts_deg.len());
        for (i, m) in mounts_deg.iter().enumerate() {
            t[l.mount_index(i)] = m / 360.0;
            t[3 + i] = seg_raw;
        }
        for k in 0..96 {
            if k % 2 == 1 {
                t[9 + k] = radius_raw;
            }
        }
        let d = decode(&ParamVector::new(t).unwrap(), &l).unwrap();
        build_fingers(&d.morphology, d.control.commands(GraspType::Power))
    }

    #[test]
    fn straight_finger_points_up() {
        let f = &hand(&[0.0, 180.0], 0.3, 0.5)[0];
        let links = f.links(&identity());
        assert!((links[0].a - V3::new(PALM_RADIUS, 0.0, 0.0)).norm() < 1e-12);
        let total: f64 = f.heights.iter().sum();
        assert!((links[f.tip_link()].a.z - total).abs() < 1e-12);
    }

    #[test]
    fn positive_angle_curls_inward() {
        let mut f = hand(&[0.0, 180.0], 0.3, 0.5)[0].clone();
        f.angles[0] = PI / 2.0;
        let links = f.links(&identity());
        // Horizontal and pointing to the palm centre.
        assert!(links[0].b.x < links[0].a.x);
        assert!((links[0].b.z - links[0].a.z).abs() < 1e-12);
    }

    #[test]
    fn close_thick_fingers_collide_at_rest() {
        let fat = hand(&[0.0, 12.5], 0.3, 1.0);
        let links: Vec<_> = fat.iter().map(|f| f.links(&identity())).collect();
        assert!(self_collision(&links));
        let apart = hand(&[0.0, 120.0, 240.0], 0.3, 1.0);
        let links: Vec<_> = apart.iter().map(|f| f.links(&identity())).collect();
        assert!(!self_collision(&links));
    }

    #[test]
    fn adjacent_links_are_not_collisions() {
        let mut f = hand(&[0.0, 180.0], 0.9, 1.0)[0].clone();
        for a in &mut f.angles {
            *a = 0.5;
        }
        let links = alloc::vec![f.links(&identity())];
        // Segments meet at joints, which is not a self-collision.
        assert!(!self_collision(&links));
    }
}
