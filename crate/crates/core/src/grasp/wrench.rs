//! Friction-cone wrench model and the perturbation test.
//!
//! Each contact contributes `K = 8` unit force generators spanning a
//! discretised Coulomb cone around the inward normal. Wrenches are
//! `(force, torque / L)` with `L` the object's bounding radius, so both halves
//! carry force units. An external wrench is resisted iff it is cancelled by a
//! non-negative combination of the generators; the part that cannot be
//! cancelled (the non-negative least-squares residual) displaces the object
//! through a linear spring of stiffness `k · g(effort)`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GraspType;
use crate::geometry::{self, V3};
use crate::linalg;
use crate::math::{self, PI, TAU};
use crate::rng;

pub const GRAVITY: f64 = 9.81;
pub const FRICTION_EDGES: usize = 8;
pub const PERTURBATION_DIRECTIONS: usize = 8;
pub const PERTURBATION_MIN: f64 = 500.0;
pub const PERTURBATION_MAX: f64 = 1000.0;
/// Contact stiffness, force per length.
pub const DEFAULT_STIFFNESS: f64 = 500.0;
/// Joint effort is divided by this to obtain the dimensionless grip gain
/// (`[500, 4000]` maps to `[0.03125, 0.25]`).
pub const EFFORT_GAIN_SCALE: f64 = 16000.0;
/// Pinch grasps lift the object this far before being perturbed.
pub const LIFT_HEIGHT: f64 = 0.5;
/// A wrench counts as resisted when the residual is this small relative to
/// the wrench itself.
pub const RESIST_TOLERANCE: f64 = 1e-7;
/// Coulomb coefficient of the table supporting lateral-grasp plates.
pub const TABLE_FRICTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ContactKind {
    Finger { finger: usize, link: usize, tip: bool },
    Palm,
    Table,
}

/// A contact on the object surface, in the task frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub point: V3,
    /// Outward object normal at `point`; contact forces push along `-normal`.
    pub normal: V3,
    pub mu: f64,
    pub kind: ContactKind,
}

impl Contact {
    /// Unit generators of the discretised friction cone.
    pub fn cone_edges(&self) -> [V3; FRICTION_EDGES] {
        let n = self.normal;
        let helper = if n.x.abs() < 0.6 { V3::x() } else { V3::y() };
        let t1 = n.cross(&helper).normalize();
        let t2 = n.cross(&t1);
        core::array::from_fn(|e| {
            let a = TAU * e as f64 / FRICTION_EDGES as f64;
            let f = -n + (t1 * math::cos(a) + t2 * math::sin(a)) * self.mu;
            f / geometry::norm(&f)
        })
    }
}

/// Contact configuration at the end of closing.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspState {
    pub grasp_type: GraspType,
    pub contacts: Vec<Contact>,
    pub center: V3,
    pub mass: f64,
    /// Torque normalisation length (object bounding radius).
    pub length_scale: f64,
    pub stiffness: f64,
    /// Effort-scaled gain multiplying the stiffness.
    pub gain: f64,
    pub tip_contact_ratio: f64,
    pub self_collision: bool,
}

impl GraspState {
    pub fn has_tip_contact(&self) -> bool {
        self.contacts
            .iter()
            .any(|c| matches!(c.kind, ContactKind::Finger { tip: true, .. }))
    }

    /// `6 × 8n` matrix of generator wrenches.
    pub fn wrench_matrix(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(6, FRICTION_EDGES * self.contacts.len());
        for (ci, c) in self.contacts.iter().enumerate() {
            let arm = c.point - self.center;
            for (e, f) in c.cone_edges().iter().enumerate() {
                let tau = arm.cross(f) / self.length_scale;
                let col = ci * FRICTION_EDGES + e;
                for i in 0..3 {
                    g[(i, col)] = f[i];
                    g[(i + 3, col)] = tau[i];
                }
            }
        }
        g
    }

    /// Gravity plus a force applied at the centre of mass.
    pub fn external_wrench(&self, force: &V3) -> DVector<f64> {
        let mut w = DVector::zeros(6);
        w[0] = force.x;
        w[1] = force.y;
        w[2] = force.z - self.mass * GRAVITY;
        w
    }

    /// Net wrench left after the contacts push back as well as they can.
    pub fn unresisted(&self, w_ext: &DVector<f64>) -> DVector<f64> {
        let g = self.wrench_matrix();
        linalg::nnls(&g, &(-w_ext)).residual
    }

    /// Object motion caused by an unresisted wrench.
    pub fn displacement(&self, residual: &DVector<f64>) -> Displacement {
        let k = self.stiffness * self.gain;
        let dp = V3::new(residual[0], residual[1], residual[2]) / k;
        let axis = V3::new(residual[3], residual[4], residual[5]);
        let angle = geometry::norm(&axis) / (k * self.length_scale);
        let q = geometry::quat_axis_angle(&axis, angle);
        Displacement {
            dp,
            d_orn: geometry::quat_geodesic([1.0, 0.0, 0.0, 0.0], q),
        }
    }

    pub fn resists(&self, w_ext: &DVector<f64>) -> bool {
        let r = self.unresisted(w_ext);
        r.norm() <= RESIST_TOLERANCE * w_ext.norm().max(1e-300)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displacement {
    pub dp: V3,
    pub d_orn: f64,
}

impl Displacement {
    pub fn d_pos(&self) -> f64 {
        geometry::norm(&self.dp)
    }
}

/// Type-specific acceptance region for the perturbed object. For pinch
/// grasps `dp` is relative to the lifted pose.
pub fn vicinity_ok(grasp: GraspType, d: &Displacement) -> bool {
    let (x, y, z) = (d.dp.x.abs(), d.dp.y.abs(), d.dp.z);
    match grasp {
        GraspType::Power => x <= 3.0 && y <= 3.0 && z.abs() <= 1.0,
        GraspType::Pinch => LIFT_HEIGHT + z >= 0.05 && x <= 2.0 && y <= 2.0,
        GraspType::Lateral => d.d_orn < 2.5 && x <= 3.0 && y <= 3.0 && z.abs() <= 0.3,
    }
}

/// Unit direction of perturbation `k`.
pub fn perturbation_direction(k: usize) -> V3 {
    let a = PI * k as f64 / 4.0;
    V3::new(math::cos(a), math::sin(a), 0.0)
}

/// Perturbation magnitudes drawn from the episode's seeded stream.
pub fn perturbation_magnitudes(seed: u64) -> [f64; PERTURBATION_DIRECTIONS] {
    let mut r = rng::stream(seed, "perturbation", 0);
    core::array::from_fn(|_| r.random_range(PERTURBATION_MIN..=PERTURBATION_MAX))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationOutcome {
    pub survived: u8,
    pub flags: [bool; PERTURBATION_DIRECTIONS],
    pub magnitudes: [f64; PERTURBATION_DIRECTIONS],
    pub d_pos: [f64; PERTURBATION_DIRECTIONS],
    pub d_orn: [f64; PERTURBATION_DIRECTIONS],
    /// Pinch grasps only: gravity was held through the lift.
    pub lifted: bool,
}

/// Applies the eight planar perturbations to a closed grasp.
pub fn perturbation_test(state: &GraspState, seed: u64) -> PerturbationOutcome {
    let magnitudes = perturbation_magnitudes(seed);
    let mut out = PerturbationOutcome {
        survived: 0,
        flags: [false; PERTURBATION_DIRECTIONS],
        magnitudes,
        d_pos: [0.0; PERTURBATION_DIRECTIONS],
        d_orn: [0.0; PERTURBATION_DIRECTIONS],
        lifted: true,
    };
    let tip = state.has_tip_contact();
    if state.grasp_type == GraspType::Pinch {
        out.lifted = tip && state.resists(&state.external_wrench(&V3::zeros()));
        if !out.lifted {
            // The hand rises without the object.
            out.d_pos = [LIFT_HEIGHT; PERTURBATION_DIRECTIONS];
            return out;
        }
    }
    for k in 0..PERTURBATION_DIRECTIONS {
        let w = state.external_wrench(&(perturbation_direction(k) * magnitudes[k]));
        let d = state.displacement(&state.unresisted(&w));
        out.d_pos[k] = d.d_pos();
        out.d_orn[k] = d.d_orn;
        out.flags[k] = tip && vicinity_ok(state.grasp_type, &d);
    }
    out.survived = out.flags.iter().filter(|&&f| f).count() as u8;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(contacts: Vec<Contact>, grasp: GraspType) -> GraspState {
        GraspState {
            grasp_type: grasp,
            contacts,
            center: V3::zeros(),
            mass: 1.0,
            length_scale: 1.0,
            stiffness: DEFAULT_STIFFNESS,
            gain: 0.1,
            tip_contact_ratio: 1.0,
            self_collision: false,
        }
    }

    fn tip(p: V3, mu: f64) -> Contact {
        Contact {
            point: p,
            normal: p.normalize(),
            mu,
            kind: ContactKind::Finger {
                finger: 0,
                link: 2,
                tip: true,
            },
        }
    }

    /// Six frictional contacts on the sphere's axes cage it completely.
    fn caged() -> GraspState {
        let pts = [V3::x(), -V3::x(), V3::y(), -V3::y(), V3::z(), -V3::z()];
        state(pts.iter().map(|&p| tip(p, 0.5)).collect(), GraspType::Power)
    }

    #[test]
    fn caged_sphere_survives_everything() {
        let out = perturbation_test(&caged(), 3);
        assert_eq!(out.survived, 8);
        assert!(out.d_pos.iter().all(|&d| d < 1e-9));
    }

    #[test]
    fn free_object_fails() {
        let mut s = caged();
        s.contacts.clear();
        assert_eq!(perturbation_test(&s, 3).survived, 0);
    }

    #[test]
    fn cone_edges_are_unit_and_inside_the_cone() {
        let c = tip(V3::new(0.3, -0.4, 0.8).normalize(), 0.6);
        for f in c.cone_edges() {
            assert!((f.norm() - 1.0).abs() < 1e-12);
            let cos = -f.dot(&c.normal);
            assert!((cos - 1.0 / (1.0f64 + 0.36).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn magnitudes_in_range_and_seeded() {
        let m = perturbation_magnitudes(9);
        assert_eq!(m, perturbation_magnitudes(9));
        assert!(m.iter().all(|&x| (PERTURBATION_MIN..=PERTURBATION_MAX).contains(&x)));
    }

    proptest! {
        #[test]
        fn resistance_is_monotone_in_magnitude(
            pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..5),
            mu in 0.2f64..1.0, k in 0usize..8, m in 500.0f64..1000.0, frac in 0.0f64..1.0,
        ) {
            let contacts: Vec<Contact> = pts
                .iter()
                .map(|&(x, y, z)| V3::new(x, y, z))
                .filter(|p| p.norm() > 1e-3)
                .map(|p| tip(p.normalize(), mu))
                .collect();
            let s = state(contacts, GraspType::Power);
            let d = perturbation_direction(k);
            let r_hi = s.unresisted(&s.external_wrench(&(d * m))).norm();
            let r_lo = s.unresisted(&s.external_wrench(&(d * (m * frac)))).norm();
            let r0 = s.unresisted(&s.external_wrench(&V3::zeros())).norm();
            if s.resists(&s.external_wrench(&(d * m))) {
                prop_assert!(s.resists(&s.external_wrench(&(d * (m * frac)))) || r0 > 1e-9);
            }
            // With gravity held, the residual grows with the push.
            if r0 <= 1e-9 {
                prop_assert!(r_lo <= r_hi + 1e-7 * m);
            }
        }
    }
}
