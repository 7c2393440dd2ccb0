//! One grasp episode: kinematic closing followed by the perturbation test.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::hand::{self, Finger, Frame, Link};
use super::reward::{self, RewardVariant, StepState};
use super::score::EvalConfig;
use super::wrench::{self, Contact, ContactKind, GraspState, PerturbationOutcome};
use super::{GraspTask, GraspType};
use crate::design::{ControlPlan, HandMorphology};
use crate::geometry::{self, V3};
use crate::objects::Shape;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("hand self-intersects in its initial configuration")]
    InitialSelfCollision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episodic_reward: f64,
    pub success: bool,
    /// Fingertip contact ratio after each closing step.
    pub contact_ratio_trace: Vec<f64>,
    pub self_collision_steps: usize,
    pub perturbation_survived: u8,
    pub perturbation: PerturbationOutcome,
    pub n_contacts: usize,
}

/// State at the end of the closing phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosingOutcome {
    pub grasp: GraspState,
    pub contact_ratio_trace: Vec<f64>,
    /// Per closing step: non-adjacent links overlapped.
    pub self_collision_trace: Vec<bool>,
    /// Steps actually integrated before every joint had stopped.
    pub active_steps: usize,
    pub fingers: Vec<Finger>,
}

/// Lower bound on the distance from link to object for the bounding-sphere
/// cull (object origin at zero).
fn cull_distance(link: &Link, bound: f64) -> f64 {
    geometry::point_segment_distance(&V3::zeros(), &link.a, &link.b) - bound - link.r
}

/// Distance from a link to the object surface and the parameter of the
/// closest axis point. Uses golden-section search on the (convex) signed
/// distance along the link axis after a coarse bracket.
fn closest_on_link(shape: &Shape, link: &Link) -> (f64, f64) {
    let seg = link.b - link.a;
    if seg.norm_squared() == 0.0 {
        return (shape.sdf(&link.a) - link.r, 0.0);
    }
    if let Shape::Sphere { radius, .. } = shape {
        let t = geometry::closest_on_segment(&V3::zeros(), &link.a, &link.b);
        return (geometry::norm(&(link.a + seg * t)) - radius - link.r, t);
    }
    let f = |t: f64| shape.sdf(&(link.a + seg * t));
    const N: usize = 4;
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..=N {
        let v = f(i as f64 / N as f64);
        if v < best.0 {
            best = (v, i);
        }
    }
    let mut lo = (best.1.saturating_sub(1)) as f64 / N as f64;
    let mut hi = ((best.1 + 1).min(N)) as f64 / N as f64;
    let g = 0.618_033_988_749_894_9;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..28 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let (mut d, mut t) = if f1 < f2 { (f1, x1) } else { (f2, x2) };
    if best.0 < d {
        d = best.0;
        t = best.1 as f64 / N as f64;
    }
    (d - link.r, t)
}

fn link_distance(shape: &Shape, bound: f64, tol: f64, link: &Link) -> f64 {
    let lb = cull_distance(link, bound);
    if lb > tol {
        return lb;
    }
    closest_on_link(shape, link).0
}

struct Sim<'a> {
    shape: &'a Shape,
    bound: f64,
    tol: f64,
    frame: Frame,
}

impl Sim<'_> {
    fn distances(&self, links: &[Link], from: usize, out: &mut [f64]) {
        for k in from..links.len() {
            out[k] = link_distance(self.shape, self.bound, self.tol, &links[k]);
        }
    }
}

/// Runs the closing phase.
pub fn close_hand(
    morph: &HandMorphology,
    plan: &ControlPlan,
    task: &GraspTask,
    cfg: &EvalConfig,
) -> Result<ClosingOutcome, GeometryError> {
    let grasp = task.grasp_type;
    let pose = task.hand_pose(morph.base_height);
    let obj = &task.object;
    let r_obj = obj.rotation();
    let c_obj = obj.center();
    // Queries run in the object frame.
    let frame = Frame {
        rotation: r_obj.transpose() * pose.rotation,
        translation: r_obj.transpose() * (pose.translation - c_obj),
    };
    let sim = Sim {
        shape: &obj.shape,
        bound: obj.shape.bounding_radius(),
        tol: cfg.contact_tolerance,
        frame,
    };
    let mut fingers = hand::build_fingers(morph, plan.commands(grasp));
    let n_f = fingers.len();
    let mut links: Vec<Vec<Link>> = fingers.iter().map(|f| f.links(&sim.frame)).collect();
    let mut dist: Vec<Vec<f64>> = links
        .iter()
        .map(|l| {
            let mut d = vec![0.0; l.len()];
            sim.distances(l, 0, &mut d);
            d
        })
        .collect();
    if hand::self_collision(&links) {
        return Err(GeometryError::InitialSelfCollision);
    }
    for (f, d) in fingers.iter_mut().zip(&dist) {
        for (k, &dk) in d.iter().enumerate() {
            if dk <= sim.tol {
                f.freeze_through(k);
            }
        }
    }

    let tip_ratio = |dist: &[Vec<f64>], fingers: &[Finger]| {
        let touching = fingers
            .iter()
            .zip(dist)
            .filter(|(f, d)| d.iter().enumerate().any(|(k, &dk)| f.is_tip(k) && dk <= sim.tol))
            .count();
        touching as f64 / n_f as f64
    };

    let steps = cfg.closing_steps;
    let dt = cfg.dt;
    let mut ratio_trace = Vec::with_capacity(steps);
    let mut sc_trace = Vec::with_capacity(steps);
    let mut collided = false;
    let mut ratio = tip_ratio(&dist, &fingers);
    let mut active_steps = 0;
    let mut scratch_links: Vec<Link> = Vec::new();
    let mut scratch_d: Vec<f64> = Vec::new();
    let mut target: Vec<f64> = Vec::new();
    let mut trial: Vec<f64> = Vec::new();

    for _ in 0..steps {
        if !fingers.iter().any(|f| f.is_active()) {
            break;
        }
        active_steps += 1;
        let mut moved = false;
        for fi in 0..n_f {
            let f = &mut fingers[fi];
            if !f.is_active() {
                continue;
            }
            let nj = f.n_joints();
            target.clear();
            let mut first = None;
            for j in 0..nj {
                let a = f.angles[j];
                let t = if f.frozen[j] {
                    a
                } else {
                    let (lo, hi) = Finger::limits(j);
                    (a + f.velocity[j] * dt).clamp(lo, hi)
                };
                if t != a && first.is_none() {
                    first = Some(j);
                }
                target.push(t);
            }
            let Some(j0) = first else {
                for j in 0..nj {
                    f.frozen[j] = true;
                }
                continue;
            };
            scratch_links.clone_from(&links[fi]);
            scratch_d.clone_from(&dist[fi]);
            f.links_into(&target, &sim.frame, &mut scratch_links);
            sim.distances(&scratch_links, j0, &mut scratch_d);
            let penetrates = |d: &[f64]| d[j0..].iter().any(|&x| x < 0.0);
            if penetrates(&scratch_d) {
                // Back off to the largest fraction of the step that keeps
                // every moving link outside the object.
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                let start = f.angles.clone();
                let mut ok_links = links[fi].clone();
                let mut ok_d = dist[fi].clone();
                let mut hit_d = scratch_d.clone();
                for _ in 0..cfg.bisection_iters {
                    let mid = 0.5 * (lo + hi);
                    trial.clear();
                    trial.extend(start.iter().zip(&target).map(|(a, t)| a + mid * (t - a)));
                    f.links_into(&trial, &sim.frame, &mut scratch_links);
                    sim.distances(&scratch_links, j0, &mut scratch_d);
                    if penetrates(&scratch_d) {
                        hi = mid;
                        hit_d.clone_from(&scratch_d);
                    } else {
                        lo = mid;
                        ok_links.clone_from(&scratch_links);
                        ok_d.clone_from(&scratch_d);
                    }
                }
                for j in 0..nj {
                    f.angles[j] = start[j] + lo * (target[j] - start[j]);
                }
                links[fi] = ok_links;
                dist[fi] = ok_d;
                // The blocking link is in contact, even if the bisection
                // stopped slightly short of the tolerance band.
                if let Some(k) = (j0..f.n_links()).filter(|&k| hit_d[k] < 0.0).max() {
                    dist[fi][k] = dist[fi][k].min(sim.tol);
                    f.freeze_through(k);
                }
            } else {
                f.angles.clone_from(&target);
                links[fi].clone_from(&scratch_links);
                dist[fi].clone_from(&scratch_d);
            }
            moved = true;
            for j in 0..nj {
                let (lo, hi) = Finger::limits(j);
                if f.angles[j] <= lo || f.angles[j] >= hi {
                    f.frozen[j] = true;
                }
            }
            for k in j0..f.n_links() {
                if dist[fi][k] <= sim.tol {
                    f.freeze_through(k);
                }
            }
        }
        if moved {
            collided = hand::self_collision(&links);
            ratio = tip_ratio(&dist, &fingers);
        }
        ratio_trace.push(ratio);
        sc_trace.push(collided);
    }
    // Nothing moves any more: the remaining steps repeat the final state.
    ratio_trace.resize(steps, ratio);
    sc_trace.resize(steps, collided);

    let contacts = collect_contacts(morph, task, &fingers, &links, &dist, &sim, &pose);
    let state = GraspState {
        grasp_type: grasp,
        contacts,
        center: c_obj,
        mass: obj.mass,
        length_scale: sim.bound,
        stiffness: cfg.stiffness,
        gain: morph.joint_effort / wrench::EFFORT_GAIN_SCALE,
        tip_contact_ratio: ratio,
        self_collision: collided,
    };
    Ok(ClosingOutcome {
        grasp: state,
        contact_ratio_trace: ratio_trace,
        self_collision_trace: sc_trace,
        active_steps,
        fingers,
    })
}

fn collect_contacts(
    morph: &HandMorphology,
    task: &GraspTask,
    fingers: &[Finger],
    links: &[Vec<Link>],
    dist: &[Vec<f64>],
    sim: &Sim<'_>,
    pose: &super::HandPose,
) -> Vec<Contact> {
    let obj = &task.object;
    let r = obj.rotation();
    let c = obj.center();
    let mu = morph.friction_coefficient();
    let mut out = Vec::new();
    for (fi, f) in fingers.iter().enumerate() {
        for (k, link) in links[fi].iter().enumerate() {
            if dist[fi][k] > sim.tol {
                continue;
            }
            let (_, t) = closest_on_link(&obj.shape, link);
            let axis = link.a + (link.b - link.a) * t;
            let (p, n) = obj.shape.surface_point(&axis);
            out.push(Contact {
                point: r * p + c,
                normal: r * n,
                mu,
                kind: ContactKind::Finger {
                    finger: fi,
                    link: k,
                    tip: f.is_tip(k),
                },
            });
        }
    }
    // The palm touches when the object sits within tolerance of its plane.
    let palm_n = pose.rotation * V3::z();
    let palm_offset = pose.translation.dot(&palm_n);
    let palm_gap = -obj.extent(&-palm_n) - palm_offset;
    if palm_gap <= sim.tol {
        for p in obj.support_points(&-palm_n) {
            let radial = p - palm_n * palm_n.dot(&(p - pose.translation)) - pose.translation;
            if geometry::norm(&radial) <= hand::PALM_RADIUS {
                out.push(Contact {
                    point: p,
                    normal: -palm_n,
                    mu,
                    kind: ContactKind::Palm,
                });
            }
        }
    }
    if task.grasp_type == GraspType::Lateral {
        for p in obj.support_points(&-V3::z()) {
            out.push(Contact {
                point: p,
                normal: -V3::z(),
                mu: wrench::TABLE_FRICTION,
                kind: ContactKind::Table,
            });
        }
    }
    out
}

/// Simulates one episode of `task`.
pub fn simulate_episode(
    morph: &HandMorphology,
    plan: &ControlPlan,
    task: &GraspTask,
    seed: u64,
    cfg: &EvalConfig,
) -> Result<EpisodeResult, GeometryError> {
    let closing = close_hand(morph, plan, task, cfg)?;
    let pert = wrench::perturbation_test(&closing.grasp, seed);
    let grasp = task.grasp_type;

    let mut total = 0.0;
    for (&ro, &cs) in closing.contact_ratio_trace.iter().zip(&closing.self_collision_trace) {
        total += match cfg.reward_variant {
            RewardVariant::PerStep => reward::step_reward(
                &StepState {
                    self_collision: cs,
                    tip_contact_ratio: ro,
                    d_pos: 0.0,
                    d_orn: 0.0,
                },
                grasp,
            ),
            RewardVariant::TwoPhase => reward::two_phase_closing_reward(cs, ro),
        };
    }
    let final_ro = closing.grasp.tip_contact_ratio;
    let cs = closing.grasp.self_collision;
    for k in 0..wrench::PERTURBATION_DIRECTIONS {
        let ok = pert.flags[k];
        let per_step = match cfg.reward_variant {
            RewardVariant::PerStep => reward::step_reward(
                &StepState {
                    self_collision: cs,
                    tip_contact_ratio: if ok { final_ro } else { 0.0 },
                    d_pos: pert.d_pos[k],
                    d_orn: pert.d_orn[k],
                },
                grasp,
            ),
            RewardVariant::TwoPhase => reward::two_phase_perturbation_reward(ok, pert.magnitudes[k], if ok { final_ro } else { 0.0 }),
        };
        total += per_step * cfg.perturbation_steps as f64;
    }
    let n_steps = cfg.closing_steps + wrench::PERTURBATION_DIRECTIONS * cfg.perturbation_steps;
    let self_collision_steps = closing.self_collision_trace.iter().filter(|&&c| c).count()
        + if cs {
            wrench::PERTURBATION_DIRECTIONS * cfg.perturbation_steps
        } else {
            0
        };
    Ok(EpisodeResult {
        episodic_reward: total / n_steps as f64,
        success: pert.survived as usize == wrench::PERTURBATION_DIRECTIONS,
        contact_ratio_trace: closing.contact_ratio_trace,
        self_collision_steps,
        perturbation_survived: pert.survived,
        n_contacts: closing.grasp.contacts.len(),
        perturbation: pert,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{decode, DesignLayout, ParamVector, PARAM_DIM};
    use crate::objects::ObjectModel;

    fn design(mounts_deg: &[f64], cmd: f64) -> crate::design::DecodedDesign {
        let l = DesignLayout::standard();
        let mut t = vec![0.5; PARAM_DIM];
        t[2] = DesignLayout::finger_count_raw(mounts_deg.len());
        for (i, m) in mounts_deg.iter().enumerate() {
            t[l.mount_index(i)] = m / 360.0;
            t[3 + i] = 0.3; // three segments
        }
        for g in 0..3 {
            for i in 0..18 {
                t[122 + 21 * g + i] = cmd;
            }
        }
        decode(&ParamVector::new(t).unwrap(), &l).unwrap()
    }

    fn sphere_task(g: GraspType, r: f64) -> GraspTask {
        GraspTask {
            grasp_type: g,
            object: ObjectModel::new(
                Shape::Sphere {
                    radius: r,
                    subdivisions: 3,
                },
                1.0,
            ),
            seed: 11,
        }
    }

    #[test]
    fn zero_commands_never_close() {
        let d = design(&[0.0, 120.0, 240.0], 0.5);
        let r = simulate_episode(&d.morphology, &d.control, &sphere_task(GraspType::Power, 1.0), 1, &EvalConfig::default()).unwrap();
        assert!(r.contact_ratio_trace.iter().all(|&x| x == 0.0));
        assert!(!r.success);
        assert_eq!(r.contact_ratio_trace.len(), 2000);
    }

    #[test]
    fn symmetric_fingers_grasp_sphere() {
        let d = design(&[0.0, 120.0, 240.0], 1.0);
        let task = sphere_task(GraspType::Power, 1.2);
        let cfg = EvalConfig::default();
        let r = simulate_episode(&d.morphology, &d.control, &task, 1, &cfg).unwrap();
        assert!(r.contact_ratio_trace.last().copied().unwrap() > 0.0);
        assert!(r.success, "{:?} after {} self-collision steps", r.perturbation, r.self_collision_steps);
        let again = simulate_episode(&d.morphology, &d.control, &task, 1, &cfg).unwrap();
        assert_eq!(r, again);
    }
}
