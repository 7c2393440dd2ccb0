//! Design score over a task suite.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::episode::{self, EpisodeResult, GeometryError};
use super::reward::RewardVariant;
use super::wrench;
use super::{GraspType, Split, TaskSuite};
use crate::design::{self, DecodeError, DecodedDesign, DesignLayout, ParamVector};
use crate::rng;

/// Score given to designs that cannot be evaluated. Lies below every
/// attainable score (`-0.21 - 0.1 · 7`).
pub const SCORE_FLOOR: f64 = -1.0;
/// The morphology cost enters the score as `cost / COST_DIVISOR`, i.e. with
/// weight 0.1. Dividing keeps results such as `7 / 10 = 0.7` correctly
/// rounded, which `0.1 * 7` is not.
pub const COST_DIVISOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub floor: f64,
    pub reward_variant: RewardVariant,
    pub stiffness: f64,
    pub closing_steps: usize,
    pub perturbation_steps: usize,
    pub dt: f64,
    pub contact_tolerance: f64,
    pub bisection_iters: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            floor: SCORE_FLOOR,
            reward_variant: RewardVariant::PerStep,
            stiffness: wrench::DEFAULT_STIFFNESS,
            closing_steps: 2000,
            perturbation_steps: 100,
            dt: 1.0 / 240.0,
            contact_tolerance: 0.02,
            bisection_iters: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum ScoreStatus {
    Scored,
    Rejected(String),
    GeometryFailure(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub status: ScoreStatus,
    #[serde(rename = "F")]
    pub f: f64,
    pub cost: f64,
    pub per_task_rewards: Vec<f64>,
    pub p: Vec<bool>,
    pub per_type_success_rate: [f64; 3],
    /// Tasks of each grasp type in the evaluated split.
    pub per_type_count: [usize; 3],
}

impl ScoreReport {
    pub fn is_scored(&self) -> bool {
        self.status == ScoreStatus::Scored
    }

    /// `mean(per_task_rewards) − 0.1 · cost`.
    pub fn recompute_f(&self) -> f64 {
        let n = self.per_task_rewards.len().max(1) as f64;
        self.per_task_rewards.iter().sum::<f64>() / n - self.cost / COST_DIVISOR
    }

    /// Task-count-weighted mean of the per-type rates.
    pub fn overall_success_rate(&self) -> f64 {
        let n: usize = self.per_type_count.iter().sum();
        if n == 0 {
            return 0.0;
        }
        (0..3)
            .map(|g| self.per_type_success_rate[g] * self.per_type_count[g] as f64)
            .sum::<f64>()
            / n as f64
    }

    pub fn success_labels(&self) -> Vec<f64> {
        self.p.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    fn failed(status: ScoreStatus, cost: f64, types: &[GraspType], floor: f64) -> Self {
        let mut per_type_count = [0; 3];
        for g in types {
            per_type_count[g.index()] += 1;
        }
        Self {
            status,
            f: floor,
            cost,
            per_task_rewards: Vec::new(),
            p: alloc::vec![false; types.len()],
            per_type_success_rate: [0.0; 3],
            per_type_count,
        }
    }
}

/// Runs `n` independent jobs; the harness supplies a parallel version.
pub trait TaskMap {
    fn map(&self, n: usize, job: &(dyn Fn(usize) -> Result<EpisodeResult, GeometryError> + Sync))
        -> Vec<Result<EpisodeResult, GeometryError>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl TaskMap for Sequential {
    fn map(
        &self,
        n: usize,
        job: &(dyn Fn(usize) -> Result<EpisodeResult, GeometryError> + Sync),
    ) -> Vec<Result<EpisodeResult, GeometryError>> {
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let r = job(i);
            let stop = r.is_err();
            out.push(r);
            // One geometry failure fails the whole design.
            if stop {
                break;
            }
        }
        out
    }
}

/// Seed of the episode for task `index` under evaluation seed `seed`.
pub fn episode_seed(seed: u64, task_seed: u64, index: usize) -> u64 {
    rng::derive_seed(seed ^ task_seed.rotate_left(23), "episode", index as u64)
}

/// Scores a decoded design on the tasks of one split.
pub fn score_decoded(
    design: &DecodedDesign,
    suite: &TaskSuite,
    split: Split,
    seed: u64,
    cfg: &EvalConfig,
    exec: &dyn TaskMap,
) -> ScoreReport {
    let idx = suite.indices(split);
    let types: Vec<GraspType> = idx.iter().map(|&i| suite.tasks[i].grasp_type).collect();
    let cost = design::morphology_cost(&design.morphology);
    let job = |k: usize| {
        let i = idx[k];
        let t = &suite.tasks[i];
        episode::simulate_episode(&design.morphology, &design.control, t, episode_seed(seed, t.seed, i), cfg)
    };
    let results = exec.map(idx.len(), &job);
    let mut episodes = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(e) => episodes.push(e),
            Err(e) => {
                return ScoreReport::failed(ScoreStatus::GeometryFailure(e.to_string()), cost, &types, cfg.floor);
            }
        }
    }
    assemble(&episodes, &types, cost)
}

fn assemble(episodes: &[EpisodeResult], types: &[GraspType], cost: f64) -> ScoreReport {
    let per_task_rewards: Vec<f64> = episodes.iter().map(|e| e.episodic_reward).collect();
    let p: Vec<bool> = episodes.iter().map(|e| e.success).collect();
    let mut count = [0usize; 3];
    let mut hits = [0usize; 3];
    for (g, &s) in types.iter().zip(&p) {
        count[g.index()] += 1;
        hits[g.index()] += s as usize;
    }
    let per_type_success_rate =
        core::array::from_fn(|g| if count[g] > 0 { hits[g] as f64 / count[g] as f64 } else { 0.0 });
    let mut report = ScoreReport {
        status: ScoreStatus::Scored,
        f: 0.0,
        cost,
        per_task_rewards,
        p,
        per_type_success_rate,
        per_type_count: count,
    };
    report.f = report.recompute_f();
    report
}

fn score_split(
    theta: &ParamVector,
    suite: &TaskSuite,
    split: Split,
    seed: u64,
    cfg: &EvalConfig,
    exec: &dyn TaskMap,
) -> ScoreReport {
    match design::decode(theta, &DesignLayout::standard()) {
        Ok(d) => score_decoded(&d, suite, split, seed, cfg, exec),
        Err(DecodeError::Rejected { morphology, rejection }) => {
            let types: Vec<GraspType> = suite.indices(split).iter().map(|&i| suite.tasks[i].grasp_type).collect();
            ScoreReport::failed(
                ScoreStatus::Rejected(rejection.to_string()),
                design::morphology_cost(&morphology),
                &types,
                cfg.floor,
            )
        }
        Err(DecodeError::Malformed(_)) => unreachable!("ParamVector is validated on construction"),
    }
}

/// `F(θ)` and success labels on the train split.
pub fn score(theta: &ParamVector, suite: &TaskSuite, seed: u64, cfg: &EvalConfig) -> ScoreReport {
    score_split(theta, suite, Split::Train, seed, cfg, &Sequential)
}

pub fn score_with(theta: &ParamVector, suite: &TaskSuite, seed: u64, cfg: &EvalConfig, exec: &dyn TaskMap) -> ScoreReport {
    score_split(theta, suite, Split::Train, seed, cfg, exec)
}

/// Reports on the train and test splits.
pub fn evaluate_design(
    theta: &ParamVector,
    suite: &TaskSuite,
    seed: u64,
    cfg: &EvalConfig,
    exec: &dyn TaskMap,
) -> (ScoreReport, ScoreReport) {
    (
        score_split(theta, suite, Split::Train, seed, cfg, exec),
        score_split(theta, suite, Split::Test, seed, cfg, exec),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{HandMorphology, PARAM_DIM};

    fn episode(reward: f64, success: bool) -> EpisodeResult {
        EpisodeResult {
            episodic_reward: reward,
            success,
            contact_ratio_trace: Vec::new(),
            self_collision_steps: 0,
            perturbation_survived: if success { 8 } else { 0 },
            perturbation: wrench::PerturbationOutcome {
                survived: 0,
                flags: [false; 8],
                magnitudes: [0.0; 8],
                d_pos: [0.0; 8],
                d_orn: [0.0; 8],
                lifted: true,
            },
            n_contacts: 0,
        }
    }

    fn morph(n_f: usize, segs: usize) -> HandMorphology {
        let mut t = alloc::vec![0.5; PARAM_DIM];
        t[2] = DesignLayout::finger_count_raw(n_f);
        let mut m = design::decode_morphology(&ParamVector::new(t).unwrap(), &DesignLayout::standard());
        m.segments_per_finger = alloc::vec![segs; n_f];
        m
    }

    #[test]
    fn zero_rewards_and_cost_examples() {
        let types = [GraspType::Power, GraspType::Pinch, GraspType::Lateral];
        let eps: Vec<_> = (0..3).map(|_| episode(0.0, false)).collect();
        let r = assemble(&eps, &types, design::morphology_cost(&morph(2, 3)));
        assert_eq!(r.f, 0.0);
        let r = assemble(&eps, &types, design::morphology_cost(&morph(6, 6)));
        assert_eq!(r.f, -0.7);
    }

    #[test]
    fn rejected_designs_score_the_floor() {
        let l = DesignLayout::standard();
        let mut t = alloc::vec![0.5; PARAM_DIM];
        t[2] = DesignLayout::finger_count_raw(2);
        t[l.mount_index(0)] = 0.0;
        t[l.mount_index(1)] = 5.0 / 360.0;
        let suite = TaskSuite::generate(6, 0, 1);
        let r = score(&ParamVector::new(t).unwrap(), &suite, 0, &EvalConfig::default());
        assert!(matches!(r.status, ScoreStatus::Rejected(_)));
        assert_eq!(r.f, SCORE_FLOOR);
        assert_eq!(r.p, alloc::vec![false; 6]);
    }

    #[test]
    fn per_type_rates_and_overall() {
        let types = [GraspType::Power, GraspType::Power, GraspType::Pinch, GraspType::Lateral];
        let eps = [episode(0.1, true), episode(0.0, false), episode(0.05, true), episode(0.0, false)];
        let r = assemble(&eps, &types, 0.5);
        assert_eq!(r.per_type_success_rate, [0.5, 1.0, 0.0]);
        assert!((r.overall_success_rate() - 0.5).abs() < 1e-15);
        assert!((r.f - r.recompute_f()).abs() <= 1e-12);
    }
}
