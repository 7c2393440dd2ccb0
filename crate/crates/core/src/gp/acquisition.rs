//! Upper-confidence-bound acquisition and its batched maximisation.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GpError, GpModel};
use crate::math;

/// Smallest distance between a candidate and the cube boundary.
pub const BOUNDARY_MARGIN: f64 = 1e-6;

/// Sign of the exploration term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcqSign {
    /// `μ + βσ` (optimistic).
    #[default]
    Optimistic,
    /// `μ − βσ` (pessimistic).
    Pessimistic,
}

impl AcqSign {
    fn factor(self) -> f64 {
        match self {
            Self::Optimistic => 1.0,
            Self::Pessimistic => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposeConfig {
    pub beta: f64,
    pub sign: AcqSign,
    pub n_candidates: usize,
    pub raw_samples: usize,
    pub restarts: usize,
    pub steps: usize,
    pub step_size: f64,
    pub min_distance: f64,
    pub gradient: GradientMode,
}

impl Default for ProposeConfig {
    fn default() -> Self {
        Self {
            beta: 0.2,
            sign: AcqSign::Optimistic,
            n_candidates: 2,
            raw_samples: 1024,
            restarts: 10,
            steps: 50,
            step_size: 0.01,
            min_distance: 1e-4,
            gradient: GradientMode::Analytic,
        }
    }
}

pub fn ucb(model: &GpModel, x: &[f64], beta: f64, sign: AcqSign) -> Result<f64, GpError> {
    let (m, s) = model.posterior(x)?;
    Ok(m + sign.factor() * beta * s)
}

fn ucb_grad(model: &GpModel, x: &[f64], cfg: &ProposeConfig) -> Result<(f64, Vec<f64>), GpError> {
    match cfg.gradient {
        GradientMode::Analytic => {
            let g = model.posterior_grad(x)?;
            let k = cfg.sign.factor() * cfg.beta;
            Ok((g.mean + k * g.std, g.dmean.iter().zip(&g.dstd).map(|(a, b)| a + k * b).collect()))
        }
        GradientMode::FiniteDifference => {
            let v = ucb(model, x, cfg.beta, cfg.sign)?;
            let h = 1e-6;
            let mut p = x.to_vec();
            let mut g = Vec::with_capacity(x.len());
            for j in 0..x.len() {
                p[j] = x[j] + h;
                let a = ucb(model, &p, cfg.beta, cfg.sign)?;
                p[j] = x[j] - h;
                let b = ucb(model, &p, cfg.beta, cfg.sign)?;
                p[j] = x[j];
                g.push((a - b) / (2.0 * h));
            }
            Ok((v, g))
        }
    }
}

fn project(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(BOUNDARY_MARGIN, 1.0 - BOUNDARY_MARGIN);
    }
}

/// Projected ascent from `x`: each step moves the largest coordinate by at
/// most `step_size`, halving on failure.
fn refine(model: &GpModel, mut x: Vec<f64>, cfg: &ProposeConfig) -> Result<(Vec<f64>, f64), GpError> {
    project(&mut x);
    let (mut val, mut grad) = ucb_grad(model, &x, cfg)?;
    for _ in 0..cfg.steps {
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if !(gmax > 0.0) {
            break;
        }
        let mut step = cfg.step_size;
        let mut moved = false;
        for _ in 0..10 {
            let mut cand: Vec<f64> = x.iter().zip(&grad).map(|(xi, g)| xi + step * g / gmax).collect();
            project(&mut cand);
            let cv = ucb(model, &cand, cfg.beta, cfg.sign)?;
            if cv > val {
                x = cand;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
        let (v, g) = ucb_grad(model, &x, cfg)?;
        val = v;
        grad = g;
    }
    Ok((x, val))
}

fn far_enough(x: &[f64], picked: &[Vec<f64>], min_distance: f64) -> bool {
    picked.iter().all(|p| {
        let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        math::sqrt(d2) >= min_distance
    })
}

/// `cfg.n_candidates` distinct maximisers of UCB on `(0, 1)^dim`: raw
/// uniform samples, the best `restarts` refined by projected ascent, then
/// greedy selection under a minimum pairwise distance.
pub fn propose<R: Rng + ?Sized>(model: &GpModel, cfg: &ProposeConfig, rng: &mut R) -> Result<Vec<Vec<f64>>, GpError> {
    let dim = model.dim();
    let mut raw: Vec<(Vec<f64>, f64)> = Vec::with_capacity(cfg.raw_samples);
    for _ in 0..cfg.raw_samples.max(cfg.n_candidates) {
        let mut x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        project(&mut x);
        let v = ucb(model, &x, cfg.beta, cfg.sign)?;
        raw.push((x, v));
    }
    raw.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut refined = Vec::with_capacity(cfg.restarts);
    for (x, _) in raw.iter().take(cfg.restarts) {
        refined.push(refine(model, x.clone(), cfg)?);
    }
    refined.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut picked: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_candidates);
    for (x, _) in refined.into_iter().chain(raw) {
        if picked.len() == cfg.n_candidates {
            break;
        }
        if far_enough(&x, &picked, cfg.min_distance) {
            picked.push(x);
        }
    }
    Ok(picked)
}
