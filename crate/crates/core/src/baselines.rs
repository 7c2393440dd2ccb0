//! Reference optimizers under the same budget and score function as LABO.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bo::{self, BoConfig, SurrogateState};
use crate::math;
use crate::objective::Objective;
use crate::rng;
use crate::search::{self, EvalRecord, History, Method, Optimizer, SearchError};

fn tail(h: &History, from: usize) -> Vec<EvalRecord> {
    h.records[from..].to_vec()
}

// ---------------------------------------------------------------- uniform

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniformConfig {
    /// Points evaluated per iteration.
    pub batch: usize,
}

impl Default for UniformConfig {
    fn default() -> Self {
        Self { batch: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformSearch {
    pub config: UniformConfig,
    pub seed: u64,
    pub budget: usize,
    pub dim: usize,
    pub iteration: usize,
    pub history: History,
}

impl UniformSearch {
    pub fn new(dim: usize, budget: usize, seed: u64, config: UniformConfig) -> Self {
        Self {
            config,
            seed,
            budget,
            dim,
            iteration: 0,
            history: History::default(),
        }
    }
}

impl Optimizer for UniformSearch {
    fn method(&self) -> Method {
        Method::Uniform
    }
    fn budget(&self) -> usize {
        self.budget
    }
    fn history(&self) -> &History {
        &self.history
    }
    fn iteration(&self) -> usize {
        self.iteration
    }

    fn step(&mut self, objective: &dyn Objective) -> Result<Vec<EvalRecord>, SearchError> {
        search::check_dim(objective, self.dim)?;
        let start = self.history.len();
        let n = self.config.batch.max(1).min(self.budget - start);
        // One stream per evaluation index, so batch size does not change
        // which points are drawn.
        let xs: Vec<Vec<f64>> = (start..start + n)
            .map(|i| {
                let mut r = rng::stream(self.seed, "uniform", i as u64);
                (0..self.dim).map(|_| r.random::<f64>()).collect()
            })
            .collect();
        let evals = objective.evaluate_batch(&xs);
        for (x, e) in xs.into_iter().zip(&evals) {
            self.history.push(self.iteration, x, None, e, None);
        }
        self.iteration += 1;
        Ok(tail(&self.history, start))
    }
}

// ----------------------------------------------------------------- CMA-ES

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmaesConfig {
    pub sigma0: f64,
    /// Population size; `None` for `4 + ⌊3 ln n⌋`.
    pub lambda: Option<usize>,
    /// Initial mean coordinate (the same in every dimension).
    pub mean0: f64,
}

impl Default for CmaesConfig {
    fn default() -> Self {
        Self {
            sigma0: 0.3,
            lambda: None,
            mean0: 0.5,
        }
    }
}

pub const EIGEN_FLOOR: f64 = 1e-14;

pub fn default_lambda(n: usize) -> usize {
    4 + math::floor(3.0 * math::ln(n as f64)) as usize
}

/// Folds `x` into `[0, 1]` by mirror reflection at the faces.
pub fn reflect_unit(x: f64) -> f64 {
    let y = x.rem_euclid(2.0);
    if y > 1.0 {
        2.0 - y
    } else {
        y
    }
}

/// Minimising CMA-ES with rank-one and rank-μ covariance updates and
/// cumulative step-size adaptation (standard default parameters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cmaes {
    pub n: usize,
    pub lambda: usize,
    pub mu: usize,
    pub weights: Vec<f64>,
    pub mueff: f64,
    pub cs: f64,
    pub ds: f64,
    pub cc: f64,
    pub c1: f64,
    pub cmu: f64,
    pub chi_n: f64,
    #[serde(with = "crate::linalg::serde_dense::vector")]
    pub mean: DVector<f64>,
    pub sigma: f64,
    #[serde(with = "crate::linalg::serde_dense::matrix")]
    pub cov: DMatrix<f64>,
    /// Eigenvectors (columns) and square roots of the eigenvalues of `cov`.
    #[serde(with = "crate::linalg::serde_dense::matrix")]
    pub basis: DMatrix<f64>,
    #[serde(with = "crate::linalg::serde_dense::vector")]
    pub scales: DVector<f64>,
    #[serde(with = "crate::linalg::serde_dense::vector")]
    pub ps: DVector<f64>,
    #[serde(with = "crate::linalg::serde_dense::vector")]
    pub pc: DVector<f64>,
    pub generation: usize,
    /// Mirror samples into the unit cube.
    pub unit_box: bool,
    /// Spectrum floor activations (degenerate covariance events).
    pub floor_events: usize,
}

impl Cmaes {
    pub fn new(mean: Vec<f64>, sigma: f64, lambda: Option<usize>, unit_box: bool) -> Self {
        let n = mean.len();
        let lambda = lambda.unwrap_or_else(|| default_lambda(n)).max(4);
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu).map(|i| math::ln((lambda as f64 + 1.0) / 2.0) - math::ln(i as f64)).collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let nf = n as f64;
        let cs = (mueff + 2.0) / (nf + mueff + 5.0);
        let ds = 1.0 + 2.0 * (math::sqrt((mueff - 1.0) / (nf + 1.0)) - 1.0).max(0.0) + cs;
        let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
        let c1 = 2.0 / ((nf + 1.3) * (nf + 1.3) + mueff);
        let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0) * (nf + 2.0) + mueff));
        let chi_n = math::sqrt(nf) * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Self {
            n,
            lambda,
            mu,
            weights,
            mueff,
            cs,
            ds,
            cc,
            c1,
            cmu,
            chi_n,
            mean: DVector::from_vec(mean),
            sigma,
            cov: DMatrix::identity(n, n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            ps: DVector::zeros(n),
            pc: DVector::zeros(n),
            generation: 0,
            unit_box,
            floor_events: 0,
        }
    }

    /// One generation of `λ` samples `m + σ B D z`.
    pub fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        (0..self.lambda)
            .map(|_| {
                let z = DVector::from_fn(self.n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = &self.basis * z.component_mul(&self.scales);
                let x = &self.mean + y * self.sigma;
                x.iter()
                    .map(|&v| if self.unit_box { reflect_unit(v) } else { v })
                    .collect()
            })
            .collect()
    }

    /// Updates from one full generation; `fitness` is minimised.
    pub fn tell(&mut self, xs: &[Vec<f64>], fitness: &[f64]) {
        assert_eq!(xs.len(), self.lambda, "tell needs a full generation");
        assert_eq!(fitness.len(), self.lambda);
        let mut order: Vec<usize> = (0..self.lambda).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
        let n = self.n;
        let old = self.mean.clone();
        let ys: Vec<DVector<f64>> = order[..self.mu]
            .iter()
            .map(|&i| (DVector::from_column_slice(&xs[i]) - &old) / self.sigma)
            .collect();
        let mut yw = DVector::zeros(n);
        for (w, y) in self.weights.iter().zip(&ys) {
            yw += y * *w;
        }
        self.mean = &old + &yw * self.sigma;

        // C^{-1/2} y_w = B D⁻¹ Bᵀ y_w
        let inv_scales = self.scales.map(|s| 1.0 / s);
        let c_inv_half_yw = &self.basis * (self.basis.tr_mul(&yw)).component_mul(&inv_scales);
        self.ps = &self.ps * (1.0 - self.cs) + c_inv_half_yw * math::sqrt(self.cs * (2.0 - self.cs) * self.mueff);
        let g = (self.generation + 1) as f64;
        let ps_norm = self.ps.norm();
        let denom = math::sqrt(1.0 - math::powi(1.0 - self.cs, (2.0 * g) as i32));
        let hsig = ps_norm / denom < (1.4 + 2.0 / (n as f64 + 1.0)) * self.chi_n;
        let h = if hsig { 1.0 } else { 0.0 };
        self.pc = &self.pc * (1.0 - self.cc) + &yw * (h * math::sqrt(self.cc * (2.0 - self.cc) * self.mueff));

        let mut rank_mu = DMatrix::zeros(n, n);
        for (w, y) in self.weights.iter().zip(&ys) {
            rank_mu.ger(*w, y, y, 1.0);
        }
        let delta = (1.0 - h) * self.cc * (2.0 - self.cc);
        let mut cov = &self.cov * (1.0 - self.c1 - self.cmu + self.c1 * delta);
        cov.ger(self.c1, &self.pc, &self.pc, 1.0);
        cov += rank_mu * self.cmu;
        self.cov = (&cov + cov.transpose()) * 0.5;

        self.sigma *= math::exp((self.cs / self.ds) * (ps_norm / self.chi_n - 1.0));
        self.generation += 1;
        self.decompose();
    }

    fn decompose(&mut self) {
        let eig = SymmetricEigen::new(self.cov.clone());
        let mut floored = false;
        let vals = eig.eigenvalues.map(|v| {
            if v < EIGEN_FLOOR {
                floored = true;
                EIGEN_FLOOR
            } else {
                v
            }
        });
        if floored {
            self.floor_events += 1;
            // Rebuild C from the floored spectrum so it stays PD.
            let d = DMatrix::from_diagonal(&vals);
            let c = &eig.eigenvectors * d * eig.eigenvectors.transpose();
            self.cov = (&c + c.transpose()) * 0.5;
        }
        self.basis = eig.eigenvectors;
        self.scales = vals.map(math::sqrt);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaesSearch {
    pub config: CmaesConfig,
    pub seed: u64,
    pub budget: usize,
    pub engine: Cmaes,
    pub history: History,
}

impl CmaesSearch {
    pub fn new(dim: usize, budget: usize, seed: u64, config: CmaesConfig) -> Self {
        let engine = Cmaes::new(alloc::vec![config.mean0; dim], config.sigma0, config.lambda, true);
        Self {
            config,
            seed,
            budget,
            engine,
            history: History::default(),
        }
    }
}

impl Optimizer for CmaesSearch {
    fn method(&self) -> Method {
        Method::Cmaes
    }
    fn budget(&self) -> usize {
        self.budget
    }
    fn history(&self) -> &History {
        &self.history
    }
    fn iteration(&self) -> usize {
        self.engine.generation
    }

    /// One generation. A final generation cut short by the budget is
    /// evaluated but not used for an update.
    fn step(&mut self, objective: &dyn Objective) -> Result<Vec<EvalRecord>, SearchError> {
        search::check_dim(objective, self.engine.n)?;
        let start = self.history.len();
        let g = self.engine.generation;
        let xs = self.engine.ask(&mut rng::stream(self.seed, "cmaes", g as u64));
        let n = xs.len().min(self.budget - start);
        let evals = objective.evaluate_batch(&xs[..n]);
        let note: Option<String> = (self.engine.floor_events > 0).then(|| alloc::format!("spectrum floored {} time(s)", self.engine.floor_events));
        for (x, e) in xs.iter().zip(&evals) {
            self.history.push(g, x.clone(), None, e, note.clone());
        }
        if n == xs.len() {
            let f: Vec<f64> = evals.iter().map(|e| -e.score).collect();
            self.engine.tell(&xs, &f);
        } else {
            self.engine.generation += 1;
        }
        Ok(tail(&self.history, start))
    }
}

// -------------------------------------------------------------- raw BO

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawBo {
    pub config: BoConfig,
    pub batch: usize,
    pub seed: u64,
    pub budget: usize,
    pub dim: usize,
    pub iteration: usize,
    pub surrogate: SurrogateState,
    pub history: History,
}

impl RawBo {
    pub fn new(dim: usize, budget: usize, seed: u64, batch: usize, config: BoConfig) -> Self {
        Self {
            config,
            batch: batch.max(1),
            seed,
            budget,
            dim,
            iteration: 0,
            surrogate: SurrogateState::default(),
            history: History::default(),
        }
    }
}

impl Optimizer for RawBo {
    fn method(&self) -> Method {
        Method::RawBo
    }
    fn budget(&self) -> usize {
        self.budget
    }
    fn history(&self) -> &History {
        &self.history
    }
    fn iteration(&self) -> usize {
        self.iteration
    }

    fn step(&mut self, objective: &dyn Objective) -> Result<Vec<EvalRecord>, SearchError> {
        search::check_dim(objective, self.dim)?;
        let start = self.history.len();
        let n = self.batch.min(self.budget - start);
        let inputs: Vec<Vec<f64>> = self.history.records.iter().map(|r| r.theta.clone()).collect();
        let targets: Vec<f64> = self.history.records.iter().map(|r| r.score).collect();
        let s = bo::suggest(&inputs, &targets, self.dim, n, &mut self.surrogate, &self.config, self.seed, self.iteration);
        let evals = objective.evaluate_batch(&s.points);
        for (x, e) in s.points.into_iter().zip(&evals) {
            self.history.push(self.iteration, x, None, e, s.note.clone());
        }
        self.iteration += 1;
        Ok(tail(&self.history, start))
    }
}
