//! Gaussian-process regression with isotropic Matérn kernels.
//!
//! Targets are standardised before fitting; hyperparameters
//! `(log α, log ℓ, log σ_n²)` are chosen by monotone gradient ascent on the
//! log marginal likelihood from several starts.

pub mod acquisition;

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::math::{self, PI};

pub use acquisition::{propose, ucb, AcqSign, GradientMode, ProposeConfig};

pub const JITTER_START: f64 = 1e-6;
pub const JITTER_MAX: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GpError {
    #[error("unsupported Matérn smoothness {0} (only 1/2, 3/2 and 5/2 have closed forms)")]
    UnsupportedSmoothness(f64),
    #[error("Gram matrix is not positive definite even with jitter {JITTER_MAX}")]
    SingularGram,
    #[error("model has not been fitted")]
    UnfittedModel,
    #[error("need at least {needed} observations, got {got}")]
    NotEnoughData { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Smoothness {
    #[serde(rename = "1/2")]
    Half,
    #[serde(rename = "3/2")]
    ThreeHalves,
    #[default]
    #[serde(rename = "5/2")]
    FiveHalves,
}

impl Smoothness {
    pub fn from_nu(nu: f64) -> Result<Self, GpError> {
        if nu == 0.5 {
            Ok(Self::Half)
        } else if nu == 1.5 {
            Ok(Self::ThreeHalves)
        } else if nu == 2.5 {
            Ok(Self::FiveHalves)
        } else {
            Err(GpError::UnsupportedSmoothness(nu))
        }
    }

    pub fn nu(self) -> f64 {
        match self {
            Self::Half => 0.5,
            Self::ThreeHalves => 1.5,
            Self::FiveHalves => 2.5,
        }
    }

    /// Kernel value at scaled distance `r = ‖x − x'‖ / ℓ` with unit scale.
    pub fn correlation(self, r: f64) -> f64 {
        match self {
            Self::Half => math::exp(-r),
            Self::ThreeHalves => {
                let a = math::sqrt(3.0) * r;
                (1.0 + a) * math::exp(-a)
            }
            Self::FiveHalves => {
                let a = math::sqrt(5.0) * r;
                (1.0 + a + 5.0 * r * r / 3.0) * math::exp(-a)
            }
        }
    }

    /// `∂k/∂ log ℓ` with unit scale, i.e. `−r k'(r)`.
    fn dlog_lengthscale(self, r: f64) -> f64 {
        match self {
            Self::Half => r * math::exp(-r),
            Self::ThreeHalves => 3.0 * r * r * math::exp(-math::sqrt(3.0) * r),
            Self::FiveHalves => {
                let a = math::sqrt(5.0) * r;
                5.0 / 3.0 * r * r * (1.0 + a) * math::exp(-a)
            }
        }
    }

    /// `g(r)` such that `∂k/∂x = −g(r) (x − x') / ℓ²` with unit scale.
    fn input_gradient_factor(self, r: f64) -> f64 {
        match self {
            Self::Half => {
                if r > 0.0 {
                    math::exp(-r) / r
                } else {
                    0.0
                }
            }
            Self::ThreeHalves => 3.0 * math::exp(-math::sqrt(3.0) * r),
            Self::FiveHalves => {
                let a = math::sqrt(5.0) * r;
                5.0 / 3.0 * (1.0 + a) * math::exp(-a)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub output_scale: f64,
    pub lengthscale: f64,
    pub noise: f64,
    pub smoothness: Smoothness,
}

impl Hyper {
    pub fn default_for(dim: usize) -> Self {
        Self {
            output_scale: 1.0,
            lengthscale: math::sqrt(dim as f64 / 6.0).max(0.1),
            noise: 1e-2,
            smoothness: Smoothness::FiveHalves,
        }
    }

    fn to_log(self) -> [f64; 3] {
        [math::ln(self.output_scale), math::ln(self.lengthscale), math::ln(self.noise)]
    }

    fn from_log(v: [f64; 3], smoothness: Smoothness) -> Self {
        Self {
            output_scale: math::exp(v[0]),
            lengthscale: math::exp(v[1]),
            noise: math::exp(v[2]),
            smoothness,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `k(x, x')` for hyperparameters `h`.
pub fn matern_kernel(x: &[f64], y: &[f64], h: &Hyper) -> f64 {
    h.output_scale * h.smoothness.correlation(math::sqrt(sq_dist(x, y)) / h.lengthscale)
}

/// Kernel matrix between two point sets.
pub fn gram(xs: &[Vec<f64>], ys: &[Vec<f64>], h: &Hyper) -> DMatrix<f64> {
    DMatrix::from_fn(xs.len(), ys.len(), |i, j| matern_kernel(&xs[i], &ys[j], h))
}

#[derive(Debug, Clone)]
struct Cache {
    chol: Cholesky<f64, Dyn>,
    /// `(K + σ²I)⁻¹ y` in standardised units.
    alpha: DVector<f64>,
    jitter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub fn of(y: &[f64]) -> Self {
        let n = y.len().max(1) as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = math::sqrt(var);
        Self {
            mean,
            std: if std > 1e-12 { std } else { 1.0 },
        }
    }
}

/// Summary of a hyperparameter fit, for logging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub hyper: Hyper,
    pub log_marginal_likelihood: f64,
    pub initial_log_marginal_likelihood: f64,
    pub jitter: f64,
    pub standardizer: Standardizer,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    std: Standardizer,
    y: DVector<f64>,
    hyper: Hyper,
    cache: Option<Cache>,
}

impl GpModel {
    /// Unconditioned model; call [`GpModel::condition`] before querying.
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>, hyper: Hyper) -> Result<Self, GpError> {
        if inputs.len() != targets.len() {
            return Err(GpError::ShapeMismatch {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        if let Some(d) = inputs.first().map(|v| v.len()) {
            if let Some(bad) = inputs.iter().find(|v| v.len() != d) {
                return Err(GpError::ShapeMismatch {
                    expected: d,
                    got: bad.len(),
                });
            }
        }
        let std = Standardizer::of(&targets);
        let y = DVector::from_iterator(targets.len(), targets.iter().map(|t| (t - std.mean) / std.std));
        Ok(Self {
            inputs,
            targets,
            std,
            y,
            hyper,
            cache: None,
        })
    }

    pub fn hyper(&self) -> &Hyper {
        &self.hyper
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn standardizer(&self) -> Standardizer {
        self.std
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map(|v| v.len()).unwrap_or(0)
    }

    pub fn jitter(&self) -> Option<f64> {
        self.cache.as_ref().map(|c| c.jitter)
    }

    pub fn is_conditioned(&self) -> bool {
        self.cache.is_some()
    }

    /// Replaces the hyperparameters and drops the cached factor.
    pub fn set_hyper(&mut self, h: Hyper) {
        self.hyper = h;
        self.cache = None;
    }

    /// Factorises `K + σ_n²I` (plus escalating jitter).
    pub fn condition(&mut self) -> Result<(), GpError> {
        let n = self.inputs.len();
        if n == 0 {
            return Err(GpError::NotEnoughData { needed: 1, got: 0 });
        }
        let mut k = gram(&self.inputs, &self.inputs, &self.hyper);
        for i in 0..n {
            k[(i, i)] += self.hyper.noise;
        }
        let (chol, jitter) = linalg::cholesky_with_jitter(&k, JITTER_START, JITTER_MAX).ok_or(GpError::SingularGram)?;
        let alpha = chol.solve(&self.y);
        self.cache = Some(Cache { chol, alpha, jitter });
        Ok(())
    }

    fn cache(&self) -> Result<&Cache, GpError> {
        self.cache.as_ref().ok_or(GpError::UnfittedModel)
    }

    /// Prior variance in target units.
    pub fn prior_variance(&self) -> f64 {
        self.hyper.output_scale * self.std.std * self.std.std
    }

    fn k_star(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.inputs.len(), self.inputs.iter().map(|xi| matern_kernel(x, xi, &self.hyper)))
    }

    /// Posterior mean and standard deviation of the latent function.
    pub fn posterior(&self, x: &[f64]) -> Result<(f64, f64), GpError> {
        let c = self.cache()?;
        self.check_dim(x)?;
        let k = self.k_star(x);
        let mean = k.dot(&c.alpha);
        let v = c.chol.l_dirty().solve_lower_triangular(&k).expect("Cholesky factor is non-singular");
        let var = (self.hyper.output_scale - v.dot(&v)).max(0.0);
        Ok((self.std.mean + self.std.std * mean, self.std.std * math::sqrt(var)))
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GpError> {
        if x.len() != self.dim() {
            return Err(GpError::ShapeMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Posterior mean and standard deviation with their gradients in `x`.
    pub fn posterior_grad(&self, x: &[f64]) -> Result<PosteriorGrad, GpError> {
        let c = self.cache()?;
        self.check_dim(x)?;
        let h = &self.hyper;
        let n = self.inputs.len();
        let d = x.len();
        let l2 = h.lengthscale * h.lengthscale;
        let mut k = DVector::zeros(n);
        // dk[(i, j)] = ∂k(x, x_i)/∂x_j
        let mut dk = DMatrix::zeros(n, d);
        for (i, xi) in self.inputs.iter().enumerate() {
            let r = math::sqrt(sq_dist(x, xi)) / h.lengthscale;
            k[i] = h.output_scale * h.smoothness.correlation(r);
            let g = h.output_scale * h.smoothness.input_gradient_factor(r) / l2;
            for j in 0..d {
                dk[(i, j)] = -g * (x[j] - xi[j]);
            }
        }
        let mean = k.dot(&c.alpha);
        let dmean = dk.tr_mul(&c.alpha);
        let w = c.chol.solve(&k);
        let var = (h.output_scale - k.dot(&w)).max(0.0);
        let sd = math::sqrt(var);
        let dvar = dk.tr_mul(&w) * -2.0;
        let dsd = if sd > 1e-12 { dvar / (2.0 * sd) } else { DVector::zeros(d) };
        let s = self.std.std;
        Ok(PosteriorGrad {
            mean: self.std.mean + s * mean,
            std: s * sd,
            dmean: (dmean * s).as_slice().to_vec(),
            dstd: (dsd * s).as_slice().to_vec(),
        })
    }

    /// Log marginal likelihood of the standardised targets.
    pub fn log_marginal_likelihood(&self) -> Result<f64, GpError> {
        let c = self.cache()?;
        let n = self.y.len() as f64;
        Ok(-0.5 * self.y.dot(&c.alpha) - 0.5 * linalg::chol_logdet(&c.chol) - 0.5 * n * math::ln(2.0 * PI))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrad {
    pub mean: f64,
    pub std: f64,
    pub dmean: Vec<f64>,
    pub dstd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub smoothness: Smoothness,
    pub restarts: usize,
    pub max_iters: usize,
    /// Bounds on `(α, ℓ, σ_n²)`.
    pub output_scale_bounds: (f64, f64),
    pub lengthscale_bounds: (f64, f64),
    pub noise_bounds: (f64, f64),
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            smoothness: Smoothness::FiveHalves,
            restarts: 4,
            max_iters: 60,
            output_scale_bounds: (1e-2, 1e2),
            lengthscale_bounds: (1e-2, 1e2),
            noise_bounds: (1e-6, 1.0),
        }
    }
}

/// Precomputed pairwise distances for repeated likelihood evaluations.
struct LmlProblem<'a> {
    dist: DMatrix<f64>,
    y: &'a DVector<f64>,
    smoothness: Smoothness,
}

impl LmlProblem<'_> {
    fn gram(&self, h: &Hyper) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.dist.nrows();
        let mut k = DMatrix::zeros(n, n);
        let mut dl = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                let r = self.dist[(i, j)] / h.lengthscale;
                k[(i, j)] = h.output_scale * self.smoothness.correlation(r);
                dl[(i, j)] = h.output_scale * self.smoothness.dlog_lengthscale(r);
            }
        }
        (k, dl)
    }

    fn factor(&self, h: &Hyper) -> Option<(DMatrix<f64>, Cholesky<f64, Dyn>, DMatrix<f64>)> {
        let (mut k, dl) = self.gram(h);
        let kf = k.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += h.noise;
        }
        let (c, _) = linalg::cholesky_with_jitter(&k, JITTER_START, JITTER_MAX)?;
        Some((kf, c, dl))
    }

    fn value(&self, h: &Hyper) -> f64 {
        match self.factor(h) {
            Some((_, c, _)) => {
                let a = c.solve(self.y);
                let n = self.y.len() as f64;
                -0.5 * self.y.dot(&a) - 0.5 * linalg::chol_logdet(&c) - 0.5 * n * math::ln(2.0 * PI)
            }
            None => f64::NEG_INFINITY,
        }
    }

    /// Value and gradient in `(log α, log ℓ, log σ_n²)`.
    fn value_grad(&self, h: &Hyper) -> (f64, [f64; 3]) {
        let Some((kf, c, dl)) = self.factor(h) else {
            return (f64::NEG_INFINITY, [0.0; 3]);
        };
        let a = c.solve(self.y);
        let n = self.y.len();
        let v = -0.5 * self.y.dot(&a) - 0.5 * linalg::chol_logdet(&c) - 0.5 * n as f64 * math::ln(2.0 * PI);
        let kinv = c.inverse();
        // W = a aᵀ − K⁻¹; ∂L/∂η = ½ tr(W ∂K/∂η).
        let tr = |dk: &DMatrix<f64>| -> f64 {
            let mut s = 0.0;
            for j in 0..n {
                for i in 0..n {
                    s += (a[i] * a[j] - kinv[(i, j)]) * dk[(j, i)];
                }
            }
            0.5 * s
        };
        let g_alpha = tr(&kf);
        let g_len = tr(&dl);
        let mut g_noise = 0.0;
        for i in 0..n {
            g_noise += a[i] * a[i] - kinv[(i, i)];
        }
        g_noise *= 0.5 * h.noise;
        (v, [g_alpha, g_len, g_noise])
    }
}

fn clamp_log(v: [f64; 3], cfg: &FitConfig) -> [f64; 3] {
    let b = [cfg.output_scale_bounds, cfg.lengthscale_bounds, cfg.noise_bounds];
    core::array::from_fn(|i| v[i].clamp(math::ln(b[i].0), math::ln(b[i].1)))
}

/// Fits hyperparameters on `(inputs, targets)` and conditions the model.
/// Restart 0 starts from `warm_start` (or a default); the others from
/// log-uniform draws inside the bounds.
pub fn fit<R: Rng + ?Sized>(
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    cfg: &FitConfig,
    warm_start: Option<Hyper>,
    rng: &mut R,
) -> Result<(GpModel, FitReport), GpError> {
    if inputs.len() < 2 {
        return Err(GpError::NotEnoughData {
            needed: 2,
            got: inputs.len(),
        });
    }
    let dim = inputs[0].len();
    let mut model = GpModel::new(inputs, targets, Hyper::default_for(dim))?;
    let n = model.inputs.len();
    let dist = DMatrix::from_fn(n, n, |i, j| math::sqrt(sq_dist(&model.inputs[i], &model.inputs[j])));
    let prob = LmlProblem {
        dist,
        y: &model.y,
        smoothness: cfg.smoothness,
    };
    let mut start0 = warm_start.unwrap_or_else(|| Hyper::default_for(dim));
    start0.smoothness = cfg.smoothness;
    let b = [cfg.output_scale_bounds, cfg.lengthscale_bounds, cfg.noise_bounds];

    let mut best: Option<(f64, [f64; 3])> = None;
    let mut initial = f64::NEG_INFINITY;
    let mut iterations = 0;
    for restart in 0..cfg.restarts.max(1) {
        let mut eta = if restart == 0 {
            clamp_log(start0.to_log(), cfg)
        } else {
            core::array::from_fn(|i| rng.random_range(math::ln(b[i].0)..=math::ln(b[i].1)))
        };
        let (mut val, mut grad) = prob.value_grad(&Hyper::from_log(eta, cfg.smoothness));
        if restart == 0 {
            initial = val;
        }
        let mut step = 0.1;
        for _ in 0..cfg.max_iters {
            iterations += 1;
            let gnorm = math::sqrt(grad.iter().map(|g| g * g).sum());
            if !(gnorm > 1e-9) || !val.is_finite() {
                break;
            }
            let mut accepted = false;
            for _ in 0..30 {
                let cand = clamp_log(core::array::from_fn(|i| eta[i] + step * grad[i] / gnorm), cfg);
                let cv = prob.value(&Hyper::from_log(cand, cfg.smoothness));
                if cv > val {
                    eta = cand;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            let (v, g) = prob.value_grad(&Hyper::from_log(eta, cfg.smoothness));
            let gain = v - val;
            val = v;
            grad = g;
            step = (step * 2.0).min(1.0);
            if gain < 1e-8 * (1.0 + val.abs()) {
                break;
            }
        }
        if val.is_finite() && best.is_none_or(|(bv, _)| val > bv) {
            best = Some((val, eta));
        }
    }
    let (val, eta) = best.ok_or(GpError::SingularGram)?;
    model.set_hyper(Hyper::from_log(eta, cfg.smoothness));
    model.condition()?;
    let report = FitReport {
        hyper: model.hyper,
        log_marginal_likelihood: val,
        initial_log_marginal_likelihood: initial,
        jitter: model.jitter().unwrap_or(JITTER_START),
        standardizer: model.std,
        iterations,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn unit_hyper(s: Smoothness) -> Hyper {
        Hyper {
            output_scale: 1.0,
            lengthscale: 1.0,
            noise: 1e-6,
            smoothness: s,
        }
    }

    #[test]
    fn kernel_examples() {
        let h = unit_hyper(Smoothness::Half);
        assert_eq!(matern_kernel(&[0.3, 0.2], &[0.3, 0.2], &h), 1.0);
        assert!((matern_kernel(&[0.0], &[1.0], &h) - (-1.0f64).exp()).abs() < 1e-15);
        let h = unit_hyper(Smoothness::FiveHalves);
        let s5 = 5f64.sqrt();
        let expect = (1.0 + s5 + 5.0 / 3.0) * (-s5).exp();
        assert!((matern_kernel(&[0.0], &[1.0], &h) - expect).abs() < 1e-15);
        assert!((expect - 0.52399).abs() < 1e-5);
        assert_eq!(Smoothness::from_nu(1.0), Err(GpError::UnsupportedSmoothness(1.0)));
    }

    #[test]
    fn duplicate_inputs_fit_via_jitter() {
        let x = alloc::vec![alloc::vec![0.5, 0.5], alloc::vec![0.5, 0.5], alloc::vec![0.1, 0.9]];
        let y = alloc::vec![1.0, 1.0, -1.0];
        let mut r = rng::stream(0, "gp", 0);
        let cfg = FitConfig {
            noise_bounds: (1e-6, 1e-6),
            ..FitConfig::default()
        };
        let (m, _) = fit(x, y, &cfg, None, &mut r).unwrap();
        let (mu, _) = m.posterior(&[0.5, 0.5]).unwrap();
        assert!((mu - 1.0).abs() < 1e-5, "{mu}");
    }

    #[test]
    fn unfitted_model_errors() {
        let m = GpModel::new(alloc::vec![alloc::vec![0.0]], alloc::vec![1.0], unit_hyper(Smoothness::Half)).unwrap();
        assert_eq!(m.posterior(&[0.0]), Err(GpError::UnfittedModel));
    }

    #[test]
    fn far_points_revert_to_prior() {
        let mut m = GpModel::new(
            alloc::vec![alloc::vec![0.0], alloc::vec![0.1]],
            alloc::vec![1.0, 3.0],
            Hyper {
                lengthscale: 0.05,
                ..unit_hyper(Smoothness::ThreeHalves)
            },
        )
        .unwrap();
        m.condition().unwrap();
        let (mu, sd) = m.posterior(&[100.0]).unwrap();
        assert!((mu - 2.0).abs() < 1e-12);
        assert!((sd - m.prior_variance().sqrt()).abs() < 1e-12);
    }

    #[test]
    fn lml_gradient_matches_finite_differences() {
        let mut r = rng::stream(3, "gp", 0);
        let x: Vec<Vec<f64>> = (0..12).map(|_| (0..3).map(|_| r.random::<f64>()).collect()).collect();
        let y: Vec<f64> = x.iter().map(|v| (3.0 * v[0]).sin() + v[1]).collect();
        for s in [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves] {
            let m = GpModel::new(x.clone(), y.clone(), Hyper::default_for(3)).unwrap();
            let n = x.len();
            let prob = LmlProblem {
                dist: DMatrix::from_fn(n, n, |i, j| sq_dist(&x[i], &x[j]).sqrt()),
                y: &m.y,
                smoothness: s,
            };
            let eta = [0.2, -0.7, -3.0];
            let (_, g) = prob.value_grad(&Hyper::from_log(eta, s));
            for i in 0..3 {
                let h = 1e-6;
                let mut p = eta;
                p[i] += h;
                let mut q = eta;
                q[i] -= h;
                let fd = (prob.value(&Hyper::from_log(p, s)) - prob.value(&Hyper::from_log(q, s))) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()), "{s:?} {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn posterior_gradient_matches_finite_differences() {
        let mut r = rng::stream(4, "gp", 0);
        let x: Vec<Vec<f64>> = (0..10).map(|_| (0..4).map(|_| r.random::<f64>()).collect()).collect();
        let y: Vec<f64> = x.iter().map(|v| v[0] - v[2] * v[3]).collect();
        for s in [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves] {
            let mut m = GpModel::new(x.clone(), y.clone(), Hyper { smoothness: s, lengthscale: 0.6, ..Hyper::default_for(4) }).unwrap();
            m.condition().unwrap();
            let p = [0.3, 0.6, 0.2, 0.8];
            let g = m.posterior_grad(&p).unwrap();
            let (mu, sd) = m.posterior(&p).unwrap();
            assert!((g.mean - mu).abs() < 1e-12 && (g.std - sd).abs() < 1e-9);
            for j in 0..4 {
                let h = 1e-6;
                let mut a = p;
                a[j] += h;
                let mut b = p;
                b[j] -= h;
                let (ma, sa) = m.posterior(&a).unwrap();
                let (mb, sb) = m.posterior(&b).unwrap();
                assert!(((ma - mb) / (2.0 * h) - g.dmean[j]).abs() < 1e-5, "{s:?}");
                assert!(((sa - sb) / (2.0 * h) - g.dstd[j]).abs() < 1e-5, "{s:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric(a in proptest::collection::vec(0.0f64..1.0, 5), b in proptest::collection::vec(0.0f64..1.0, 5), nu in 0usize..3, l in 0.05f64..3.0) {
            let s = [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves][nu];
            let h = Hyper { lengthscale: l, ..unit_hyper(s) };
            prop_assert_eq!(matern_kernel(&a, &b, &h), matern_kernel(&b, &a, &h));
        }

        #[test]
        fn posterior_variance_is_bounded(seed in 0u64..200, q in proptest::collection::vec(-0.5f64..1.5, 3)) {
            let mut r = rng::stream(seed, "gp", 1);
            let x: Vec<Vec<f64>> = (0..8).map(|_| (0..3).map(|_| r.random::<f64>()).collect()).collect();
            let y: Vec<f64> = (0..8).map(|_| r.random::<f64>()).collect();
            let mut m = GpModel::new(x, y, Hyper::default_for(3)).unwrap();
            m.condition().unwrap();
            let (_, sd) = m.posterior(&q).unwrap();
            prop_assert!(sd >= 0.0);
            prop_assert!(sd * sd <= m.prior_variance() + 1e-9);
        }
    }
}
