//! Representation learning: encoder, decoder and success predictor with a
//! reparameterised, sigmoid-bounded latent.
//!
//! ```text
//! θ ─E→ (μ, log σ) ─ z = μ + σ⊙ε ─ f = sigmoid(z) ─D→ θ̂
//!                                                └P→ p̂
//! ```

pub mod adam;
pub mod mlp;

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::design::PARAM_DIM;
use crate::math;
pub use adam::Adam;
pub use mlp::{Activation, Mlp};

pub const LATENT_DIM: usize = 32;
pub const HIDDEN: usize = 100;
/// Predicted probabilities are clamped into `[CE_CLAMP, 1 − CE_CLAMP]`.
pub const CE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("sigma must be positive")]
    NonPositiveSigma,
    #[error("labelled loss needs labels for every design")]
    MissingLabels,
    #[error("empty dataset")]
    EmptyDataset,
}

/// Which way round the Gaussian KL divergence is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    /// `KL(N(0,I) ‖ N(μ,σ))`: `log σ + (1+μ²)/(2σ²) − ½` per dimension.
    #[default]
    PriorFirst,
    /// `KL(N(μ,σ) ‖ N(0,I))`: `(σ²+μ²−1)/2 − log σ` per dimension.
    #[serde(alias = "standard")]
    PosteriorFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnConfig {
    pub latent_dim: usize,
    pub hidden: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub kl_direction: KlDirection,
    pub kl_weight: f64,
}

impl Default for NnConfig {
    fn default() -> Self {
        Self {
            latent_dim: LATENT_DIM,
            hidden: HIDDEN,
            lr: 1e-4,
            batch_size: 32,
            kl_direction: KlDirection::PriorFirst,
            kl_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCode {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub z: Vec<f64>,
    pub f: Vec<f64>,
}

pub fn sample_latent(mu: &[f64], sigma: &[f64], eps: &[f64]) -> Result<LatentCode, NnError> {
    if sigma.len() != mu.len() {
        return Err(NnError::ShapeMismatch {
            expected: mu.len(),
            got: sigma.len(),
        });
    }
    if eps.len() != mu.len() {
        return Err(NnError::ShapeMismatch {
            expected: mu.len(),
            got: eps.len(),
        });
    }
    let z: Vec<f64> = (0..mu.len()).map(|j| mu[j] + sigma[j] * eps[j]).collect();
    Ok(LatentCode {
        mu: mu.to_vec(),
        sigma: sigma.to_vec(),
        f: z.iter().map(|&v| math::sigmoid(v)).collect(),
        z,
    })
}

/// Per-dimension KL in terms of `s = log σ`: value, `∂/∂μ`, `∂/∂s`.
fn kl_parts(mu: f64, s: f64, dir: KlDirection) -> (f64, f64, f64) {
    match dir {
        KlDirection::PriorFirst => {
            let e = math::exp(-2.0 * s);
            (s + (1.0 + mu * mu) * 0.5 * e - 0.5, mu * e, 1.0 - (1.0 + mu * mu) * e)
        }
        KlDirection::PosteriorFirst => {
            let e = math::exp(2.0 * s);
            ((e + mu * mu - 1.0) * 0.5 - s, mu, e - 1.0)
        }
    }
}

pub fn kl_term(mu: &[f64], sigma: &[f64], dir: KlDirection) -> Result<f64, NnError> {
    if sigma.len() != mu.len() {
        return Err(NnError::ShapeMismatch {
            expected: mu.len(),
            got: sigma.len(),
        });
    }
    let mut total = 0.0;
    for (&m, &s) in mu.iter().zip(sigma) {
        if !(s > 0.0) {
            return Err(NnError::NonPositiveSigma);
        }
        total += kl_parts(m, math::ln(s), dir).0;
    }
    Ok(total)
}

/// Clamped binary cross-entropy summed over tasks.
pub fn cross_entropy(p: &[f64], p_hat: &[f64]) -> f64 {
    p.iter()
        .zip(p_hat)
        .map(|(&y, &q)| {
            let q = q.clamp(CE_CLAMP, 1.0 - CE_CLAMP);
            -(y * math::ln(q) + (1.0 - y) * math::ln(1.0 - q))
        })
        .sum()
}

/// `(1/d)‖θ − θ̂‖²` averaged over columns plus the weighted KL term, given
/// every intermediate quantity explicitly.
pub fn loss_pretrain_from_parts(
    theta: &DMatrix<f64>,
    theta_hat: &DMatrix<f64>,
    mu: &DMatrix<f64>,
    log_sigma: &DMatrix<f64>,
    dir: KlDirection,
    kl_weight: f64,
) -> f64 {
    let b = theta.ncols() as f64;
    let d = theta.nrows() as f64;
    let recon = (theta_hat - theta).iter().map(|v| v * v).sum::<f64>() / (d * b);
    let kl: f64 = mu.iter().zip(log_sigma.iter()).map(|(&m, &s)| kl_parts(m, s, dir).0).sum::<f64>() / b;
    recon + kl_weight * kl
}

/// A design with its success labels and score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDesign {
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    pub score: f64,
}

/// Loss components of one batch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
    pub cross_entropy: f64,
}

/// Gradients of the three networks (the predictor's only for labelled
/// batches).
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub encoder: Vec<mlp::LayerGrad>,
    pub decoder: Vec<mlp::LayerGrad>,
    pub predictor: Option<Vec<mlp::LayerGrad>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepModel {
    pub config: NnConfig,
    pub n_tasks: usize,
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub predictor: Mlp,
    pub adam_encoder: Adam,
    pub adam_decoder: Adam,
    pub adam_predictor: Adam,
}

fn columns(rows: usize, data: &[&[f64]]) -> Result<DMatrix<f64>, NnError> {
    for d in data {
        if d.len() != rows {
            return Err(NnError::ShapeMismatch {
                expected: rows,
                got: d.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(rows, data.len(), |i, j| data[j][i]))
}

impl RepModel {
    pub fn new<R: Rng + ?Sized>(n_tasks: usize, config: NnConfig, rng: &mut R) -> Self {
        let (l, h) = (config.latent_dim, config.hidden);
        let relu = Activation::Relu;
        let encoder = Mlp::new(&[PARAM_DIM, h, h, 2 * l], &[relu, relu, Activation::Identity], rng);
        let decoder = Mlp::new(&[l, h, PARAM_DIM], &[relu, Activation::Sigmoid], rng);
        let predictor = Mlp::new(&[l, h, n_tasks], &[relu, Activation::Sigmoid], rng);
        Self::from_networks(config, encoder, decoder, predictor)
    }

    pub fn from_networks(config: NnConfig, encoder: Mlp, decoder: Mlp, predictor: Mlp) -> Self {
        let lr = config.lr;
        Self {
            n_tasks: predictor.n_out(),
            adam_encoder: Adam::new(&encoder.tensor_lens(), lr),
            adam_decoder: Adam::new(&decoder.tensor_lens(), lr),
            adam_predictor: Adam::new(&predictor.tensor_lens(), lr),
            config,
            encoder,
            decoder,
            predictor,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    /// `(μ, σ)` of one design.
    pub fn encode(&self, theta: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NnError> {
        let x = columns(PARAM_DIM, &[theta])?;
        let out = self.encoder.apply(x);
        let l = self.latent_dim();
        let mu = (0..l).map(|j| out[(j, 0)]).collect();
        let sigma = (0..l).map(|j| math::exp(out[(l + j, 0)])).collect();
        Ok((mu, sigma))
    }

    /// Deterministic latent `sigmoid(μ(θ))` for many designs (one per
    /// column of the result).
    pub fn latent_mean(&self, thetas: &[&[f64]]) -> Result<Vec<Vec<f64>>, NnError> {
        if thetas.is_empty() {
            return Ok(Vec::new());
        }
        let x = columns(PARAM_DIM, thetas)?;
        let out = self.encoder.apply(x);
        let l = self.latent_dim();
        Ok((0..thetas.len())
            .map(|c| (0..l).map(|j| math::sigmoid(out[(j, c)])).collect())
            .collect())
    }

    pub fn decode_latent(&self, f: &[f64]) -> Result<Vec<f64>, NnError> {
        let x = columns(self.latent_dim(), &[f])?;
        Ok(self.decoder.apply(x).as_slice().to_vec())
    }

    pub fn predict_success(&self, f: &[f64]) -> Result<Vec<f64>, NnError> {
        let x = columns(self.latent_dim(), &[f])?;
        Ok(self.predictor.apply(x).as_slice().to_vec())
    }

    /// Loss and gradients on a batch (`theta`: `185 × B`, `eps`:
    /// `latent × B`, `labels`: `n_tasks × B` for the labelled loss).
    pub fn loss_and_grads(
        &self,
        theta: &DMatrix<f64>,
        labels: Option<&DMatrix<f64>>,
        eps: &DMatrix<f64>,
    ) -> (LossParts, ModelGrads) {
        let l = self.latent_dim();
        let b = theta.ncols();
        let bf = b as f64;
        let d = theta.nrows() as f64;
        let w = self.config.kl_weight;
        let dir = self.config.kl_direction;

        let enc = self.encoder.forward(theta.clone());
        let out = enc.output();
        let mu = out.rows(0, l);
        let s = out.rows(l, l);
        let sigma = s.map(math::exp);
        let z = mu + sigma.component_mul(eps);
        let f = z.map(math::sigmoid);

        let dec = self.decoder.forward(f.clone());
        let theta_hat = dec.output();
        let diff = theta_hat - theta;
        let recon = diff.iter().map(|v| v * v).sum::<f64>() / (d * bf);
        let (dec_grads, mut g_f) = self.decoder.backward(&dec, diff * (2.0 / (d * bf)));

        let mut ce = 0.0;
        let mut pred_grads = None;
        if let Some(y) = labels {
            let pt = self.predictor.forward(f.clone());
            let p_hat = pt.output();
            let mut dp = DMatrix::zeros(p_hat.nrows(), b);
            for c in 0..b {
                for t in 0..p_hat.nrows() {
                    let q = p_hat[(t, c)];
                    let yv = y[(t, c)];
                    let qc = q.clamp(CE_CLAMP, 1.0 - CE_CLAMP);
                    ce -= yv * math::ln(qc) + (1.0 - yv) * math::ln(1.0 - qc);
                    if q > CE_CLAMP && q < 1.0 - CE_CLAMP {
                        dp[(t, c)] = (-yv / q + (1.0 - yv) / (1.0 - q)) / bf;
                    }
                }
            }
            ce /= bf;
            let (g, g_fp) = self.predictor.backward(&pt, dp);
            g_f += g_fp;
            pred_grads = Some(g);
        }

        let mut kl = 0.0;
        let mut d_enc = DMatrix::zeros(2 * l, b);
        for c in 0..b {
            for j in 0..l {
                let (kv, dmu, ds) = kl_parts(mu[(j, c)], s[(j, c)], dir);
                kl += kv;
                let fz = f[(j, c)];
                let g_z = g_f[(j, c)] * fz * (1.0 - fz);
                d_enc[(j, c)] = g_z + w * dmu / bf;
                d_enc[(l + j, c)] = g_z * sigma[(j, c)] * eps[(j, c)] + w * ds / bf;
            }
        }
        kl /= bf;
        let (enc_grads, _) = self.encoder.backward(&enc, d_enc);
        let parts = LossParts {
            total: recon + w * kl + ce,
            reconstruction: recon,
            kl,
            cross_entropy: ce,
        };
        (
            parts,
            ModelGrads {
                encoder: enc_grads,
                decoder: dec_grads,
                predictor: pred_grads,
            },
        )
    }

    pub fn loss_pretrain(&self, theta: &DMatrix<f64>, eps: &DMatrix<f64>) -> f64 {
        self.loss_and_grads(theta, None, eps).0.total
    }

    pub fn loss_rep(&self, batch: &[LabeledDesign], eps: &DMatrix<f64>) -> Result<f64, NnError> {
        let (theta, labels) = self.labeled_batch(batch)?;
        Ok(self.loss_and_grads(&theta, Some(&labels), eps).0.total)
    }

    fn labeled_batch(&self, batch: &[LabeledDesign]) -> Result<(DMatrix<f64>, DMatrix<f64>), NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyDataset);
        }
        if batch.iter().any(|q| q.p.len() != self.n_tasks) {
            return Err(NnError::MissingLabels);
        }
        let thetas: Vec<&[f64]> = batch.iter().map(|q| q.theta.as_slice()).collect();
        let ps: Vec<&[f64]> = batch.iter().map(|q| q.p.as_slice()).collect();
        Ok((columns(PARAM_DIM, &thetas)?, columns(self.n_tasks, &ps)?))
    }

    fn sample_eps<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> DMatrix<f64> {
        DMatrix::from_fn(self.latent_dim(), b, |_, _| rng.sample(StandardNormal))
    }

    fn apply(&mut self, g: &ModelGrads) {
        let ge = mlp::flatten_grads(&g.encoder);
        self.adam_encoder.step(&mut self.encoder.tensors_mut(), &ge);
        let gd = mlp::flatten_grads(&g.decoder);
        self.adam_decoder.step(&mut self.decoder.tensors_mut(), &gd);
        if let Some(gp) = &g.predictor {
            let gp = mlp::flatten_grads(gp);
            self.adam_predictor.step(&mut self.predictor.tensors_mut(), &gp);
        }
    }

    /// One Adam step on the unlabelled loss (encoder and decoder).
    pub fn pretrain_step<R: Rng + ?Sized>(&mut self, data: &[Vec<f64>], rng: &mut R) -> Result<LossParts, NnError> {
        if data.is_empty() {
            return Err(NnError::EmptyDataset);
        }
        let b = self.config.batch_size;
        let idx: Vec<usize> = (0..b).map(|_| rng.random_range(0..data.len())).collect();
        let cols: Vec<&[f64]> = idx.iter().map(|&i| data[i].as_slice()).collect();
        let theta = columns(PARAM_DIM, &cols)?;
        let eps = self.sample_eps(b, rng);
        let (parts, g) = self.loss_and_grads(&theta, None, &eps);
        self.apply(&g);
        Ok(parts)
    }

    /// One Adam step on the labelled loss (all three networks).
    pub fn rep_step<R: Rng + ?Sized>(&mut self, q: &[LabeledDesign], rng: &mut R) -> Result<LossParts, NnError> {
        if q.is_empty() {
            return Err(NnError::EmptyDataset);
        }
        let b = self.config.batch_size;
        let batch: Vec<LabeledDesign> = (0..b).map(|_| q[rng.random_range(0..q.len())].clone()).collect();
        let (theta, labels) = self.labeled_batch(&batch)?;
        let eps = self.sample_eps(b, rng);
        let (parts, g) = self.loss_and_grads(&theta, Some(&labels), &eps);
        self.apply(&g);
        Ok(parts)
    }

    /// `steps` unlabelled updates; returns the loss of every step.
    pub fn pretrain<R: Rng + ?Sized>(&mut self, data: &[Vec<f64>], steps: usize, rng: &mut R) -> Result<Vec<LossParts>, NnError> {
        (0..steps).map(|_| self.pretrain_step(data, rng)).collect()
    }

    /// Alternates labelled updates on `q` with unlabelled updates on `d`,
    /// one step each, for `steps` updates in total.
    pub fn finetune<R: Rng + ?Sized>(
        &mut self,
        q: &[LabeledDesign],
        d: &[Vec<f64>],
        steps: usize,
        rng: &mut R,
    ) -> Result<FinetuneStats, NnError> {
        let mut stats = FinetuneStats::default();
        for k in 0..steps {
            if k % 2 == 0 {
                let p = self.rep_step(q, rng)?;
                stats.rep_steps += 1;
                stats.last_rep = p;
            } else {
                let p = self.pretrain_step(d, rng)?;
                stats.pretrain_steps += 1;
                stats.last_pretrain = p;
            }
        }
        Ok(stats)
    }

    /// Mean squared reconstruction error through the deterministic path
    /// `θ ↦ D(sigmoid(μ(θ)))`.
    pub fn reconstruction_mse(&self, data: &[Vec<f64>]) -> Result<f64, NnError> {
        if data.is_empty() {
            return Err(NnError::EmptyDataset);
        }
        let mut total = 0.0;
        for chunk in data.chunks(256) {
            let cols: Vec<&[f64]> = chunk.iter().map(|v| v.as_slice()).collect();
            let theta = columns(PARAM_DIM, &cols)?;
            let f: Vec<Vec<f64>> = self.latent_mean(&cols)?;
            let fc: Vec<&[f64]> = f.iter().map(|v| v.as_slice()).collect();
            let theta_hat = self.decoder.apply(columns(self.latent_dim(), &fc)?);
            total += (theta_hat - theta).iter().map(|v| v * v).sum::<f64>();
        }
        Ok(total / (data.len() * PARAM_DIM) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FinetuneStats {
    pub rep_steps: usize,
    pub pretrain_steps: usize,
    pub last_rep: LossParts,
    pub last_pretrain: LossParts,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn kl_examples() {
        let p = KlDirection::PriorFirst;
        assert_eq!(kl_term(&[0.0; 4], &[1.0; 4], p).unwrap(), 0.0);
        assert!((kl_term(&[1.0], &[1.0], p).unwrap() - 0.5).abs() < 1e-12);
        let expect = 2f64.ln() + 0.125 - 0.5;
        assert!((kl_term(&[0.0], &[2.0], p).unwrap() - expect).abs() < 1e-12);
        assert_eq!(kl_term(&[0.0], &[0.0], p), Err(NnError::NonPositiveSigma));
        assert_eq!(kl_term(&[0.0; 3], &[1.0; 3], KlDirection::PosteriorFirst).unwrap(), 0.0);
    }

    #[test]
    fn zero_network_gives_unit_sigma() {
        let c = NnConfig::default();
        let relu = Activation::Relu;
        let e = Mlp::zeros(&[PARAM_DIM, 100, 100, 64], &[relu, relu, Activation::Identity]);
        let d = Mlp::zeros(&[32, 100, PARAM_DIM], &[relu, Activation::Sigmoid]);
        let p = Mlp::zeros(&[32, 100, 5], &[relu, Activation::Sigmoid]);
        let m = RepModel::from_networks(c, e, d, p);
        let (mu, sigma) = m.encode(&[0.3; PARAM_DIM]).unwrap();
        assert!(mu.iter().all(|&v| v == 0.0));
        assert!(sigma.iter().all(|&v| v == 1.0));
        let eps: Vec<f64> = (0..32).map(|i| i as f64 / 10.0 - 1.5).collect();
        let code = sample_latent(&mu, &sigma, &eps).unwrap();
        for (f, e) in code.f.iter().zip(&eps) {
            assert_eq!(*f, math::sigmoid(*e));
        }
        assert!(matches!(m.encode(&[0.3; 10]), Err(NnError::ShapeMismatch { .. })));
    }

    #[test]
    fn shifted_reconstruction_loss() {
        let theta = DMatrix::from_element(PARAM_DIM, 3, 0.4);
        let hat = theta.add_scalar(0.1);
        let mu = DMatrix::zeros(32, 3);
        let s = DMatrix::zeros(32, 3);
        let l = loss_pretrain_from_parts(&theta, &hat, &mu, &s, KlDirection::PriorFirst, 1.0);
        assert!((l - 0.01).abs() < 1e-12);
    }

    #[test]
    fn decoder_output_is_interior() {
        let m = RepModel::new(4, NnConfig::default(), &mut rng::stream(0, "init", 0));
        let out = m.decode_latent(&[0.9; 32]).unwrap();
        assert_eq!(out.len(), PARAM_DIM);
        assert!(out.iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(m.predict_success(&[0.1; 32]).unwrap().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn missing_labels_are_reported() {
        let m = RepModel::new(4, NnConfig::default(), &mut rng::stream(0, "init", 0));
        let q = [LabeledDesign {
            theta: alloc::vec![0.5; PARAM_DIM],
            p: alloc::vec![1.0; 3],
            score: 0.0,
        }];
        let eps = DMatrix::zeros(32, 1);
        assert_eq!(m.loss_rep(&q, &eps), Err(NnError::MissingLabels));
        assert_eq!(m.loss_rep(&[], &eps), Err(NnError::EmptyDataset));
    }
}
