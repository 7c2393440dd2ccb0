//! Latent-space BO: pretrain the representation on uniform designs, then
//! alternate GP-UCB proposals in the latent cube with evaluation and
//! representation fine-tuning.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{CmaesConfig, CmaesSearch, RawBo, UniformConfig, UniformSearch};
use crate::bo::{self, BoConfig, SurrogateState};
use crate::design::{ControlMode, PARAM_DIM};
use crate::grasp::score::EvalConfig;
use crate::nn::{LabeledDesign, LossParts, NnConfig, RepModel};
use crate::objective::Objective;
use crate::rng;
use crate::search::{self, EvalRecord, History, Method, Optimizer, SearchError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaboConfig {
    /// Uniform designs in the unlabelled pretraining set `D`.
    pub n_pre: usize,
    /// `N₁`: pretraining steps.
    pub pretrain_steps: usize,
    /// `N₂`: fine-tuning steps after each evaluated batch.
    pub finetune_steps: usize,
    /// Candidates proposed and evaluated per iteration.
    pub batch: usize,
    pub nn: NnConfig,
}

impl Default for LaboConfig {
    fn default() -> Self {
        Self {
            n_pre: 2048,
            pretrain_steps: 100_000,
            finetune_steps: 2000,
            batch: 2,
            nn: NnConfig::default(),
        }
    }
}

impl LaboConfig {
    /// Step counts for the reduced desk-scale experiments.
    pub fn desk() -> Self {
        Self {
            pretrain_steps: 10_000,
            finetune_steps: 200,
            ..Self::default()
        }
    }
}

/// Outcome of the pretraining phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainRecord {
    pub steps: usize,
    pub initial_reconstruction_mse: f64,
    pub final_reconstruction_mse: f64,
    pub final_loss: LossParts,
}

/// Serializable LABO state apart from the networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaboState {
    pub config: LaboConfig,
    pub bo: BoConfig,
    pub seed: u64,
    pub budget: usize,
    pub n_tasks: usize,
    pub iteration: usize,
    pub pretrain: Option<PretrainRecord>,
    /// `Q`: evaluated designs with labels and scores, in insertion order.
    pub q: Vec<LabeledDesign>,
    /// Current latent coordinates of `Q` (re-encoded after fine-tuning).
    pub latents: Vec<Vec<f64>>,
    pub surrogate: SurrogateState,
    pub history: History,
}

pub struct Labo {
    pub state: LaboState,
    model: Option<RepModel>,
    data: Vec<Vec<f64>>,
}

/// The unlabelled set `D ~ U[0,1]^185`, regenerable from the seed.
pub fn pretrain_data(seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, "pretrain-data", 0);
    (0..n).map(|_| (0..PARAM_DIM).map(|_| r.random::<f64>()).collect()).collect()
}

impl Labo {
    pub fn new(n_tasks: usize, budget: usize, seed: u64, config: LaboConfig, bo: BoConfig) -> Self {
        let model = RepModel::new(n_tasks, config.nn.clone(), &mut rng::stream(seed, "init", 0));
        let data = pretrain_data(seed, config.n_pre);
        Self {
            state: LaboState {
                config,
                bo,
                seed,
                budget,
                n_tasks,
                iteration: 0,
                pretrain: None,
                q: Vec::new(),
                latents: Vec::new(),
                surrogate: SurrogateState::default(),
                history: History::default(),
            },
            model: Some(model),
            data,
        }
    }

    /// Rebuilds from a checkpoint.
    pub fn restore(state: LaboState, model: RepModel) -> Self {
        let data = pretrain_data(state.seed, state.config.n_pre);
        Self {
            state,
            model: Some(model),
            data,
        }
    }

    pub fn model(&self) -> Option<&RepModel> {
        self.model.as_ref()
    }

    pub fn pretrain_data(&self) -> &[Vec<f64>] {
        &self.data
    }

    fn model_mut(&mut self) -> Result<&mut RepModel, SearchError> {
        self.model.as_mut().ok_or(SearchError::MissingState("representation model"))
    }

    pub fn is_pretrained(&self) -> bool {
        self.state.pretrain.is_some()
    }

    fn run_pretraining(&mut self) -> Result<(), SearchError> {
        let steps = self.state.config.pretrain_steps;
        let seed = self.state.seed;
        let data = core::mem::take(&mut self.data);
        let result = (|| -> Result<PretrainRecord, SearchError> {
            let m = self.model_mut()?;
            let initial = m.reconstruction_mse(&data)?;
            let mut r = rng::stream(seed, "pretrain", 0);
            let mut last = LossParts::default();
            for _ in 0..steps {
                last = m.pretrain_step(&data, &mut r)?;
            }
            let fin = m.reconstruction_mse(&data)?;
            Ok(PretrainRecord {
                steps,
                initial_reconstruction_mse: initial,
                final_reconstruction_mse: fin,
                final_loss: last,
            })
        })();
        self.data = data;
        self.state.pretrain = Some(result?);
        Ok(())
    }

    fn reencode(&mut self) -> Result<(), SearchError> {
        let m = self.model.as_ref().ok_or(SearchError::MissingState("representation model"))?;
        let thetas: Vec<&[f64]> = self.state.q.iter().map(|d| d.theta.as_slice()).collect();
        self.state.latents = m.latent_mean(&thetas)?;
        Ok(())
    }
}

impl Optimizer for Labo {
    fn method(&self) -> Method {
        Method::Labo
    }
    fn budget(&self) -> usize {
        self.state.budget
    }
    fn history(&self) -> &History {
        &self.state.history
    }
    fn iteration(&self) -> usize {
        self.state.iteration
    }

    fn is_done(&self) -> bool {
        self.is_pretrained() && self.evaluations() >= self.budget()
    }

    /// The first step pretrains (no evaluations); each later step proposes,
    /// decodes and evaluates a batch, appends it to `Q`, fine-tunes and
    /// re-encodes `Q`.
    fn step(&mut self, objective: &dyn Objective) -> Result<Vec<EvalRecord>, SearchError> {
        search::check_dim(objective, PARAM_DIM)?;
        if !self.is_pretrained() {
            self.run_pretraining()?;
            return Ok(Vec::new());
        }
        let start = self.state.history.len();
        let n = self.state.config.batch.max(1).min(self.state.budget - start);
        if n == 0 {
            return Ok(Vec::new());
        }
        let it = self.state.iteration;
        let latent_dim = self.state.config.nn.latent_dim;
        let seed = self.state.seed;
        // The initial design is uniform in θ (shared with raw BO); later
        // points are acquisition maximisers in the latent cube, decoded.
        let (thetas, sources, note): (Vec<Vec<f64>>, Vec<Option<Vec<f64>>>, Option<String>) =
            if bo::needs_initial_design(self.state.q.len(), &self.state.bo) {
                let t = bo::initial_points(seed, self.state.q.len(), n, PARAM_DIM);
                (t, alloc::vec![None; n], None)
            } else {
                let targets: Vec<f64> = self.state.q.iter().map(|d| d.score).collect();
                let s = bo::suggest(
                    &self.state.latents,
                    &targets,
                    latent_dim,
                    n,
                    &mut self.state.surrogate,
                    &self.state.bo,
                    seed,
                    it,
                );
                let m = self.model.as_ref().ok_or(SearchError::MissingState("representation model"))?;
                let t = s.points.iter().map(|f| m.decode_latent(f)).collect::<Result<_, _>>()?;
                (t, s.points.into_iter().map(Some).collect(), s.note)
            };
        let evals = objective.evaluate_batch(&thetas);
        let n_tasks = self.state.n_tasks;
        for ((theta, f), e) in thetas.into_iter().zip(sources).zip(&evals) {
            let p = if e.labels.len() == n_tasks { e.labels.clone() } else { alloc::vec![0.0; n_tasks] };
            self.state.q.push(LabeledDesign {
                theta: theta.clone(),
                p,
                score: e.score,
            });
            self.state.history.push(it, theta, f, e, note.clone());
        }

        let steps = self.state.config.finetune_steps;
        if steps > 0 {
            let q = core::mem::take(&mut self.state.q);
            let data = core::mem::take(&mut self.data);
            let mut r = rng::stream(self.state.seed, "finetune", it as u64);
            let res = self.model_mut().and_then(|m| m.finetune(&q, &data, steps, &mut r).map_err(SearchError::from));
            self.state.q = q;
            self.data = data;
            res?;
        }
        self.reencode()?;
        self.state.iteration += 1;
        Ok(self.state.history.records[start..].to_vec())
    }
}

// ------------------------------------------------------------ run config

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub optimizer: Method,
    pub seed: u64,
    /// Score-function evaluations (pretraining draws are not counted).
    pub budget: usize,
    /// Pins the finger count of every evaluated design.
    pub fixed_fingers: Option<usize>,
    pub control_mode: ControlMode,
    pub labo: LaboConfig,
    pub bo: BoConfig,
    pub cmaes: CmaesConfig,
    pub uniform: UniformConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            optimizer: Method::Labo,
            seed: 0,
            budget: 200,
            fixed_fingers: None,
            control_mode: ControlMode::Velocity,
            labo: LaboConfig::default(),
            bo: BoConfig::default(),
            cmaes: CmaesConfig::default(),
            uniform: UniformConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn desk() -> Self {
        Self {
            labo: LaboConfig::desk(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::Config(m));
        if self.labo.n_pre == 0 {
            return bad("labo.n_pre must be positive".into());
        }
        if self.labo.batch == 0 || self.uniform.batch == 0 {
            return bad("batch sizes must be positive".into());
        }
        if self.labo.nn.batch_size == 0 || self.labo.nn.latent_dim == 0 || self.labo.nn.hidden == 0 {
            return bad("network sizes must be positive".into());
        }
        if !(self.labo.nn.lr > 0.0) {
            return bad("labo.nn.lr must be positive".into());
        }
        if self.bo.refit_interval == 0 || self.bo.fit.restarts == 0 {
            return bad("bo.refit_interval and bo.fit.restarts must be positive".into());
        }
        if !(self.bo.acquisition.beta >= 0.0) {
            return bad("bo.acquisition.beta must be non-negative".into());
        }
        if self.bo.acquisition.raw_samples == 0 {
            return bad("bo.acquisition.raw_samples must be positive".into());
        }
        if !(self.cmaes.sigma0 > 0.0) {
            return bad("cmaes.sigma0 must be positive".into());
        }
        if let Some(l) = self.cmaes.lambda {
            if l < 4 {
                return bad(format!("cmaes.lambda must be at least 4, got {l}"));
            }
        }
        if let Some(n) = self.fixed_fingers {
            if !(2..=6).contains(&n) {
                return bad(format!("fixed_fingers must be in 2..=6, got {n}"));
            }
        }
        if self.optimizer == Method::Cmaes {
            let lambda = self.cmaes.lambda.unwrap_or_else(|| crate::baselines::default_lambda(PARAM_DIM));
            if self.budget < lambda {
                return bad(format!("CMA-ES needs a budget of at least λ = {lambda}"));
            }
        }
        Ok(())
    }

    pub fn build(&self, n_tasks: usize) -> Result<AnyOptimizer, SearchError> {
        self.validate()?;
        Ok(match self.optimizer {
            Method::Labo => AnyOptimizer::Labo(Labo::new(n_tasks, self.budget, self.seed, self.labo.clone(), self.bo.clone())),
            Method::RawBo => AnyOptimizer::RawBo(RawBo::new(PARAM_DIM, self.budget, self.seed, self.labo.batch, self.bo.clone())),
            Method::Cmaes => AnyOptimizer::Cmaes(CmaesSearch::new(PARAM_DIM, self.budget, self.seed, self.cmaes.clone())),
            Method::Uniform => AnyOptimizer::Uniform(UniformSearch::new(PARAM_DIM, self.budget, self.seed, self.uniform.clone())),
        })
    }
}

pub enum AnyOptimizer {
    Labo(Labo),
    RawBo(RawBo),
    Cmaes(CmaesSearch),
    Uniform(UniformSearch),
}

impl AnyOptimizer {
    fn inner(&self) -> &dyn Optimizer {
        match self {
            Self::Labo(o) => o,
            Self::RawBo(o) => o,
            Self::Cmaes(o) => o,
            Self::Uniform(o) => o,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Optimizer {
        match self {
            Self::Labo(o) => o,
            Self::RawBo(o) => o,
            Self::Cmaes(o) => o,
            Self::Uniform(o) => o,
        }
    }
}

impl Optimizer for AnyOptimizer {
    fn method(&self) -> Method {
        self.inner().method()
    }
    fn budget(&self) -> usize {
        self.inner().budget()
    }
    fn history(&self) -> &History {
        self.inner().history()
    }
    fn iteration(&self) -> usize {
        self.inner().iteration()
    }
    fn is_done(&self) -> bool {
        self.inner().is_done()
    }
    fn step(&mut self, objective: &dyn Objective) -> Result<Vec<EvalRecord>, SearchError> {
        self.inner_mut().step(objective)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{Counted, Evaluation};

    struct Toy;
    impl Objective for Toy {
        fn dim(&self) -> usize {
            PARAM_DIM
        }
        fn n_labels(&self) -> usize {
            3
        }
        fn evaluate(&self, x: &[f64]) -> Evaluation {
            let s = -x.iter().map(|v| (v - 0.7) * (v - 0.7)).sum::<f64>() / PARAM_DIM as f64;
            Evaluation {
                score: s,
                labels: alloc::vec![(x[0] > 0.5) as u8 as f64, 0.0, 1.0],
                report: None,
            }
        }
    }

    fn small() -> LaboConfig {
        LaboConfig {
            n_pre: 64,
            pretrain_steps: 20,
            finetune_steps: 6,
            ..LaboConfig::default()
        }
    }

    #[test]
    fn zero_budget_only_pretrains() {
        let mut l = Labo::new(3, 0, 1, small(), BoConfig::default());
        search::run(&mut l, &Toy, None).unwrap();
        assert!(l.state.pretrain.is_some());
        assert!(l.state.history.is_empty());
    }

    #[test]
    fn q_grows_with_evaluations_and_stays_encoded() {
        let bo = BoConfig {
            acquisition: crate::gp::ProposeConfig {
                raw_samples: 64,
                steps: 5,
                ..Default::default()
            },
            ..BoConfig::default()
        };
        let obj = Counted::new(Toy);
        let mut l = Labo::new(3, 7, 2, small(), bo);
        search::run(&mut l, &obj, None).unwrap();
        assert_eq!(obj.count(), 7);
        assert_eq!(l.state.q.len(), 7);
        assert_eq!(l.state.latents.len(), 7);
        let m = l.model().unwrap();
        let thetas: Vec<&[f64]> = l.state.q.iter().map(|d| d.theta.as_slice()).collect();
        assert_eq!(m.latent_mean(&thetas).unwrap(), l.state.latents);
        let b = l.state.history.best_trace();
        assert!(b.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        let mut c = RunConfig::default();
        c.fixed_fingers = Some(7);
        assert!(c.validate().is_err());
        c = RunConfig {
            optimizer: Method::Cmaes,
            budget: 10,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
