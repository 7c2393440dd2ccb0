//! Interface shared by LABO and the baselines: one record per score-function
//! evaluation, and a resumable step-wise driver.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::grasp::score::ScoreStatus;
use crate::objective::{Evaluation, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Labo,
    #[serde(alias = "raw-bo")]
    RawBo,
    Cmaes,
    Uniform,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Labo, Method::RawBo, Method::Cmaes, Method::Uniform];

    pub fn name(self) -> &'static str {
        match self {
            Method::Labo => "labo",
            Method::RawBo => "raw_bo",
            Method::Cmaes => "cmaes",
            Method::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s || (s == "raw-bo" && *m == Method::RawBo))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("representation model: {0}")]
    Nn(#[from] crate::nn::NnError),
    #[error("surrogate: {0}")]
    Gp(#[from] crate::gp::GpError),
    #[error("objective has dimension {got}, optimizer expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("optimizer state is incomplete: {0}")]
    MissingState(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// One score-function evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    /// 0-based evaluation counter.
    pub index: usize,
    /// Optimizer iteration (BO step or CMA-ES generation) that produced it.
    pub iteration: usize,
    pub theta: Vec<f64>,
    /// Latent point the design was decoded from (LABO proposals only).
    pub latent: Option<Vec<f64>>,
    #[serde(rename = "F")]
    pub score: f64,
    pub labels: Vec<f64>,
    pub cost: Option<f64>,
    pub success_rate: Option<f64>,
    pub status: String,
    /// Best `F` over records `0..=index`.
    pub best_score: f64,
    /// Fallbacks taken while producing this point.
    pub note: Option<String>,
}

/// Ordered records with running best.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EvalRecord>,
}

impl History {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn best(&self) -> Option<&EvalRecord> {
        // First maximiser, so ties resolve to the earliest evaluation.
        self.records.iter().fold(None, |b: Option<&EvalRecord>, r| match b {
            Some(b) if b.score >= r.score => Some(b),
            _ => Some(r),
        })
    }

    pub fn best_score(&self) -> f64 {
        self.records.last().map(|r| r.best_score).unwrap_or(f64::NEG_INFINITY)
    }

    pub fn push(
        &mut self,
        iteration: usize,
        theta: Vec<f64>,
        latent: Option<Vec<f64>>,
        eval: &Evaluation,
        note: Option<String>,
    ) -> &EvalRecord {
        let best = self.best_score().max(eval.score);
        let (cost, rate, status) = match &eval.report {
            Some(r) => (
                Some(r.cost),
                Some(r.overall_success_rate()),
                match &r.status {
                    ScoreStatus::Scored => "scored",
                    ScoreStatus::Rejected(_) => "rejected",
                    ScoreStatus::GeometryFailure(_) => "geometry_failure",
                },
            ),
            None => (None, None, "scored"),
        };
        self.records.push(EvalRecord {
            index: self.records.len(),
            iteration,
            theta,
            latent,
            score: eval.score,
            labels: eval.labels.clone(),
            cost,
            success_rate: rate,
            status: status.to_string(),
            best_score: best,
            note,
        });
        self.records.last().unwrap()
    }

    /// Best-so-far `F` after each evaluation.
    pub fn best_trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_score).collect()
    }
}

/// A budgeted, resumable optimizer. Each [`Optimizer::step`] is one
/// iteration; state between steps is plain data so it can be checkpointed.
pub trait Optimizer {
    fn method(&self) -> Method;
    fn budget(&self) -> usize;
    fn history(&self) -> &History;
    /// Iterations completed so far.
    fn iteration(&self) -> usize;

    fn evaluations(&self) -> usize {
        self.history().len()
    }

    fn is_done(&self) -> bool {
        self.evaluations() >= self.budget()
    }

    /// Runs one iteration and returns the records it appended.
    fn step(&mut self, objective: &dyn Objective) -> Result<Vec<EvalRecord>, SearchError>;
}

/// Steps until the budget is spent or `max_iterations` more iterations ran.
pub fn run<O: Optimizer + ?Sized>(
    opt: &mut O,
    objective: &dyn Objective,
    max_iterations: Option<usize>,
) -> Result<(), SearchError> {
    let mut n = 0;
    while !opt.is_done() && max_iterations.is_none_or(|m| n < m) {
        opt.step(objective)?;
        n += 1;
    }
    Ok(())
}

pub(crate) fn check_dim(objective: &dyn Objective, expected: usize) -> Result<(), SearchError> {
    if objective.dim() != expected {
        return Err(SearchError::Dimension {
            expected,
            got: objective.dim(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_trace_is_monotone_and_first_max_wins() {
        let mut h = History::default();
        for (i, s) in [0.1, -0.5, 0.3, 0.3, 0.2].iter().enumerate() {
            h.push(i, alloc::vec![i as f64], None, &Evaluation::plain(*s), None);
        }
        assert_eq!(h.best_trace(), [0.1, 0.1, 0.3, 0.3, 0.3]);
        assert_eq!(h.best().unwrap().index, 2);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()), Some(m));
        }
        assert_eq!(Method::parse("raw-bo"), Some(Method::RawBo));
        assert_eq!(Method::parse("grid"), None);
    }
}
