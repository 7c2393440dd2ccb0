//! The black-box score interface shared by every optimizer.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use crate::design::{DesignLayout, ParamVector, PARAM_DIM};
use crate::grasp::score::{self, EvalConfig, ScoreReport, Sequential, TaskMap};
use crate::grasp::TaskSuite;

/// Outcome of one score-function call.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub score: f64,
    /// Per-task success labels in `{0, 1}`.
    pub labels: Vec<f64>,
    pub report: Option<ScoreReport>,
}

impl Evaluation {
    pub fn plain(score: f64) -> Self {
        Self {
            score,
            labels: Vec::new(),
            report: None,
        }
    }
}

/// A maximisation target on `[0, 1]^dim`.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Length of the label vector attached to each evaluation.
    fn n_labels(&self) -> usize {
        0
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation;

    fn evaluate_batch(&self, xs: &[Vec<f64>]) -> Vec<Evaluation> {
        xs.iter().map(|x| self.evaluate(x)).collect()
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn n_labels(&self) -> usize {
        (**self).n_labels()
    }
    fn evaluate(&self, x: &[f64]) -> Evaluation {
        (**self).evaluate(x)
    }
    fn evaluate_batch(&self, xs: &[Vec<f64>]) -> Vec<Evaluation> {
        (**self).evaluate_batch(xs)
    }
}

/// Wraps a closure `x ↦ score`.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, x: &[f64]) -> Evaluation {
        Evaluation::plain((self.f)(x))
    }
}

/// Counts evaluations so budgets can be audited.
pub struct Counted<O> {
    pub inner: O,
    count: AtomicUsize,
}

impl<O: Objective> Counted<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            count: AtomicUsize::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::SeqCst)
    }
}

impl<O: Objective> Objective for Counted<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn n_labels(&self) -> usize {
        self.inner.n_labels()
    }
    fn evaluate(&self, x: &[f64]) -> Evaluation {
        self.count.fetch_add(1, Ordering::SeqCst);
        self.inner.evaluate(x)
    }
    fn evaluate_batch(&self, xs: &[Vec<f64>]) -> Vec<Evaluation> {
        self.count.fetch_add(xs.len(), Ordering::SeqCst);
        self.inner.evaluate_batch(xs)
    }
}

/// `F(θ)` on the train split of a task suite.
pub struct GraspObjective {
    pub suite: TaskSuite,
    pub seed: u64,
    pub config: EvalConfig,
    /// Pins the finger count before decoding (ablation runs).
    pub fixed_fingers: Option<usize>,
    exec: Box<dyn TaskMap + Send + Sync>,
}

impl GraspObjective {
    pub fn new(suite: TaskSuite, seed: u64, config: EvalConfig) -> Self {
        Self {
            suite,
            seed,
            config,
            fixed_fingers: None,
            exec: Box::new(Sequential),
        }
    }

    pub fn with_executor(mut self, exec: Box<dyn TaskMap + Send + Sync>) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_fixed_fingers(mut self, n: Option<usize>) -> Self {
        self.fixed_fingers = n;
        self
    }

    /// Applies the finger-count mask (if any) to a raw point.
    pub fn prepare(&self, x: &[f64]) -> ParamVector {
        let mut theta = ParamVector::clamped(x).expect("optimizers produce full-length points").into_inner();
        if let Some(n) = self.fixed_fingers {
            theta[DesignLayout::standard().finger_count_index()] = DesignLayout::finger_count_raw(n);
        }
        ParamVector::new(theta).expect("masked point stays in the unit cube")
    }

    pub fn report(&self, x: &[f64]) -> ScoreReport {
        score::score_with(&self.prepare(x), &self.suite, self.seed, &self.config, self.exec.as_ref())
    }

    pub fn executor(&self) -> &dyn TaskMap {
        self.exec.as_ref()
    }
}

impl Objective for GraspObjective {
    fn dim(&self) -> usize {
        PARAM_DIM
    }

    fn n_labels(&self) -> usize {
        self.suite.n_tasks()
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let r = self.report(x);
        Evaluation {
            score: r.f,
            labels: r.success_labels(),
            report: Some(r),
        }
    }
}
