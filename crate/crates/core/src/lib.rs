//! Joint optimization of robot-hand morphology and open-loop grasp control.
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature. It carries every algorithmic piece of the system:
//!
//! * [`design`]: the 185-dimensional raw design vector, its decoding into a
//!   hand morphology and control plan, the rejection rule and the cost.
//! * [`objects`] and [`grasp`]: procedural grasp objects and a deterministic
//!   quasi-static grasp evaluator that produces rewards, success labels and
//!   the design score.
//! * [`nn`]: encoder / decoder / success-predictor networks with hand-derived
//!   gradients and Adam.
//! * [`gp`]: Gaussian-process regression with Matérn kernels, marginal
//!   likelihood fitting and UCB candidate proposal.
//! * [`labo`]: the latent-space optimization loop.
//! * [`baselines`]: uniform search, CMA-ES and raw-parameter BO.
//!
//! File formats, the CLI and parallel evaluation live in the `labo-harness`
//! crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod bo;
pub mod design;
pub mod geometry;
pub mod gp;
pub mod grasp;
pub mod labo;
pub mod linalg;
pub mod math;
pub mod nn;
pub mod objective;
pub mod objects;
pub mod rng;
pub mod search;

pub use design::{ControlPlan, DesignLayout, HandMorphology, ParamVector, PARAM_DIM};
pub use grasp::{GraspType, ScoreReport, TaskSuite};
pub use objective::{Evaluation, Objective};
