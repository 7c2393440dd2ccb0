//! Experiment harness around `labo-core`: configuration, run execution with
//! checkpoints, result tables, object sets and one-off design evaluation.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod report;
pub mod runlog;
pub mod suite;
