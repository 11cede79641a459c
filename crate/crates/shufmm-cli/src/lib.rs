//! Experiment runner for the shufmm solvers: configuration, runs, sweeps, constant audits and summaries.

pub mod audit;
pub mod config;
pub mod error;
pub mod runner;
pub mod summarize;

pub use error::{CliError, Result};
