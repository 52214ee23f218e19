//! Experiment runner for the approximate proximal solvers: loads a problem
//! and error models from a TOML file, runs seeded solves, evaluates bound
//! curves and writes CSV artifacts.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod validate;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use experiment::{mpc_build, run_experiment, ExperimentOutcome, Mode};
