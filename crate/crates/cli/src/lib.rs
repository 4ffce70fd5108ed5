//! Experiment harness: configuration files, point generation, error measurement, timing and
//! reports for the parametric kernel approximation library.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{ExperimentConfig, Mode};
pub use experiment::{run_experiment, Problem, ResultRow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] pttk::Error),
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
