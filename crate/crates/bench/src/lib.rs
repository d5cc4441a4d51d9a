//! Experiment runner comparing the fixed multilinear Sigma-Pi-Sigma network
//! with the adaptively pruned one.
//!
//! Experiments are registered by name ([`experiment::experiments`]); a run
//! resolves one, executes its protocol ([`runner::run_experiment`]) and writes
//! the report, curves, selected basis and models ([`output::write_outputs`]).

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod report;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::BenchError;
pub use report::{ComparisonReport, Metric};
pub use runner::{run_experiment, RunOutput};
