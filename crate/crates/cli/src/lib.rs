//! Experiment runner around the GVI core: declarative configs (TOML or
//! JSON) in, long-format CSV plus a provenance manifest out.

pub mod config;
pub mod experiments;
pub mod report;

use thiserror::Error;

pub use config::{load, ExperimentConfig, ExperimentKind, Parameters, SCHEMA_VERSION};
pub use report::{config_hash, write_csv, write_outputs, Manifest, ResultRow, CSV_HEADER};

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid config file or schema violation (exit code 1).
    #[error("config error: {0}")]
    Config(String),
    /// Failure while running an experiment (exit code 2).
    #[error("runtime error: {0}")]
    Runtime(String),
}

/// Run a validated config end to end.
pub fn run_experiment(
    config: &ExperimentConfig,
    jobs: usize,
) -> Result<Vec<ResultRow>, CliError> {
    experiments::run(config, jobs)
}
