//! Experiment driver: configuration, grid execution and report files.

mod config;
mod report;
mod run;

pub use config::{DataConfig, ExperimentConfig, ModelOverride, SyntheticConfig};
pub use report::{cmd_report, write_sweep, ReportFiles};
pub use run::{cmd_generate_data, cmd_run, cmd_sweep_timesteps, run_cell, Cell, CellFailure, Provenance, ResultsBundle};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ecoforecast::Error),
    #[error("reading config {path}: {source}")]
    ConfigRead { path: PathBuf, source: std::io::Error },
    #[error("parsing config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Contract(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
