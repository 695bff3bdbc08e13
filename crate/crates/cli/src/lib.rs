//! Experiment harness: runs convergence studies, the verification suite,
//! tightness statistics, and generator tables from declarative config files,
//! and emits deterministic CSV / JSON-lines reports.

pub mod bundled;
pub mod config;
pub mod experiment;
pub mod report;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] nlexp_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, CliError>;
