//! Experiment driver: configuration, problem setup, experiments, manifests.
//!
//! `rkctl <experiment> --config <file> [--out <dir>] [key=value ...]` runs one
//! experiment and writes its CSV/text outputs plus `manifest.txt` into the
//! output directory. Exit codes: 0 success, 2 blow-up, 3 configuration error.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod experiments;
pub mod manifest;
pub mod problem;

pub const DEFAULT_SEED: u64 = 1;
pub(crate) const DEFAULT_SEED_TEXT: &str = "1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_BLOW_UP: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("blow-up: {0}")]
    BlowUp(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::BlowUp(_) => EXIT_BLOW_UP,
            CliError::Io { .. } | CliError::Internal(_) => EXIT_IO,
        }
    }
}
