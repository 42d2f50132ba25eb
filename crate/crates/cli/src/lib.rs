//! Config-driven experiments on top of `centerman-core`.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod oracle;
pub mod output;
pub mod pipeline;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{ExperimentConfig, Format, SCHEMA};
pub use pipeline::{run, run_prepared, sample_manifold, RunOptions, RunReport, Stage, Status};

/// Exit code for an unreadable or inconsistent config.
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot access {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_CONFIG
    }
}
