//! Config files, experiment grids, output files and the command line.

mod cli;
mod experiment;
mod output;
mod spec;

use std::path::PathBuf;

use thiserror::Error;

use crate::diagnostics::DiagnosticsError;
use crate::samplers::SamplerError;
use crate::targets::TargetError;

pub use cli::cli_main;
pub use experiment::{run_experiment, CellResult, ExperimentReport, Failure, MetricRow};
pub use output::{fmt_float, write_run};
pub use spec::{BuiltTarget, ExperimentSpec, Grid, KernelInit, ReferenceSpec, SampleFile, TargetSpec, Variant};

/// Environment variable overriding the worker count.
pub const ENV_WORKERS: &str = "MPQMC_WORKERS";
/// Environment variable overriding the output root.
pub const ENV_OUT: &str = "MPQMC_OUT";

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl RunnerError {
    /// Process exit code: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) | RunnerError::Target(_) => 1,
            RunnerError::Sampler(e) if e.is_config() => 1,
            RunnerError::Diagnostics(DiagnosticsError::Sampler(e)) if e.is_config() => 1,
            _ => 2,
        }
    }

    pub fn prefix(&self) -> &'static str {
        if self.exit_code() == 1 {
            "error[config]"
        } else {
            "error[runtime]"
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> RunnerError {
        let path = path.into();
        move |source| RunnerError::Io { path, source }
    }
}
