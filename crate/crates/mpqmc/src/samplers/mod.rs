//! Multiple-proposal samplers driven by pseudo-random or completely uniformly
//! distributed sequences.

mod config;
mod coupling;
mod engine;
mod estimate;

use thiserror::Error;

use crate::driving::DrivingError;
use crate::finite_chain::ChainError;
use crate::proposals::ProposalError;

pub use config::{Adapt, CovSpec, DrivingSpec, KernelSpec, Mode, SamplerConfig, Safeguards};
pub use coupling::{coupled_step, coupling_check, CouplingReport};
pub use engine::{identity, run, run_with_driver, DiagRow, RunMeta, RunOutput};
pub use estimate::{regularize_cov, WeightedEstimate};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("driving schedule has {available} tuples of width {width}, run needs {needed}")]
    Budget { needed: u64, available: u64, width: usize },
    #[error(transparent)]
    Driving(#[from] DrivingError),
    #[error(transparent)]
    Proposal(#[from] ProposalError),
    #[error("iteration {iteration}: {source}")]
    Chain { iteration: usize, source: ChainError },
    #[error("iteration {iteration}: bounded-jump resampling gave up after {attempts} draws")]
    ResampleBudgetExceeded { iteration: usize, attempts: usize },
    #[error("start point has zero target density")]
    StartOutsideSupport,
}

impl SamplerError {
    /// Whether the error comes from the configuration rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(self, SamplerError::Config(_) | SamplerError::Budget { .. } | SamplerError::StartOutsideSupport)
    }
}
