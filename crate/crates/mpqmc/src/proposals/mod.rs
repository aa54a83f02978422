//! Gaussian proposal kernels driven through the inverse CDF, so that a tuple
//! of uniforms maps deterministically to a batch of proposals.

mod kernel;
pub mod normal;
mod set;

use thiserror::Error;

pub use kernel::{smmala_params, BoxRegion, GaussianKernel, GaussianParams, KernelChoice, KernelKind};
pub use set::{auxiliary_state_batch, AuxiliaryDraw, build_proposal_set, fresh_params, kernel_logdensity, propose_batch, ProposalScheme, ProposalSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProposalError {
    #[error("Fisher metric is not positive definite at the evaluation point")]
    MetricNotSpd,
    #[error("proposal covariance is not positive definite")]
    CovNotSpd,
    #[error("target provides no gradient or metric, required by the SmMALA kernel")]
    MissingGeometry,
    #[error("uniform {0} outside the open unit interval")]
    DegenerateTuple(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("carried point has zero target density")]
    CarriedOutsideSupport,
}
