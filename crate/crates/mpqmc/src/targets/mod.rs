//! Target posteriors.

mod data;
mod gaussian;
mod linreg;
mod logistic;
mod ode;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use data::{
    simulate_linreg, simulate_logistic, simulate_ode, LinregData, LogisticData, OdeData,
    LOGISTIC_DIMS,
};
pub use gaussian::GaussianTarget;
pub use linreg::ZellnerTarget;
pub use logistic::LogisticTarget;
pub use ode::{solve_rk4, substeps_for, OdeModel, OdeTarget, MAX_STEP};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TargetError {
    #[error("covariance matrix is not symmetric positive definite")]
    NotSpd,
    #[error("design matrix is rank deficient (rank {rank} < {dim}); posterior is improper")]
    DegenerateDesign { rank: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("ODE solution became non-finite at t = {0}")]
    SolverDiverged(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A (possibly unnormalized) log posterior.
///
/// Implementations are immutable and evaluated concurrently.
pub trait Target: Send + Sync {
    fn dim(&self) -> usize;

    /// Log density, `-inf` outside the support.
    fn log_density(&self, x: &DVector<f64>) -> f64;

    fn grad_log_density(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    fn fisher_metric(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    fn analytic_mean(&self) -> Option<DVector<f64>> {
        None
    }

    fn analytic_cov(&self) -> Option<DMatrix<f64>> {
        None
    }

    fn name(&self) -> &'static str;
}

/// Central-difference gradient.
pub fn numerical_gradient(target: &dyn Target, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += h;
            b[i] -= h;
            (target.log_density(&a) - target.log_density(&b)) / (2.0 * h)
        }),
    )
}

/// Central-difference Hessian of the log density.
pub fn numerical_hessian(target: &dyn Target, x: &DVector<f64>, h: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let f = |dx: &[(usize, f64)]| {
        let mut y = x.clone();
        for &(i, v) in dx {
            y[i] += v;
        }
        target.log_density(&y)
    };
    let f0 = f(&[]);
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        hess[(i, i)] = (f(&[(i, h[i])]) - 2.0 * f0 + f(&[(i, -h[i])])) / (h[i] * h[i]);
        for j in 0..i {
            let v = (f(&[(i, h[i]), (j, h[j])]) - f(&[(i, h[i]), (j, -h[j])])
                - f(&[(i, -h[i]), (j, h[j])])
                + f(&[(i, -h[i]), (j, -h[j])]))
                / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Gaussian approximation at `mode`: covariance is the inverse negative Hessian.
pub fn laplace_covariance(
    target: &dyn Target,
    mode: &DVector<f64>,
    rel_step: f64,
) -> Result<DMatrix<f64>, TargetError> {
    let h: Vec<f64> = mode.iter().map(|v| rel_step * v.abs().max(1e-3)).collect();
    let neg = -numerical_hessian(target, mode, &h);
    let sym = (&neg + neg.transpose()) * 0.5;
    let chol = sym.cholesky().ok_or(TargetError::NotSpd)?;
    Ok(chol.inverse())
}
