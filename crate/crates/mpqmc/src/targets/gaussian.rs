use nalgebra::{DMatrix, DVector};

use super::{Target, TargetError};
use crate::proposals::normal::LN_SQRT_2PI;

/// Multivariate normal with exact normalization.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianTarget {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, TargetError> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(TargetError::DimensionMismatch { expected: d, got: cov.nrows() });
        }
        if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
            return Err(TargetError::NotSpd);
        }
        let chol = cov.clone().cholesky().ok_or(TargetError::NotSpd)?;
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let precision = chol.inverse();
        Ok(GaussianTarget {
            mean,
            cov,
            precision,
            log_norm: -(d as f64) * LN_SQRT_2PI - 0.5 * log_det,
        })
    }

    pub fn standard(d: usize) -> Self {
        Self::new(DVector::zeros(d), DMatrix::identity(d, d)).expect("identity is SPD")
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

impl Target for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let r = x - &self.mean;
        self.log_norm - 0.5 * r.dot(&(&self.precision * &r))
    }

    fn grad_log_density(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(-(&self.precision * (x - &self.mean)))
    }

    fn fisher_metric(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.precision.clone())
    }

    fn analytic_mean(&self) -> Option<DVector<f64>> {
        Some(self.mean.clone())
    }

    fn analytic_cov(&self) -> Option<DMatrix<f64>> {
        Some(self.cov.clone())
    }

    fn name(&self) -> &'static str {
        "gaussian"
    }
}
