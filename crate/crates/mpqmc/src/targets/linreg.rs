use nalgebra::{DMatrix, DVector};

use super::{Target, TargetError};

/// Bayesian linear regression with a Zellner g-prior `N(0, sigma2/g (X'X)^-1)`.
///
/// The posterior is Gaussian with precision `(1+g)/sigma2 X'X` and mean
/// `beta_hat/(1+g)`, where `beta_hat` is the least-squares solution.
#[derive(Debug, Clone)]
pub struct ZellnerTarget {
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    sigma2: f64,
    g: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    precision: DMatrix<f64>,
}

impl ZellnerTarget {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>, sigma2: f64, g: f64) -> Result<Self, TargetError> {
        if x.nrows() != y.len() {
            return Err(TargetError::DimensionMismatch { expected: x.nrows(), got: y.len() });
        }
        if !(sigma2 > 0.0 && g > 0.0) {
            return Err(TargetError::InvalidParameter(format!(
                "sigma2 = {sigma2} and g = {g} must be positive"
            )));
        }
        let d = x.ncols();
        let xtx = x.transpose() * x;
        let xty = x.transpose() * y;
        let svd = xtx.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let tol = smax * d.max(1) as f64 * f64::EPSILON * 1e3;
        let rank = svd.rank(tol);
        if rank < d || smax == 0.0 {
            return Err(TargetError::DegenerateDesign { rank, dim: d });
        }
        let xtx_inv = svd
            .pseudo_inverse(tol)
            .map_err(|_| TargetError::DegenerateDesign { rank, dim: d })?;
        let beta_hat = &xtx_inv * &xty;
        let mean = beta_hat / (1.0 + g);
        let cov = &xtx_inv * (sigma2 / (1.0 + g));
        let cov = (&cov + cov.transpose()) * 0.5;
        let precision = &xtx * ((1.0 + g) / sigma2);
        Ok(ZellnerTarget {
            xtx,
            xty,
            yty: y.dot(y),
            sigma2,
            g,
            mean,
            cov,
            precision,
        })
    }

    /// Uses `g = 1/n`.
    pub fn with_unit_information(x: &DMatrix<f64>, y: &DVector<f64>, sigma2: f64) -> Result<Self, TargetError> {
        Self::new(x, y, sigma2, 1.0 / x.nrows() as f64)
    }

    pub fn g(&self) -> f64 {
        self.g
    }
}

impl Target for ZellnerTarget {
    fn dim(&self) -> usize {
        self.xty.len()
    }

    /// Prior plus likelihood, without normalizing constants.
    fn log_density(&self, b: &DVector<f64>) -> f64 {
        let quad = b.dot(&(&self.xtx * b));
        let rss = self.yty - 2.0 * b.dot(&self.xty) + quad;
        -(self.g * quad + rss) / (2.0 * self.sigma2)
    }

    fn grad_log_density(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        Some((&self.xty - &self.xtx * b * (1.0 + self.g)) / self.sigma2)
    }

    fn fisher_metric(&self, _b: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.precision.clone())
    }

    fn analytic_mean(&self) -> Option<DVector<f64>> {
        Some(self.mean.clone())
    }

    fn analytic_cov(&self) -> Option<DMatrix<f64>> {
        Some(self.cov.clone())
    }

    fn name(&self) -> &'static str {
        "zellner_linreg"
    }
}
