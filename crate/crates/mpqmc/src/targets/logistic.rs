use nalgebra::{DMatrix, DVector};

use super::{Target, TargetError};

/// Bayesian logistic regression with prior `N(0, alpha I)`.
#[derive(Debug, Clone)]
pub struct LogisticTarget {
    x: DMatrix<f64>,
    y: DVector<f64>,
    alpha: f64,
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LogisticTarget {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, alpha: f64) -> Result<Self, TargetError> {
        if x.nrows() != y.len() {
            return Err(TargetError::DimensionMismatch { expected: x.nrows(), got: y.len() });
        }
        if !(alpha > 0.0) {
            return Err(TargetError::InvalidParameter(format!("alpha = {alpha} must be positive")));
        }
        if y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(TargetError::InvalidParameter("responses must be 0 or 1".into()));
        }
        Ok(LogisticTarget { x, y, alpha })
    }
}

impl Target for LogisticTarget {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn log_density(&self, theta: &DVector<f64>) -> f64 {
        let eta = &self.x * theta;
        let ll: f64 = eta
            .iter()
            .zip(self.y.iter())
            .map(|(&e, &y)| y * e - softplus(e))
            .sum();
        ll - theta.dot(theta) / (2.0 * self.alpha)
    }

    fn grad_log_density(&self, theta: &DVector<f64>) -> Option<DVector<f64>> {
        let eta = &self.x * theta;
        let resid = DVector::from_iterator(
            eta.len(),
            eta.iter().zip(self.y.iter()).map(|(&e, &y)| y - sigmoid(e)),
        );
        Some(self.x.transpose() * resid - theta / self.alpha)
    }

    /// Expected Fisher information plus prior precision.
    fn fisher_metric(&self, theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        let eta = &self.x * theta;
        let mut wx = self.x.clone();
        for (i, &e) in eta.iter().enumerate() {
            let s = sigmoid(e);
            wx.row_mut(i).scale_mut(s * (1.0 - s));
        }
        let d = self.dim();
        let g = self.x.transpose() * wx + DMatrix::identity(d, d) / self.alpha;
        Some((&g + g.transpose()) * 0.5)
    }

    fn name(&self) -> &'static str {
        "logistic"
    }
}
