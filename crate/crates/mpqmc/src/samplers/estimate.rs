use nalgebra::{DMatrix, DVector};

/// Running weighted mean and covariance with the `1/(l+1)` recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEstimate {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub ell: usize,
}

impl WeightedEstimate {
    /// No observations yet; the first update sets the estimate outright.
    pub fn empty(d: usize) -> Self {
        WeightedEstimate { mu: DVector::zeros(d), sigma: DMatrix::zeros(d, d), ell: 0 }
    }

    /// Initial guesses counted as one observation.
    pub fn with_initial(mu: DVector<f64>, sigma: DMatrix<f64>) -> Self {
        WeightedEstimate { mu, sigma, ell: 1 }
    }

    /// Folds in one iteration's weighted points; returns the weighted sum.
    pub fn update(&mut self, weights: &[f64], values: &[DVector<f64>]) -> DVector<f64> {
        let d = self.mu.len();
        let mut mu_t = DVector::zeros(d);
        for (w, v) in weights.iter().zip(values) {
            if *w != 0.0 {
                mu_t.axpy(*w, v, 1.0);
            }
        }
        self.ell += 1;
        let l = self.ell as f64;
        self.mu += (&mu_t - &self.mu) / l;
        let mut sig_t = DMatrix::zeros(d, d);
        for (w, v) in weights.iter().zip(values) {
            if *w != 0.0 {
                let r = v - &self.mu;
                sig_t.ger(*w, &r, &r, 1.0);
            }
        }
        self.sigma += (sig_t - &self.sigma) / l;
        mu_t
    }
}

/// Adds `1e-8 tr/d` to the diagonal and clamps eigenvalues into `[1e-6, 1e6]`.
/// Returns whether clamping changed anything.
pub fn regularize_cov(cov: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let d = cov.nrows();
    let sym = (cov + cov.transpose()) * 0.5;
    let jitter = 1e-8 * sym.trace().abs() / d as f64;
    let sym = sym + DMatrix::identity(d, d) * jitter;
    let eig = sym.clone().symmetric_eigen();
    let mut clamped = false;
    let vals = eig.eigenvalues.map(|v| {
        let c = if v.is_finite() { v.clamp(1e-6, 1e6) } else { 1.0 };
        if c != v {
            clamped = true;
        }
        c
    });
    if !clamped {
        return (sym, false);
    }
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&vals) * q.transpose();
    ((&out + out.transpose()) * 0.5, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn telescoping_mean() {
        let mut e = WeightedEstimate::empty(1);
        let sums = [0.3, -1.2, 2.5, 0.1];
        for s in sums {
            e.update(&[1.0], &[DVector::from_element(1, s)]);
        }
        assert!((e.mu[0] - sums.iter().sum::<f64>() / 4.0).abs() < 1e-15);
        assert_eq!(e.ell, 4);
    }

    #[test]
    fn constant_function_weights() {
        let mut e = WeightedEstimate::empty(1);
        let one = DVector::from_element(1, 1.0);
        e.update(&[0.2, 0.3, 0.5], &[one.clone(), one.clone(), one.clone()]);
        assert_eq!(e.mu[0], 1.0);
    }

    #[test]
    fn initial_counts_as_one() {
        let mut e = WeightedEstimate::with_initial(DVector::from_element(1, 4.0), DMatrix::from_element(1, 1, 2.0));
        e.update(&[1.0], &[DVector::from_element(1, 0.0)]);
        assert_eq!(e.mu[0], 2.0);
        // sigma_tilde about the new mean: (0-2)^2 = 4, average with 2 -> 3
        assert_eq!(e.sigma[(0, 0)], 3.0);
    }

    #[test]
    fn regularization_clamps() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (r, changed) = regularize_cov(&c);
        assert!(changed);
        assert!(r.clone().cholesky().is_some());
        let (r2, changed2) = regularize_cov(&DMatrix::identity(2, 2));
        assert!(!changed2);
        assert!((r2 - DMatrix::identity(2, 2)).amax() < 1e-7);
    }
}
