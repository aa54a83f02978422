use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::normal::{inv_cdf, LN_SQRT_2PI};
use super::ProposalError;
use crate::targets::Target;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `N(mean, cov)`, ignoring the point it is drawn from.
    IndependentGaussian,
    /// `N(from, cov)`.
    RandomWalkGaussian,
    /// `N(from + eps^2/2 G^-1 grad, eps^2 G^-1)` with `G` the Fisher metric at `from`.
    #[serde(rename = "smmala")]
    SmMala,
}

/// A Gaussian with a fixed lower Cholesky factor.
#[derive(Debug, Clone)]
pub struct GaussianParams {
    pub mean: DVector<f64>,
    chol: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianParams {
    pub fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self, ProposalError> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(ProposalError::DimensionMismatch { expected: d, got: cov.nrows() });
        }
        let chol = cov.clone().cholesky().ok_or(ProposalError::CovNotSpd)?.unpack();
        let log_det: f64 = chol.diagonal().iter().map(|v| v.ln()).sum();
        Ok(GaussianParams { mean, chol, log_norm: -log_det - d as f64 * LN_SQRT_2PI })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn cov(&self) -> DMatrix<f64> {
        &self.chol * self.chol.transpose()
    }

    /// `mean + L Phi^-1(u)`.
    pub fn sample(&self, u: &[f64]) -> Result<DVector<f64>, ProposalError> {
        if u.len() != self.dim() {
            return Err(ProposalError::DimensionMismatch { expected: self.dim(), got: u.len() });
        }
        let mut z = DVector::zeros(u.len());
        for (zi, &ui) in z.iter_mut().zip(u) {
            if !(ui > 0.0 && ui < 1.0) {
                return Err(ProposalError::DegenerateTuple(ui));
            }
            *zi = inv_cdf(ui);
        }
        Ok(&self.mean + &self.chol * z)
    }

    pub fn log_density(&self, y: &DVector<f64>) -> f64 {
        let r = y - &self.mean;
        match self.chol.solve_lower_triangular(&r) {
            Some(z) => self.log_norm - 0.5 * z.norm_squared(),
            None => f64::NEG_INFINITY,
        }
    }
}

/// SmMALA mean and covariance at `x`.
pub fn smmala_params(
    target: &dyn Target,
    x: &DVector<f64>,
    eps: f64,
) -> Result<(DVector<f64>, DMatrix<f64>), ProposalError> {
    let grad = target.grad_log_density(x).ok_or(ProposalError::MissingGeometry)?;
    let metric = target.fisher_metric(x).ok_or(ProposalError::MissingGeometry)?;
    let chol = metric.cholesky().ok_or(ProposalError::MetricNotSpd)?;
    let ginv = chol.inverse();
    let drift = chol.solve(&grad);
    let mean = x + drift * (0.5 * eps * eps);
    let cov = ginv * (eps * eps);
    Ok((mean, (&cov + cov.transpose()) * 0.5))
}

/// Gaussian proposal kernel with adaptable mean and covariance slots.
#[derive(Debug, Clone)]
pub struct GaussianKernel {
    pub kind: KernelKind,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub eps: f64,
    // Factorization of (mean, cov) for the kinds that use it.
    fixed: Option<GaussianParams>,
}

impl GaussianKernel {
    pub fn independent(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, ProposalError> {
        Self::build(KernelKind::IndependentGaussian, mean, cov, 1.0)
    }

    pub fn random_walk(cov: DMatrix<f64>) -> Result<Self, ProposalError> {
        let d = cov.nrows();
        Self::build(KernelKind::RandomWalkGaussian, DVector::zeros(d), cov, 1.0)
    }

    pub fn smmala(dim: usize, eps: f64) -> Self {
        GaussianKernel {
            kind: KernelKind::SmMala,
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim),
            eps,
            fixed: None,
        }
    }

    fn build(kind: KernelKind, mean: DVector<f64>, cov: DMatrix<f64>, eps: f64) -> Result<Self, ProposalError> {
        let fixed = Some(GaussianParams::new(mean.clone(), &cov)?);
        Ok(GaussianKernel { kind, mean, cov, eps, fixed })
    }

    /// Replaces the adaptation slots.
    pub fn with_slots(&self, mean: Option<DVector<f64>>, cov: DMatrix<f64>) -> Result<Self, ProposalError> {
        match self.kind {
            KernelKind::SmMala => Ok(self.clone()),
            kind => Self::build(kind, mean.unwrap_or_else(|| self.mean.clone()), cov, self.eps),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Whether the proposal law changes with the point it is drawn from.
    pub fn depends_on_from(&self) -> bool {
        self.kind != KernelKind::IndependentGaussian
    }

    /// Translation-invariant kernels make the bounded-jump rule exact.
    pub fn is_translation_invariant(&self) -> bool {
        self.kind == KernelKind::RandomWalkGaussian
    }

    pub fn params_at(&self, target: &dyn Target, from: &DVector<f64>) -> Result<GaussianParams, ProposalError> {
        match self.kind {
            KernelKind::IndependentGaussian => Ok(self.fixed.clone().expect("built with factor")),
            KernelKind::RandomWalkGaussian => {
                let mut p = self.fixed.clone().expect("built with factor");
                p.mean = from.clone();
                Ok(p)
            }
            KernelKind::SmMala => {
                let (m, c) = smmala_params(target, from, self.eps)?;
                GaussianParams::new(m, &c).map_err(|_| ProposalError::MetricNotSpd)
            }
        }
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxRegion {
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

/// The adapted kernel, optionally replaced by a fixed one outside a box.
#[derive(Debug, Clone, Copy)]
pub struct KernelChoice<'a> {
    pub active: &'a GaussianKernel,
    pub fallback: Option<(&'a BoxRegion, &'a GaussianKernel)>,
}

impl<'a> KernelChoice<'a> {
    pub fn plain(k: &'a GaussianKernel) -> Self {
        KernelChoice { active: k, fallback: None }
    }

    pub fn at(&self, from: &DVector<f64>) -> &'a GaussianKernel {
        match self.fallback {
            Some((region, fixed)) if !region.contains(from) => fixed,
            _ => self.active,
        }
    }

    pub fn depends_on_from(&self) -> bool {
        self.active.depends_on_from() || self.fallback.is_some()
    }

    pub fn params_at(&self, target: &dyn Target, from: &DVector<f64>) -> Result<GaussianParams, ProposalError> {
        self.at(from).params_at(target, from)
    }
}
