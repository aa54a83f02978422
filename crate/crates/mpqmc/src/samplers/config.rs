use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SamplerError;
use crate::driving::{Driver, StreamKind, TupleSchedule, UniformStream};
use crate::finite_chain::{Construction, TJELMELAND_MAX_STATES};
use crate::proposals::{BoxRegion, GaussianKernel, KernelKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Draw `M` states per iteration from the index chain.
    #[default]
    Sampling,
    /// Keep every proposal, weighted by the stationary index law.
    ImportanceSampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Adapt {
    #[default]
    Off,
    Cov,
    MeanAndCov,
}

/// Source of the driving uniforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DrivingSpec {
    #[default]
    PseudoRandom,
    /// Register size `m`, or the smallest one whose schedule covers the run.
    CudLfsr { m: Option<u32> },
    VanDerCorput { base: u32 },
}

impl DrivingSpec {
    pub fn is_pseudo_random(&self) -> bool {
        matches!(self, DrivingSpec::PseudoRandom)
    }
}

/// Isotropic variance or a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovSpec {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl CovSpec {
    pub fn to_matrix(&self, d: usize) -> Result<DMatrix<f64>, SamplerError> {
        match self {
            CovSpec::Scalar(v) => Ok(DMatrix::identity(d, d) * *v),
            CovSpec::Matrix(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(SamplerError::Config(format!("kernel covariance must be {d}x{d}")));
                }
                Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
            }
        }
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        CovSpec::Matrix((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
    }
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// SmMALA step size.
    #[serde(default = "one")]
    pub eps: f64,
    /// Independent-kernel mean (defaults to the start point).
    #[serde(default)]
    pub mean: Option<Vec<f64>>,
    /// Initial covariance (defaults to the identity).
    #[serde(default)]
    pub cov: Option<CovSpec>,
    /// Draw an auxiliary point first and propose around it.
    #[serde(default)]
    pub auxiliary: bool,
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        KernelSpec { kind, eps: 1.0, mean: None, cov: None, auxiliary: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Safeguards {
    /// Maximal distance between a proposal and the carried point.
    #[serde(default)]
    pub bounded_jump: Option<f64>,
    /// Outside this box the initial kernel replaces the adapted one.
    #[serde(default)]
    pub freeze_outside: Option<BoxRegion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// `N`, fresh proposals per iteration.
    pub proposals: usize,
    /// `M`, index draws per iteration in sampling mode.
    #[serde(default = "one_usize")]
    pub accepted: usize,
    /// `L`, recorded iterations.
    pub iterations: usize,
    /// Iterations run before recording starts.
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub transition: Construction,
    #[serde(default)]
    pub driving: DrivingSpec,
    #[serde(default)]
    pub seed: u64,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub adapt: Adapt,
    #[serde(default)]
    pub safeguards: Safeguards,
    #[serde(default)]
    pub start: Option<Vec<f64>>,
}

impl SamplerConfig {
    pub fn new(proposals: usize, iterations: usize, kernel: KernelSpec) -> Self {
        SamplerConfig {
            proposals,
            accepted: 1,
            iterations,
            burn_in: 0,
            mode: Mode::Sampling,
            transition: Construction::Barker,
            driving: DrivingSpec::PseudoRandom,
            seed: 0,
            kernel,
            adapt: Adapt::Off,
            safeguards: Safeguards::default(),
            start: None,
        }
    }

    pub fn total_iterations(&self) -> usize {
        self.burn_in + self.iterations
    }

    /// Index uniforms per iteration.
    pub fn index_draws(&self) -> usize {
        match self.mode {
            Mode::Sampling => self.accepted,
            Mode::ImportanceSampling => 1,
        }
    }

    /// Uniforms consumed per iteration in dimension `d`.
    pub fn width(&self, d: usize) -> usize {
        let aux = if self.kernel.auxiliary { d } else { 0 };
        aux + self.proposals * d + self.index_draws()
    }

    pub fn is_adaptive(&self) -> bool {
        self.adapt != Adapt::Off
    }

    /// Name of the algorithm variant this configuration runs.
    pub fn listing(&self) -> &'static str {
        let quasi = !self.driving.is_pseudo_random();
        match (self.mode, self.is_adaptive(), quasi) {
            (Mode::Sampling, false, false) => "mp_mcmc",
            (Mode::Sampling, true, false) => "adaptive_mp_mcmc",
            (Mode::ImportanceSampling, false, false) => "is_mp_mcmc",
            (Mode::ImportanceSampling, true, false) => "adaptive_is_mp_mcmc",
            (Mode::Sampling, false, true) => "mp_qmcmc",
            (Mode::Sampling, true, true) => "adaptive_mp_qmcmc",
            (Mode::ImportanceSampling, false, true) => "is_mp_qmcmc",
            (Mode::ImportanceSampling, true, true) => "adaptive_is_mp_qmcmc",
        }
    }

    /// Whether the consistency theory covers this combination: always for
    /// pseudo-random driving, only for the plain independent kernel otherwise.
    pub fn consistency_guaranteed(&self) -> bool {
        self.driving.is_pseudo_random()
            || (self.kernel.kind == KernelKind::IndependentGaussian
                && !self.kernel.auxiliary
                && self.safeguards.bounded_jump.is_none())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self, d: usize) -> Result<(), SamplerError> {
        let err = |m: String| Err(SamplerError::Config(m));
        if self.proposals < 1 {
            return err("proposals must be at least 1".into());
        }
        if self.accepted < 1 {
            return err("accepted must be at least 1".into());
        }
        if self.iterations < 1 {
            return err("iterations must be at least 1".into());
        }
        if self.transition == Construction::Tjelmeland && self.proposals + 1 > TJELMELAND_MAX_STATES {
            return err(format!("tjelmeland transitions support at most {} proposals", TJELMELAND_MAX_STATES - 1));
        }
        if !(self.kernel.eps > 0.0) {
            return err("kernel.eps must be positive".into());
        }
        if let Some(m) = &self.kernel.mean {
            if m.len() != d {
                return err(format!("kernel.mean has length {}, target dimension is {d}", m.len()));
            }
        }
        if let Some(s) = &self.start {
            if s.len() != d {
                return err(format!("start has length {}, target dimension is {d}", s.len()));
            }
        }
        if self.is_adaptive() && self.kernel.kind == KernelKind::SmMala {
            return err("adaptation needs an independent or random-walk kernel".into());
        }
        if self.adapt == Adapt::MeanAndCov && self.kernel.kind != KernelKind::IndependentGaussian {
            return err("mean_and_cov adaptation needs the independent kernel".into());
        }
        if let Some(dmax) = self.safeguards.bounded_jump {
            if !(dmax > 0.0) {
                return err("safeguards.bounded_jump must be positive".into());
            }
            if self.kernel.auxiliary {
                return err("bounded_jump is not supported with auxiliary proposals".into());
            }
        }
        if let Some(b) = &self.safeguards.freeze_outside {
            if b.lower.len() != d || b.upper.len() != d {
                return err(format!("freeze_outside box must have dimension {d}"));
            }
        }
        if let DrivingSpec::VanDerCorput { base } = self.driving {
            if base < 2 {
                return err("van_der_corput base must be at least 2".into());
            }
        }
        Ok(())
    }

    pub fn initial_cov(&self, d: usize) -> Result<DMatrix<f64>, SamplerError> {
        self.kernel
            .cov
            .as_ref()
            .map_or(Ok(DMatrix::identity(d, d)), |c| c.to_matrix(d))
    }

    pub fn start_point(&self, d: usize) -> DVector<f64> {
        match (&self.start, &self.kernel.mean) {
            (Some(s), _) => DVector::from_row_slice(s),
            (None, Some(m)) => DVector::from_row_slice(m),
            _ => DVector::zeros(d),
        }
    }

    pub fn initial_kernel(&self, d: usize) -> Result<GaussianKernel, SamplerError> {
        let cov = self.initial_cov(d)?;
        let k = match self.kernel.kind {
            KernelKind::IndependentGaussian => {
                GaussianKernel::independent(self.kernel.mean.as_ref().map_or_else(|| self.start_point(d), |m| DVector::from_row_slice(m)), cov)?
            }
            KernelKind::RandomWalkGaussian => GaussianKernel::random_walk(cov)?,
            KernelKind::SmMala => GaussianKernel::smmala(d, self.kernel.eps),
        };
        Ok(k)
    }

    /// Builds the driver, failing before any sampling when a finite schedule is too short.
    pub fn driver(&self, d: usize) -> Result<Driver, SamplerError> {
        let w = self.width(d);
        let needed = self.total_iterations() as u64;
        match self.driving {
            DrivingSpec::PseudoRandom => Ok(Driver::Stream(UniformStream::pseudo_random(self.seed))),
            DrivingSpec::VanDerCorput { base } => Ok(Driver::Stream(UniformStream::van_der_corput(base)?)),
            DrivingSpec::CudLfsr { m } => {
                let capacity = |m: u32| {
                    let len = (1u64 << m) - 1;
                    1 + len / w as u64 * w as u64
                };
                let m = match m {
                    Some(m) => m,
                    None => (10..=20)
                        .find(|&m| capacity(m) >= needed && (1u64 << m) > w as u64)
                        .ok_or_else(|| SamplerError::Budget { needed, available: capacity(20), width: w })?,
                };
                let stream = UniformStream::new(StreamKind::CudLfsr { m }, self.seed)?;
                let schedule = TupleSchedule::new(stream, w)?;
                if (schedule.len() as u64) < needed {
                    return Err(SamplerError::Budget { needed, available: schedule.len() as u64, width: w });
                }
                Ok(Driver::schedule(schedule))
            }
        }
    }
}
