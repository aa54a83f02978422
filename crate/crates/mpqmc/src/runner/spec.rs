use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::RunnerError;
use crate::samplers::{Adapt, CovSpec, DrivingSpec, Mode, SamplerConfig};
use crate::targets::{
    laplace_covariance, simulate_linreg, simulate_logistic, simulate_ode, GaussianTarget, LogisticTarget, OdeModel,
    Target, ZellnerTarget,
};

fn default_observations() -> usize {
    100
}
fn default_sigma2() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    100.0
}
fn default_lv_points() -> usize {
    40
}
fn default_fhn_points() -> usize {
    200
}

/// Posterior to sample from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Gaussian {
        mean: Vec<f64>,
        cov: CovSpec,
    },
    /// Linear regression with a unit-information Zellner prior on simulated data.
    Zellner {
        dim: usize,
        #[serde(default = "default_observations")]
        observations: usize,
        #[serde(default = "default_sigma2")]
        sigma2: f64,
        #[serde(default)]
        seed: u64,
    },
    Logistic {
        dim: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        seed: u64,
    },
    LotkaVolterra {
        #[serde(default = "default_lv_points")]
        points: usize,
        #[serde(default)]
        seed: u64,
    },
    FitzhughNagumo {
        #[serde(default = "default_fhn_points")]
        points: usize,
        #[serde(default)]
        seed: u64,
    },
}

/// A constructed target and a representative point (analytic mean or the
/// parameters the data were simulated from).
pub struct BuiltTarget {
    pub target: Box<dyn Target>,
    pub anchor: DVector<f64>,
}

impl TargetSpec {
    pub fn build(&self) -> Result<BuiltTarget, RunnerError> {
        let built = match self {
            TargetSpec::Gaussian { mean, cov } => {
                let d = mean.len();
                let cov = cov.to_matrix(d).map_err(|e| RunnerError::Config(e.to_string()))?;
                let t = GaussianTarget::new(DVector::from_row_slice(mean), cov)?;
                BuiltTarget { anchor: t.mean().clone(), target: Box::new(t) }
            }
            TargetSpec::Zellner { dim, observations, sigma2, seed } => {
                let data = simulate_linreg(*dim, *observations, *sigma2, *seed);
                let t = ZellnerTarget::with_unit_information(&data.x, &data.y, *sigma2)?;
                BuiltTarget { anchor: t.analytic_mean().expect("analytic posterior"), target: Box::new(t) }
            }
            TargetSpec::Logistic { dim, alpha, seed } => {
                let data = simulate_logistic(*dim, *seed);
                let t = LogisticTarget::new(data.x, data.y, *alpha)?;
                BuiltTarget { anchor: data.theta, target: Box::new(t) }
            }
            TargetSpec::LotkaVolterra { points, seed } => ode(OdeModel::LotkaVolterra, *points, *seed)?,
            TargetSpec::FitzhughNagumo { points, seed } => ode(OdeModel::FitzHughNagumo, *points, *seed)?,
        };
        Ok(built)
    }
}

fn ode(model: OdeModel, points: usize, seed: u64) -> Result<BuiltTarget, RunnerError> {
    if points == 0 {
        return Err(RunnerError::Config("ode targets need at least one data point".into()));
    }
    let data = simulate_ode(model, points, seed);
    let t = data.target()?;
    Ok(BuiltTarget { anchor: DVector::from_vec(data.params), target: Box::new(t) })
}

/// Contents of a `sample` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleFile {
    pub target: TargetSpec,
    pub sampler: SamplerConfig,
}

/// One algorithm variant of an experiment grid, named by its listing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub name: &'static str,
    pub mode: Mode,
    pub adaptive: bool,
    pub quasi: bool,
}

impl Variant {
    pub const ALL: [&'static str; 8] = [
        "mp_mcmc",
        "adaptive_mp_mcmc",
        "is_mp_mcmc",
        "adaptive_is_mp_mcmc",
        "mp_qmcmc",
        "adaptive_mp_qmcmc",
        "is_mp_qmcmc",
        "adaptive_is_mp_qmcmc",
    ];

    pub fn parse(s: &str) -> Result<Variant, RunnerError> {
        let name = Self::ALL
            .iter()
            .find(|n| **n == s)
            .ok_or_else(|| RunnerError::Config(format!("unknown variant `{s}`; expected one of {}", Self::ALL.join(", "))))?;
        Ok(Variant {
            name,
            mode: if s.contains("is_") { Mode::ImportanceSampling } else { Mode::Sampling },
            adaptive: s.starts_with("adaptive_"),
            quasi: s.ends_with("qmcmc"),
        })
    }

    /// The pseudo-random counterpart of a quasi variant.
    pub fn twin(&self) -> Option<&'static str> {
        self.quasi.then(|| {
            let t = self.name.replace("qmcmc", "mcmc");
            *Self::ALL.iter().find(|n| **n == t).expect("every quasi listing has a twin")
        })
    }
}

/// Cells of an experiment: every variant at every `N` and size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub variants: Vec<String>,
    /// Values of `N`.
    pub proposals: Vec<usize>,
    /// Explicit iteration counts.
    #[serde(default)]
    pub iterations: Option<Vec<usize>>,
    /// Register sizes. Each size runs whole passes of the width-`w` schedule,
    /// as many as give about `2^m - 1` function evaluations.
    #[serde(default)]
    pub cud_m: Option<Vec<u32>>,
}

/// How the kernel is initialized before the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelInit {
    /// Use the sampler section as written.
    #[default]
    Config,
    /// Gaussian approximation at the target's anchor, covariance times `scale`.
    Laplace {
        #[serde(default = "default_sigma2")]
        scale: f64,
    },
}

/// Reference mean for bias and MSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// Analytic posterior mean when the target has one.
    #[default]
    Analytic,
    /// Averaged long importance-sampling runs driven by the LFSR sequence.
    Gold { proposals: usize, iterations: usize, replicates: usize },
    None,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default = "one")]
    pub replicates: usize,
    /// Replicate `r` uses seed `seed + r`.
    #[serde(default)]
    pub seed: u64,
    pub target: TargetSpec,
    /// Base sampler settings; `proposals`, `iterations`, `mode`, `driving` and
    /// `seed` are set per cell.
    pub sampler: toml::Table,
    pub grid: Grid,
    #[serde(default)]
    pub kernel_init: KernelInit,
    #[serde(default)]
    pub reference: ReferenceSpec,
    /// Write per-run output directories.
    #[serde(default)]
    pub keep_runs: bool,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, RunnerError> {
        toml::from_str(text).map_err(|e| RunnerError::Config(e.to_string()))
    }

    pub fn build_target(&self) -> Result<BuiltTarget, RunnerError> {
        self.target.build()
    }

    pub fn base_config(&self) -> Result<SamplerConfig, RunnerError> {
        let mut t = self.sampler.clone();
        t.entry("proposals").or_insert(toml::Value::Integer(1));
        t.entry("iterations").or_insert(toml::Value::Integer(1));
        t.try_into().map_err(|e: toml::de::Error| RunnerError::Config(format!("sampler: {e}")))
    }

    pub fn variants(&self) -> Result<Vec<Variant>, RunnerError> {
        if self.grid.variants.is_empty() {
            return Err(RunnerError::Config("grid.variants is empty".into()));
        }
        self.grid.variants.iter().map(|v| Variant::parse(v)).collect()
    }

    /// Canonical hash of the spec.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("spec serializes");
        Sha256::digest(json.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Applies the kernel initialization to `base`.
    pub fn initialize_kernel(&self, base: &mut SamplerConfig, built: &BuiltTarget) -> Result<(), RunnerError> {
        if let KernelInit::Laplace { scale } = self.kernel_init {
            let cov: DMatrix<f64> = laplace_covariance(built.target.as_ref(), &built.anchor, 1e-4)? * scale;
            base.kernel.cov = Some(CovSpec::from_matrix(&cov));
            base.kernel.mean = Some(built.anchor.iter().copied().collect());
            if base.start.is_none() {
                base.start = base.kernel.mean.clone();
            }
        }
        Ok(())
    }

    /// Sampler configuration of one cell and replicate.
    pub fn cell_config(
        &self,
        base: &SamplerConfig,
        variant: &Variant,
        proposals: usize,
        iterations: usize,
        m: Option<u32>,
        replicate: usize,
    ) -> SamplerConfig {
        let mut c = base.clone();
        c.proposals = proposals;
        c.iterations = iterations;
        c.mode = variant.mode;
        c.adapt = match (variant.adaptive, base.adapt) {
            (false, _) => Adapt::Off,
            (true, Adapt::Off) => Adapt::Cov,
            (true, a) => a,
        };
        c.driving = if variant.quasi { DrivingSpec::CudLfsr { m } } else { DrivingSpec::PseudoRandom };
        c.seed = self.seed.wrapping_add(replicate as u64);
        c
    }
}
