use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::config::{Adapt, Mode, SamplerConfig};
use super::estimate::{regularize_cov, WeightedEstimate};
use super::SamplerError;
use crate::driving::{Driver, UniformStream};
use crate::finite_chain::{sample_index, transition_matrix, weights_from_log_masses, ChainError, Construction, IndexWeights};
use crate::proposals::{build_proposal_set, fresh_params, propose_batch, GaussianKernel, KernelChoice, ProposalScheme, ProposalSet};
use crate::targets::Target;

const RESAMPLE_ATTEMPTS: usize = 100;
const ZERO_MASS_RETRIES: usize = 3;
const SIDE_STREAM_SALT: u64 = 0x5851_F42D_4C95_7F2D;

pub fn identity(x: &DVector<f64>) -> DVector<f64> {
    x.clone()
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagRow {
    pub iter: usize,
    pub acpt_rate: f64,
    pub msjd: f64,
    pub mu_tilde: Vec<f64>,
    pub mu: Vec<f64>,
    pub trace_sigma: f64,
    /// Frobenius norm of the change in the adapted covariance.
    pub adapt_increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub listing: String,
    pub stream: String,
    pub seed: u64,
    pub config_hash: String,
    pub dim: usize,
    pub proposals: usize,
    pub accepted: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub uniforms_per_iteration: usize,
    pub uniforms_consumed: u64,
    pub consistency_guaranteed: bool,
    /// Set when the bounded-jump safeguard is on; exact only for random-walk kernels.
    pub bounded_jump_exact: Option<bool>,
    pub resampled_proposals: u64,
    pub zero_mass_retries: u64,
    pub covariance_repairs: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// `M` recorded states per iteration in sampling mode, empty otherwise.
    pub samples: Vec<DVector<f64>>,
    /// Proposal index behind each recorded state (0 is the carried point).
    pub indices: Vec<usize>,
    pub estimate: WeightedEstimate,
    pub rows: Vec<DiagRow>,
    pub meta: RunMeta,
    /// Kernel in use after the last iteration.
    pub final_kernel_cov: DMatrix<f64>,
    pub final_kernel_mean: DVector<f64>,
}

impl RunOutput {
    pub fn mean(&self) -> &DVector<f64> {
        &self.estimate.mu
    }

    /// Whether each recorded state differs in index from its predecessor.
    pub fn moved(&self) -> Vec<bool> {
        let mut prev = 0;
        self.indices
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let m = if k % self.meta.accepted == 0 { i != 0 } else { i != prev };
                prev = i;
                m
            })
            .collect()
    }
}

/// Everything one iteration produced.
pub(crate) struct Step {
    pub set: ProposalSet,
    pub weights: IndexWeights,
    pub chosen: Vec<usize>,
    pub resampled: u64,
}

/// State that persists between iterations.
pub(crate) struct Chain<'a> {
    pub cfg: &'a SamplerConfig,
    pub target: &'a dyn Target,
    pub kernel: GaussianKernel,
    pub initial: GaussianKernel,
    pub carried: DVector<f64>,
    pub carried_log_pi: f64,
    pub side: UniformStream,
}

impl<'a> Chain<'a> {
    pub fn new(cfg: &'a SamplerConfig, target: &'a dyn Target, start: DVector<f64>) -> Result<Self, SamplerError> {
        let d = target.dim();
        let kernel = cfg.initial_kernel(d)?;
        let carried_log_pi = target.log_density(&start);
        if !(carried_log_pi > f64::NEG_INFINITY) {
            return Err(SamplerError::StartOutsideSupport);
        }
        Ok(Chain {
            cfg,
            target,
            initial: kernel.clone(),
            kernel,
            carried: start,
            carried_log_pi,
            side: UniformStream::pseudo_random(cfg.seed ^ SIDE_STREAM_SALT),
        })
    }

    /// One iteration from the tuple `u`; does not move the chain.
    pub fn step(&mut self, u: &[f64], iteration: usize) -> Result<Step, SamplerError> {
        let d = self.target.dim();
        let n = self.cfg.proposals;
        let choice = KernelChoice {
            active: &self.kernel,
            fallback: self.cfg.safeguards.freeze_outside.as_ref().map(|b| (b, &self.initial)),
        };
        let scheme = if self.cfg.kernel.auxiliary {
            ProposalScheme::Auxiliary { first: choice, second: choice }
        } else {
            ProposalScheme::Direct(choice)
        };
        let off = scheme.uniforms_needed(n, d) - n * d;
        let (z, params) = fresh_params(&scheme, self.target, &self.carried, u)?;
        let mut fresh = propose_batch(&params, &u[off..off + n * d])?;

        let mut resampled = 0;
        let bound = self.cfg.safeguards.bounded_jump;
        if let Some(dmax) = bound {
            let mut buf = vec![0.0; d];
            for y in fresh.iter_mut() {
                let mut attempts = 0;
                while (&*y - &self.carried).norm() > dmax {
                    if attempts == RESAMPLE_ATTEMPTS {
                        return Err(SamplerError::ResampleBudgetExceeded { iteration, attempts });
                    }
                    attempts += 1;
                    self.side.fill(&mut buf)?;
                    *y = params.sample(&buf)?;
                }
                resampled += attempts as u64;
            }
        }

        let set = build_proposal_set(&scheme, self.target, &self.carried, self.carried_log_pi, z, fresh)?;
        let mut masses = set.log_masses();
        if let Some(dmax) = bound {
            // Any point that could not have generated the others under the
            // truncated kernel gets zero mass.
            for (m, x) in masses.iter_mut().zip(&set.points) {
                if set.points.iter().any(|y| (y - x).norm() > dmax) {
                    *m = f64::NEG_INFINITY;
                }
            }
        }
        let chain_err = |source| SamplerError::Chain { iteration, source };
        let weights = weights_from_log_masses(&masses).map_err(chain_err)?;
        let v = &u[u.len() - self.cfg.index_draws()..];
        let chosen = match self.cfg.mode {
            Mode::ImportanceSampling => vec![sample_index(&weights.w, v[0])],
            Mode::Sampling if self.cfg.transition == Construction::Barker => {
                v.iter().map(|&vi| sample_index(&weights.w, vi)).collect()
            }
            Mode::Sampling => {
                let a = transition_matrix(self.cfg.transition, &masses).map_err(chain_err)?;
                let mut prev = 0;
                v.iter()
                    .map(|&vi| {
                        prev = sample_index(a.row(prev), vi);
                        prev
                    })
                    .collect()
            }
        };
        Ok(Step { set, weights, chosen, resampled })
    }

    /// Moves the carried point to the last chosen index.
    pub fn advance(&mut self, step: &Step) {
        let last = *step.chosen.last().expect("at least one draw");
        self.carried = step.set.points[last].clone();
        self.carried_log_pi = step.set.log_pi[last];
    }
}

/// Runs the sampler with the driver described by the configuration.
pub fn run(
    cfg: &SamplerConfig,
    target: &dyn Target,
    f: &(dyn Fn(&DVector<f64>) -> DVector<f64> + Sync),
) -> Result<RunOutput, SamplerError> {
    cfg.validate(target.dim())?;
    let driver = cfg.driver(target.dim())?;
    run_with_driver(cfg, target, f, driver)
}

/// Runs the sampler on an explicit driver.
pub fn run_with_driver(
    cfg: &SamplerConfig,
    target: &dyn Target,
    f: &(dyn Fn(&DVector<f64>) -> DVector<f64> + Sync),
    mut driver: Driver,
) -> Result<RunOutput, SamplerError> {
    let d = target.dim();
    cfg.validate(d)?;
    let w = cfg.width(d);
    let total = cfg.total_iterations();
    if let Some(left) = driver.remaining_tuples(w) {
        if left < total as u64 {
            return Err(SamplerError::Budget { needed: total as u64, available: left, width: w });
        }
    }
    let may_retry = matches!(driver, Driver::Stream(_)) && cfg.driving.is_pseudo_random();

    let mut chain = Chain::new(cfg, target, cfg.start_point(d))?;
    let mut adapt_state = cfg.is_adaptive().then(|| {
        let mu = if chain.kernel.depends_on_from() { chain.carried.clone() } else { chain.kernel.mean.clone() };
        WeightedEstimate::with_initial(mu, chain.kernel.cov.clone())
    });

    let fdim = f(&chain.carried).len();
    let mut estimate = WeightedEstimate::empty(fdim);
    let keep = if cfg.mode == Mode::Sampling { cfg.iterations * cfg.accepted } else { 0 };
    let mut samples = Vec::with_capacity(keep);
    let mut indices = Vec::with_capacity(keep);
    let mut rows = Vec::with_capacity(cfg.iterations);
    let mut meta_counts = (0u64, 0u64, 0u64);
    let mut u = vec![0.0; w];

    for it in 0..total {
        let mut retries = 0;
        let step = loop {
            driver.next_tuple(&mut u)?;
            match chain.step(&u, it) {
                Err(SamplerError::Chain { source: ChainError::AllZeroMass, .. }) if may_retry && retries < ZERO_MASS_RETRIES => {
                    retries += 1;
                }
                other => break other?,
            }
        };
        meta_counts.0 += step.resampled;
        meta_counts.1 += retries as u64;
        let before = chain.carried.clone();

        let mut increment = 0.0;
        if let Some(st) = adapt_state.as_mut() {
            let old = st.sigma.clone();
            st.update(&step.weights.w, &step.set.points);
            increment = (&st.sigma - old).norm();
            let (cov, repaired) = regularize_cov(&st.sigma);
            meta_counts.2 += repaired as u64;
            let mean = (cfg.adapt == Adapt::MeanAndCov).then(|| st.mu.clone());
            chain.kernel = chain.kernel.with_slots(mean, cov)?;
        }

        let recorded = it >= cfg.burn_in;
        let (mu_tilde, acpt, msjd) = match cfg.mode {
            Mode::ImportanceSampling => {
                let vals: Vec<DVector<f64>> = step.set.points.iter().map(f).collect();
                let mu_t = if recorded {
                    estimate.update(&step.weights.w, &vals)
                } else {
                    vals.iter().zip(&step.weights.w).fold(DVector::zeros(fdim), |acc, (v, w)| acc + v * *w)
                };
                let i = step.chosen[0];
                let jump = (&step.set.points[i] - &before).norm_squared();
                (mu_t, (i != 0) as u8 as f64, jump)
            }
            Mode::Sampling => {
                let m = step.chosen.len() as f64;
                let vals: Vec<DVector<f64>> = step.chosen.iter().map(|&i| f(&step.set.points[i])).collect();
                let eq = vec![1.0 / m; vals.len()];
                let mu_t = if recorded {
                    estimate.update(&eq, &vals)
                } else {
                    vals.iter().fold(DVector::zeros(fdim), |acc, v| acc + v) / m
                };
                let mut prev = 0;
                let (mut moves, mut jumps) = (0usize, 0.0);
                for &i in &step.chosen {
                    moves += (i != prev) as usize;
                    jumps += (&step.set.points[i] - &step.set.points[prev]).norm_squared();
                    prev = i;
                }
                (mu_t, moves as f64 / m, jumps / m)
            }
        };

        chain.advance(&step);
        if recorded {
            if cfg.mode == Mode::Sampling {
                for &i in &step.chosen {
                    samples.push(step.set.points[i].clone());
                    indices.push(i);
                }
            }
            rows.push(DiagRow {
                iter: it - cfg.burn_in,
                acpt_rate: acpt,
                msjd,
                mu_tilde: mu_tilde.iter().copied().collect(),
                mu: estimate.mu.iter().copied().collect(),
                trace_sigma: chain.kernel.cov.trace(),
                adapt_increment: increment,
            });
        }
    }

    let meta = RunMeta {
        listing: cfg.listing().to_string(),
        stream: stream_label(&driver),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        dim: d,
        proposals: cfg.proposals,
        accepted: cfg.index_draws(),
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        uniforms_per_iteration: w,
        uniforms_consumed: driver.consumed(),
        consistency_guaranteed: cfg.consistency_guaranteed(),
        bounded_jump_exact: cfg.safeguards.bounded_jump.map(|_| chain.kernel.is_translation_invariant()),
        resampled_proposals: meta_counts.0,
        zero_mass_retries: meta_counts.1,
        covariance_repairs: meta_counts.2,
    };
    Ok(RunOutput {
        samples,
        indices,
        estimate,
        rows,
        meta,
        final_kernel_cov: chain.kernel.cov.clone(),
        final_kernel_mean: chain.kernel.mean.clone(),
    })
}

fn stream_label(driver: &Driver) -> String {
    match driver {
        Driver::Stream(s) => s.kind().label(),
        Driver::Schedule { schedule, .. } => schedule.stream().kind().label(),
    }
}
