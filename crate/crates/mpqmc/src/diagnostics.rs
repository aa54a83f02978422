//! Estimator quality across replicates, chain mixing summaries, and reference means.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::par;
use crate::samplers::{run, Mode, RunOutput, SamplerConfig, SamplerError};
use crate::targets::Target;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("no reference mean available")]
    NoReference,
    #[error("metric value {0} is not positive")]
    NonPositiveMetric(f64),
    #[error("needs a sampling-mode run")]
    WrongMode,
    #[error("{got} values, need at least {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("cache: {0}")]
    Cache(String),
}

/// Replicate estimates over a grid of sample sizes. Vector-valued estimates
/// are scored by summing the per-coordinate metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSet {
    pub sizes: Vec<usize>,
    /// `estimates[k][r]`: replicate `r` at `sizes[k]`.
    pub estimates: Vec<Vec<DVector<f64>>>,
    pub reference: Option<DVector<f64>>,
}

impl ReplicateSet {
    fn at(&self, k: usize) -> Result<&[DVector<f64>], DiagnosticsError> {
        let e = &self.estimates[k];
        if e.len() < 2 {
            return Err(DiagnosticsError::TooFewSamples { got: e.len(), need: 2 });
        }
        Ok(e)
    }

    pub fn empirical_variance(&self, k: usize) -> Result<f64, DiagnosticsError> {
        Ok(empirical_variance(self.at(k)?))
    }

    pub fn squared_bias(&self, k: usize) -> Result<f64, DiagnosticsError> {
        squared_bias(self.at(k)?, self.reference.as_ref())
    }

    pub fn mse(&self, k: usize) -> Result<f64, DiagnosticsError> {
        mse(self.at(k)?, self.reference.as_ref())
    }

    pub fn raw_mse(&self, k: usize) -> Result<f64, DiagnosticsError> {
        raw_mse(self.at(k)?, self.reference.as_ref())
    }
}

fn replicate_mean(est: &[DVector<f64>]) -> DVector<f64> {
    let mut m = DVector::zeros(est[0].len());
    for e in est {
        m += e;
    }
    m / est.len() as f64
}

/// Unbiased variance across replicates, summed over coordinates.
pub fn empirical_variance(est: &[DVector<f64>]) -> f64 {
    let m = replicate_mean(est);
    est.iter().map(|e| (e - &m).norm_squared()).sum::<f64>() / (est.len() - 1) as f64
}

pub fn squared_bias(est: &[DVector<f64>], reference: Option<&DVector<f64>>) -> Result<f64, DiagnosticsError> {
    let r = reference.ok_or(DiagnosticsError::NoReference)?;
    Ok((replicate_mean(est) - r).norm_squared())
}

/// Variance plus squared bias.
pub fn mse(est: &[DVector<f64>], reference: Option<&DVector<f64>>) -> Result<f64, DiagnosticsError> {
    Ok(empirical_variance(est) + squared_bias(est, reference)?)
}

/// Mean squared deviation from the reference, `(R-1)/R` variance plus bias.
pub fn raw_mse(est: &[DVector<f64>], reference: Option<&DVector<f64>>) -> Result<f64, DiagnosticsError> {
    let r = reference.ok_or(DiagnosticsError::NoReference)?;
    Ok(est.iter().map(|e| (e - r).norm_squared()).sum::<f64>() / est.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Least-squares slope of `log metric` against `log n`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit, DiagnosticsError> {
    if points.len() < 3 {
        return Err(DiagnosticsError::TooFewSamples { got: points.len(), need: 3 });
    }
    if let Some(&(_, v)) = points.iter().find(|p| !(p.1 > 0.0) || !(p.0 > 0.0)) {
        return Err(DiagnosticsError::NonPositiveMetric(v));
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = if points.len() > 2 { (rss / (k - 2.0) / sxx).sqrt() } else { f64::NAN };
    Ok(RateFit { slope, intercept, stderr })
}

fn sampling_run(run: &RunOutput) -> Result<&[DVector<f64>], DiagnosticsError> {
    if run.meta.listing.contains("is_") {
        return Err(DiagnosticsError::WrongMode);
    }
    if run.samples.len() < 2 {
        return Err(DiagnosticsError::TooFewSamples { got: run.samples.len(), need: 2 });
    }
    Ok(&run.samples)
}

/// Fraction of index draws that moved to a different proposal.
pub fn acceptance_rate(run: &RunOutput) -> Result<f64, DiagnosticsError> {
    sampling_run(run)?;
    let moved = run.moved();
    Ok(moved.iter().filter(|m| **m).count() as f64 / moved.len() as f64)
}

/// Mean squared jumping distance between consecutive recorded states.
pub fn msjd(run: &RunOutput) -> Result<f64, DiagnosticsError> {
    Ok(msjd_of(sampling_run(run)?))
}

pub fn msjd_of(xs: &[DVector<f64>]) -> f64 {
    xs.windows(2).map(|w| (&w[1] - &w[0]).norm_squared()).sum::<f64>() / (xs.len() - 1) as f64
}

/// Batch-means estimate of the asymptotic variance of a series' mean.
pub fn batch_means(series: &[f64], batches: usize) -> Result<f64, DiagnosticsError> {
    let need = 10 * batches.max(2);
    if series.len() < need {
        return Err(DiagnosticsError::TooFewSamples { got: series.len(), need });
    }
    let size = series.len() / batches;
    let used = size * batches;
    let mean = series[..used].iter().sum::<f64>() / used as f64;
    let means: Vec<f64> = series[..used].chunks_exact(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(size as f64 * var)
}

/// Per-coordinate batch-means asymptotic variance of the sample mean.
pub fn asymptotic_variance_batch_means(run: &RunOutput, batches: usize) -> Result<DVector<f64>, DiagnosticsError> {
    let xs = sampling_run(run)?;
    let d = xs[0].len();
    let mut out = DVector::zeros(d);
    for k in 0..d {
        let series: Vec<f64> = xs.iter().map(|x| x[k]).collect();
        out[k] = batch_means(&series, batches)?;
    }
    Ok(out)
}

/// High-budget reference mean with its replicate standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldStandard {
    pub key: String,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub replicates: usize,
}

/// Averages `replicates` importance-sampling runs with seeds `seed + r`.
/// With a cache directory, a stored result under the same key is reused.
pub fn gold_standard_mean(
    config: &SamplerConfig,
    target: &dyn Target,
    f: &(dyn Fn(&DVector<f64>) -> DVector<f64> + Sync),
    replicates: usize,
    cache: Option<&Path>,
) -> Result<GoldStandard, DiagnosticsError> {
    let mut cfg = config.clone();
    cfg.mode = Mode::ImportanceSampling;
    let key = {
        let text = format!("{}|{}|{}", cfg.hash(), target.name(), replicates);
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect::<String>()
    };
    let path = cache.map(|dir| dir.join(format!("gold_{key}.json")));
    if let Some(p) = path.as_ref().filter(|p| p.exists()) {
        let text = fs::read_to_string(p).map_err(|e| DiagnosticsError::Cache(e.to_string()))?;
        let g: GoldStandard = serde_json::from_str(&text).map_err(|e| DiagnosticsError::Cache(e.to_string()))?;
        if g.key == key {
            return Ok(g);
        }
    }
    let runs = par::map_range(replicates.max(2), |r| {
        let mut c = cfg.clone();
        c.seed = cfg.seed.wrapping_add(r as u64);
        run(&c, target, f).map(|o| o.estimate.mu)
    });
    let est = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mean = replicate_mean(&est);
    let n = est.len() as f64;
    let stderr: Vec<f64> = (0..mean.len())
        .map(|k| (est.iter().map(|e| (e[k] - mean[k]).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt())
        .collect();
    let g = GoldStandard { key, mean: mean.iter().copied().collect(), stderr, replicates: est.len() };
    if let Some(p) = path {
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| DiagnosticsError::Cache(e.to_string()))?;
        }
        let text = serde_json::to_string_pretty(&g).map_err(|e| DiagnosticsError::Cache(e.to_string()))?;
        fs::write(&p, text).map_err(|e| DiagnosticsError::Cache(e.to_string()))?;
    }
    Ok(g)
}
