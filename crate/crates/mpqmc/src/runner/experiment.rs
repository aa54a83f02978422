use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Serialize;

use super::output::{fmt_float, write_json, write_run};
use super::spec::{ExperimentSpec, ReferenceSpec, Variant};
use super::RunnerError;
use crate::diagnostics::{self, acceptance_rate, fit_rate, gold_standard_mean};
use crate::driving::{TupleSchedule, UniformStream};
use crate::par;
use crate::samplers::{identity, run, DrivingSpec, Mode, RunOutput};

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub experiment: String,
    /// Function evaluations behind each estimate; empty for rate fits.
    pub n: Option<u64>,
    #[serde(rename = "N")]
    pub proposals: usize,
    pub variant: String,
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub variant: String,
    #[serde(rename = "N")]
    pub proposals: usize,
    pub iterations: usize,
    pub replicate: usize,
    pub error: String,
}

/// Replicate estimates of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub variant: &'static str,
    pub proposals: usize,
    pub iterations: usize,
    pub m: Option<u32>,
    pub n: u64,
    pub estimates: Vec<DVector<f64>>,
    pub acceptance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<MetricRow>,
    pub cells: Vec<CellResult>,
    pub failures: Vec<Failure>,
    pub reference: Option<DVector<f64>>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentReport {
    pub fn metric(&self, variant: &str, proposals: usize, n: Option<u64>, metric: &str) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.proposals == proposals && r.metric == metric && (n.is_none() || r.n == n))
    }
}

#[derive(Serialize)]
struct CellMeta {
    variant: &'static str,
    #[serde(rename = "N")]
    proposals: usize,
    iterations: usize,
    n: u64,
    m: Option<u32>,
    config_hash: String,
}

#[derive(Serialize)]
struct ExperimentMeta<'a> {
    name: &'a str,
    spec_hash: String,
    target: &'a str,
    replicates: usize,
    replicate_seeds: Vec<u64>,
    reference: Option<Vec<f64>>,
    cells: Vec<CellMeta>,
    failures: &'a [Failure],
}

struct Cell {
    variant: Variant,
    proposals: usize,
    iterations: usize,
    m: Option<u32>,
}

/// Iterations that give about `2^m - 1` function evaluations at width `w` and
/// `per` evaluations per iteration, using whole passes of the schedule.
fn period_iterations(m: u32, w: usize, per: usize) -> Result<usize, RunnerError> {
    let s = UniformStream::lfsr(m, 0).map_err(|e| RunnerError::Config(e.to_string()))?;
    let sched = TupleSchedule::new(s, w).map_err(|e| RunnerError::Config(e.to_string()))?;
    let per_pass = sched.trimmed_len() as usize / w;
    let passes = (w / per.max(1)).clamp(1, w);
    Ok(1 + passes * per_pass)
}

/// Runs every cell and replicate of `spec`; writes outputs under
/// `out_root/<name>/` when a root is given.
pub fn run_experiment(spec: &ExperimentSpec, out_root: Option<&Path>) -> Result<ExperimentReport, RunnerError> {
    let variants = spec.variants()?;
    if spec.grid.proposals.is_empty() {
        return Err(RunnerError::Config("grid.proposals is empty".into()));
    }
    if spec.replicates < 1 {
        return Err(RunnerError::Config("replicates must be at least 1".into()));
    }
    let built = spec.build_target()?;
    let target = built.target.as_ref();
    let d = target.dim();
    let mut base = spec.base_config()?;
    spec.initialize_kernel(&mut base, &built)?;

    let mut cells = Vec::new();
    for v in &variants {
        for &n in &spec.grid.proposals {
            match (&spec.grid.iterations, &spec.grid.cud_m) {
                (Some(its), None) => cells.extend(its.iter().map(|&l| Cell { variant: *v, proposals: n, iterations: l, m: None })),
                (None, Some(ms)) => {
                    for &m in ms {
                        // both twins use the quasi cell's width so sizes line up
                        let probe = spec.cell_config(&base, &Variant { quasi: true, ..*v }, n, 1, Some(m), 0);
                        let per = if v.mode == Mode::Sampling { probe.accepted } else { n };
                        let l = period_iterations(m, probe.width(d), per)?.saturating_sub(probe.burn_in);
                        cells.push(Cell { variant: *v, proposals: n, iterations: l, m: Some(m) });
                    }
                }
                _ => return Err(RunnerError::Config("grid needs exactly one of `iterations` and `cud_m`".into())),
            }
        }
    }
    if cells.is_empty() {
        return Err(RunnerError::Config("grid has no sizes".into()));
    }
    for c in &cells {
        let cfg = spec.cell_config(&base, &c.variant, c.proposals, c.iterations, c.m, 0);
        cfg.validate(d)?;
        cfg.driver(d)?;
    }

    let out_dir = out_root.map(|r| r.join(&spec.name));
    if let Some(dir) = &out_dir {
        fs::create_dir_all(dir).map_err(RunnerError::io(dir))?;
    }

    let reference = match spec.reference {
        ReferenceSpec::Analytic => target.analytic_mean(),
        ReferenceSpec::None => None,
        ReferenceSpec::Gold { proposals, iterations, replicates } => {
            let mut cfg = base.clone();
            cfg.proposals = proposals;
            cfg.iterations = iterations;
            cfg.mode = Mode::ImportanceSampling;
            cfg.driving = DrivingSpec::CudLfsr { m: None };
            cfg.seed = spec.seed;
            let cache = out_dir.as_ref().map(|d| d.join("cache"));
            let g = gold_standard_mean(&cfg, target, &identity, replicates, cache.as_deref())?;
            Some(DVector::from_vec(g.mean))
        }
    };

    let r = spec.replicates;
    let results: Vec<Result<RunOutput, String>> = par::map_range(cells.len() * r, |j| {
        let c = &cells[j / r];
        let cfg = spec.cell_config(&base, &c.variant, c.proposals, c.iterations, c.m, j % r);
        run(&cfg, target, &identity).map_err(|e| e.to_string())
    });

    let mut failures = Vec::new();
    let mut cell_results = Vec::new();
    let mut cell_meta = Vec::new();
    for (k, c) in cells.iter().enumerate() {
        let cfg0 = spec.cell_config(&base, &c.variant, c.proposals, c.iterations, c.m, 0);
        let per = match c.variant.mode {
            Mode::Sampling => cfg0.accepted,
            Mode::ImportanceSampling => c.proposals,
        };
        let mut res = CellResult {
            variant: c.variant.name,
            proposals: c.proposals,
            iterations: c.iterations,
            m: c.m,
            n: (c.iterations * per) as u64,
            estimates: Vec::new(),
            acceptance: Vec::new(),
        };
        for rep in 0..r {
            match &results[k * r + rep] {
                Ok(out) => {
                    res.estimates.push(out.estimate.mu.clone());
                    if let Ok(a) = acceptance_rate(out) {
                        res.acceptance.push(a);
                    }
                    if let (true, Some(dir)) = (spec.keep_runs, &out_dir) {
                        let cfg = spec.cell_config(&base, &c.variant, c.proposals, c.iterations, c.m, rep);
                        let sub = dir.join("runs").join(format!("{}_N{}_L{}_r{}", c.variant.name, c.proposals, c.iterations, rep));
                        write_run(&sub, out, &cfg, target.name())?;
                    }
                }
                Err(e) => failures.push(Failure {
                    variant: c.variant.name.to_string(),
                    proposals: c.proposals,
                    iterations: c.iterations,
                    replicate: rep,
                    error: e.clone(),
                }),
            }
        }
        cell_meta.push(CellMeta {
            variant: c.variant.name,
            proposals: c.proposals,
            iterations: c.iterations,
            n: res.n,
            m: c.m,
            config_hash: cfg0.hash(),
        });
        cell_results.push(res);
    }

    let rows = metric_rows(&spec.name, &cell_results, reference.as_ref());

    if let Some(dir) = &out_dir {
        write_metrics(&dir.join("metrics.csv"), &rows)?;
        let meta = ExperimentMeta {
            name: &spec.name,
            spec_hash: spec.hash(),
            target: target.name(),
            replicates: r,
            replicate_seeds: (0..r).map(|k| spec.seed.wrapping_add(k as u64)).collect(),
            reference: reference.as_ref().map(|v| v.iter().copied().collect()),
            cells: cell_meta,
            failures: &failures,
        };
        write_json(&dir.join("meta.json"), &meta)?;
    }

    Ok(ExperimentReport { rows, cells: cell_results, failures, reference, out_dir })
}

fn sd(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn metric_rows(name: &str, cells: &[CellResult], reference: Option<&DVector<f64>>) -> Vec<MetricRow> {
    let row = |c: &CellResult, metric: &str, value: f64, stderr: Option<f64>| MetricRow {
        experiment: name.to_string(),
        n: Some(c.n),
        proposals: c.proposals,
        variant: c.variant.to_string(),
        metric: metric.to_string(),
        value,
        stderr,
    };
    let mut rows = Vec::new();
    // (variant, N) -> [(n, score)] and (variant, N, n) -> score for reductions
    let mut curves: BTreeMap<(&str, usize), Vec<(f64, f64)>> = BTreeMap::new();
    let mut scores: BTreeMap<(&str, usize, u64), f64> = BTreeMap::new();
    for c in cells {
        let e = &c.estimates;
        let r = e.len();
        if r >= 2 {
            let var = diagnostics::empirical_variance(e);
            rows.push(row(c, "variance", var, Some(var * (2.0 / (r - 1) as f64).sqrt())));
            let mut score = var;
            if let Some(rf) = reference {
                let sq: Vec<f64> = e.iter().map(|x| (x - rf).norm_squared()).collect();
                let se = sd(&sq) / (r as f64).sqrt();
                let b2 = diagnostics::squared_bias(e, Some(rf)).expect("reference present");
                rows.push(row(c, "bias2", b2, None));
                rows.push(row(c, "mse", var + b2, Some(se)));
                rows.push(row(c, "raw_mse", sq.iter().sum::<f64>() / r as f64, Some(se)));
                score = var + b2;
            }
            curves.entry((c.variant, c.proposals)).or_default().push((c.n as f64, score));
            scores.insert((c.variant, c.proposals, c.n), score);
        }
        if c.acceptance.len() >= 2 {
            let a = &c.acceptance;
            rows.push(row(c, "acceptance_rate", a.iter().sum::<f64>() / a.len() as f64, Some(sd(a) / (a.len() as f64).sqrt())));
        }
    }
    let scored = if reference.is_some() { "mse" } else { "variance" };
    for ((variant, n), pts) in &curves {
        if let Ok(fit) = fit_rate(pts) {
            rows.push(MetricRow {
                experiment: name.to_string(),
                n: None,
                proposals: *n,
                variant: variant.to_string(),
                metric: format!("{scored}_rate"),
                value: fit.slope,
                stderr: Some(fit.stderr),
            });
        }
    }
    for c in cells {
        let v = Variant::parse(c.variant).expect("cells hold valid variants");
        let Some(twin) = v.twin() else { continue };
        if let (Some(q), Some(p)) = (scores.get(&(c.variant, c.proposals, c.n)), scores.get(&(twin, c.proposals, c.n))) {
            if *q > 0.0 {
                rows.push(row(c, &format!("{scored}_reduction"), p / q, None));
            }
        }
    }
    rows
}

fn write_metrics(path: &Path, rows: &[MetricRow]) -> Result<(), RunnerError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["experiment", "n", "N", "variant", "metric", "value", "stderr"])?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            r.proposals.to_string(),
            r.variant.clone(),
            r.metric.clone(),
            fmt_float(r.value),
            r.stderr.map(fmt_float).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(RunnerError::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(variants: &str, replicates: usize) -> ExperimentSpec {
        ExperimentSpec::from_toml(&format!(
            r#"
name = "small"
replicates = {replicates}
seed = 7
[target]
kind = "gaussian"
mean = [0.5]
cov = 1.0
[sampler.kernel]
kind = "independent_gaussian"
cov = 4.0
[grid]
variants = {variants}
proposals = [4]
cud_m = [10, 11, 12]
"#
        ))
        .unwrap()
    }

    #[test]
    fn writes_metrics_and_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let s = spec(r#"["is_mp_mcmc", "is_mp_qmcmc"]"#, 4);
        let a = run_experiment(&s, Some(dir.path())).unwrap();
        assert!(a.failures.is_empty());
        let bytes = std::fs::read(dir.path().join("small/metrics.csv")).unwrap();
        let b = run_experiment(&s, Some(dir.path())).unwrap();
        assert_eq!(a, b);
        assert_eq!(bytes, std::fs::read(dir.path().join("small/metrics.csv")).unwrap());
        assert!(a.metric("is_mp_qmcmc", 4, None, "mse_rate").is_some());
        assert!(a.rows.iter().any(|r| r.metric == "mse_reduction"));
        let meta = std::fs::read_to_string(dir.path().join("small/meta.json")).unwrap();
        assert!(meta.contains("\"replicate_seeds\": [\n    7,\n    8,\n    9,\n    10\n  ]"));
        // both twins use the same sizes
        let n_q: Vec<u64> = a.cells.iter().filter(|c| c.variant == "is_mp_qmcmc").map(|c| c.n).collect();
        let n_p: Vec<u64> = a.cells.iter().filter(|c| c.variant == "is_mp_mcmc").map(|c| c.n).collect();
        assert_eq!(n_q, n_p);
    }

    #[test]
    fn empty_variant_list_is_config_error() {
        let e = run_experiment(&spec("[]", 2), None).unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn failing_cells_are_recorded() {
        // a tiny jump bound exhausts the resampling budget for large N only
        let s = ExperimentSpec::from_toml(
            r#"
name = "fragile"
replicates = 4
[target]
kind = "gaussian"
mean = [0.0]
cov = 1.0
[sampler.kernel]
kind = "random_walk_gaussian"
[sampler.safeguards]
bounded_jump = 0.03
[grid]
variants = ["mp_mcmc"]
proposals = [1, 64]
iterations = [3]
"#,
        )
        .unwrap();
        let rep = run_experiment(&s, None).unwrap();
        assert!(rep.failures.iter().any(|f| f.proposals == 64));
        assert!(rep.failures.iter().all(|f| f.error.contains("bounded-jump")));
        assert!(!rep.cells[0].estimates.is_empty());
    }
}
