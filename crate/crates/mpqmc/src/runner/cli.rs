use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::experiment::run_experiment;
use super::output::{fmt_float, write_run};
use super::spec::{ExperimentSpec, SampleFile};
use super::{RunnerError, ENV_OUT, ENV_WORKERS};
use crate::discrepancy::{nonoverlapping_tuples, overlapping_tuples, star_discrepancy};
use crate::driving::{StreamKind, UniformStream};
use crate::par;
use crate::samplers::{identity, run};

#[derive(Parser, Debug)]
#[command(name = "mpqmc", version, about = "Multiple-proposal MCMC and QMC samplers")]
struct Cli {
    /// Worker threads (default: logical cores, or MPQMC_WORKERS).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Driving-sequence tools.
    Cud {
        #[command(subcommand)]
        command: CudCommand,
    },
    /// Run one sampler from a config file.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment grid.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        /// Output root (default: MPQMC_OUT, else `results`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-run directories.
        #[arg(long)]
        keep_runs: bool,
    },
    /// Summarize a metrics.csv file.
    Report {
        #[arg(long)]
        metrics: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct StreamArgs {
    /// LFSR register size.
    #[arg(long, conflicts_with = "vdc_base")]
    m: Option<u32>,
    /// Van der Corput base instead of an LFSR.
    #[arg(long)]
    vdc_base: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl StreamArgs {
    fn stream(&self) -> Result<UniformStream, RunnerError> {
        let kind = match (self.m, self.vdc_base) {
            (Some(m), None) => StreamKind::CudLfsr { m },
            (None, Some(base)) => StreamKind::VanDerCorput { base },
            _ => return Err(RunnerError::Config("give exactly one of --m and --vdc-base".into())),
        };
        UniformStream::new(kind, self.seed).map_err(|e| RunnerError::Config(e.to_string()))
    }
}

#[derive(Subcommand, Debug)]
enum CudCommand {
    /// Print sequence values, one per line.
    Gen {
        #[command(flatten)]
        stream: StreamArgs,
        /// Number of values (default: one full period).
        #[arg(long)]
        count: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact star discrepancy of `dim`-tuples formed from the sequence.
    Check {
        #[command(flatten)]
        stream: StreamArgs,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Number of scalars used (default: one full period, capped by the point limit).
        #[arg(long)]
        count: Option<usize>,
        /// Sliding windows instead of disjoint blocks.
        #[arg(long)]
        overlapping: bool,
    },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            if code == 0 {
                print!("{e}");
            } else {
                eprintln!("error[config]: {}", e.to_string().trim_start_matches("error: ").trim_end());
            }
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}: {e}", e.prefix());
            e.exit_code()
        }
    }
}

fn workers(flag: Option<usize>) -> Result<Option<usize>, RunnerError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(ENV_WORKERS) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| RunnerError::Config(format!("{ENV_WORKERS}={v} is not a worker count"))),
        Err(_) => Ok(None),
    }
}

fn read(path: &Path) -> Result<String, RunnerError> {
    fs::read_to_string(path).map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))
}

fn execute(cli: Cli) -> Result<(), RunnerError> {
    let w = workers(cli.workers)?;
    par::with_workers(w, move || match cli.command {
        Command::Cud { command } => cud(command),
        Command::Sample { config, out } => sample(&config, &out),
        Command::Experiment { spec, out, keep_runs } => {
            let mut s = ExperimentSpec::from_toml(&read(&spec)?)?;
            s.keep_runs |= keep_runs;
            let root = out
                .or_else(|| std::env::var_os(ENV_OUT).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("results"));
            let rep = run_experiment(&s, Some(&root))?;
            let dir = rep.out_dir.as_ref().expect("root given");
            println!("wrote {}", dir.join("metrics.csv").display());
            if !rep.failures.is_empty() {
                eprintln!("{} replicate(s) failed; see meta.json", rep.failures.len());
            }
            print_summary(&read(&dir.join("metrics.csv"))?)
        }
        Command::Report { metrics } => print_summary(&read(&metrics)?),
    })
}

fn cud(command: CudCommand) -> Result<(), RunnerError> {
    match command {
        CudCommand::Gen { stream, count, out } => {
            let s = stream.stream()?;
            let n = count.or(s.len()).ok_or_else(|| RunnerError::Config("--count is required for unbounded streams".into()))?;
            if let Some(len) = s.len() {
                if n > len {
                    return Err(RunnerError::Config(format!("--count {n} exceeds the period {len}")));
                }
            }
            let mut text = String::with_capacity(n as usize * 24);
            for i in 0..n {
                let v = s.get(i).map_err(|e| RunnerError::Config(e.to_string()))?;
                text.push_str(&fmt_float(v));
                text.push('\n');
            }
            match out {
                Some(p) => fs::write(&p, text).map_err(RunnerError::io(p)),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        CudCommand::Check { stream, dim, count, overlapping } => {
            let s = stream.stream()?;
            let limit = *crate::discrepancy::MAX_POINTS
                .get(dim.wrapping_sub(1))
                .ok_or_else(|| RunnerError::Config(format!("--dim must be 1, 2 or 3, got {dim}")))?;
            let period = s.len().map(|l| l as usize).unwrap_or(usize::MAX);
            let cap = if overlapping { limit + dim - 1 } else { limit * dim };
            let n = count.unwrap_or(period.min(cap)).min(period);
            let vals = s.prefix(n);
            let ps = if overlapping { overlapping_tuples(&vals, dim) } else { nonoverlapping_tuples(&vals, dim) }
                .map_err(|e| RunnerError::Config(e.to_string()))?;
            let dstar = star_discrepancy(&ps).map_err(|e| RunnerError::Config(e.to_string()))?;
            println!(
                "stream={} dim={} tuples={} layout={} star_discrepancy={}",
                s.kind().label(),
                dim,
                ps.len(),
                if overlapping { "overlapping" } else { "non_overlapping" },
                fmt_float(dstar)
            );
            Ok(())
        }
    }
}

fn sample(config: &Path, out: &Path) -> Result<(), RunnerError> {
    let file: SampleFile = toml::from_str(&read(config)?).map_err(|e| RunnerError::Config(e.to_string()))?;
    let built = file.target.build()?;
    let target = built.target.as_ref();
    let res = run(&file.sampler, target, &identity)?;
    write_run(out, &res, &file.sampler, target.name())?;
    let mean: Vec<String> = res.estimate.mu.iter().map(|v| format!("{v:.6}")).collect();
    println!("{} on {}: mean [{}]", res.meta.listing, target.name(), mean.join(", "));
    Ok(())
}

/// Prints rate fits and reductions from a metrics file.
fn print_summary(csv_text: &str) -> Result<(), RunnerError> {
    let mut rd = csv::Reader::from_reader(csv_text.as_bytes());
    let mut lines = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let metric = &rec[4];
        if metric.ends_with("_rate") || metric.ends_with("_reduction") {
            let value: f64 = rec[5].parse().unwrap_or(f64::NAN);
            let se = rec[6].parse::<f64>().map(|s| format!(" ± {s:.3}")).unwrap_or_default();
            let n = if rec[1].is_empty() { "-".to_string() } else { rec[1].to_string() };
            lines.push(format!("{:<22} N={:<5} n={:<8} {:<20} {:.4}{}", &rec[3], &rec[2], n, metric, value, se));
        }
    }
    if lines.is_empty() {
        println!("no rate fits or reductions in metrics");
    }
    for l in lines {
        println!("{l}");
    }
    Ok(())
}
