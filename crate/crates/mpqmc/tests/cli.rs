use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mpqmc(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mpqmc"));
    cmd.args(args).env_remove("MPQMC_WORKERS").env_remove("MPQMC_OUT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SAMPLE: &str = r#"
[target]
kind = "gaussian"
mean = [1.0, -1.0]
cov = [[1.0, 0.2], [0.2, 0.5]]
[sampler]
proposals = 4
iterations = 300
accepted = 2
seed = 3
transition = "peskun"
[sampler.driving]
kind = "cud_lfsr"
[sampler.kernel]
kind = "random_walk_gaussian"
cov = 0.8
"#;

const EXPERIMENT: &str = r#"
name = "tiny"
replicates = 2
seed = 4
[target]
kind = "gaussian"
mean = [0.5]
cov = [[2.0]]
[sampler]
transition = "barker"
[sampler.kernel]
kind = "independent_gaussian"
mean = [0.5]
cov = 4.0
[grid]
variants = ["is_mp_mcmc", "is_mp_qmcmc"]
proposals = [4]
cud_m = [10, 11, 12]
"#;

#[test]
fn sample_writes_run_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SAMPLE);
    let out = dir.path().join("run");
    let o = mpqmc(&["sample", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("mp_qmcmc on gaussian"));
    let samples = fs::read_to_string(out.join("samples.csv")).unwrap();
    let mut lines = samples.lines();
    assert_eq!(lines.next(), Some("iter,m,coord_0,coord_1"));
    assert_eq!(lines.count(), 300 * 2);
    let diag = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(diag.starts_with("iter,acpt_rate,msjd,"));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["listing"], "mp_qmcmc");
    assert_eq!(meta["target"], "gaussian");
}

#[test]
fn sample_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SAMPLE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(mpqmc(&["sample", "--config", &cfg, "--out", a.to_str().unwrap()], &[]).status.code(), Some(0));
    assert_eq!(
        mpqmc(&["--workers", "2", "sample", "--config", &cfg, "--out", b.to_str().unwrap()], &[]).status.code(),
        Some(0)
    );
    for f in ["samples.csv", "diagnostics.csv", "meta.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn experiment_uses_out_env() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "e.toml", EXPERIMENT);
    let root = dir.path().join("results");
    let o = mpqmc(&["experiment", "--spec", &spec], &[("MPQMC_OUT", root.to_str().unwrap()), ("MPQMC_WORKERS", "1")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let metrics = root.join("tiny").join("metrics.csv");
    let text = fs::read_to_string(&metrics).unwrap();
    assert!(text.starts_with("experiment,n,N,variant,metric,value,stderr"));
    assert!(text.contains("is_mp_qmcmc"));
    assert!(root.join("tiny").join("meta.json").exists());

    let r = mpqmc(&["report", "--metrics", metrics.to_str().unwrap()], &[]);
    assert_eq!(r.status.code(), Some(0));
    assert!(stdout(&r).contains("mse_rate"));
}

#[test]
fn cud_gen_and_check() {
    let o = mpqmc(&["cud", "gen", "--m", "10", "--count", "5", "--seed", "2"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let vals: Vec<f64> = stdout(&o).lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(vals.len(), 5);
    assert!(vals.iter().all(|v| *v > 0.0 && *v < 1.0));

    let full = mpqmc(&["cud", "gen", "--vdc-base", "2", "--count", "4"], &[]);
    let v: Vec<f64> = stdout(&full).lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(v, vec![0.5, 0.25, 0.75, 0.125]);

    let c = mpqmc(&["cud", "check", "--m", "10", "--dim", "2"], &[]);
    assert_eq!(c.status.code(), Some(0));
    let line = stdout(&c);
    assert!(line.contains("dim=2") && line.contains("tuples=511"), "{line}");
    let d: f64 = line.trim().rsplit('=').next().unwrap().parse().unwrap();
    assert!(d > 0.0 && d < 0.05);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", &SAMPLE.replace("proposals = 4", "proposals = 0"));
    let out = dir.path().join("x");
    let o = mpqmc(&["sample", "--config", &bad, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[config]"));

    let unknown = write(dir.path(), "u.toml", &SAMPLE.replace("seed = 3", "seed = 3\nbogus = 1"));
    assert_eq!(mpqmc(&["sample", "--config", &unknown, "--out", out.to_str().unwrap()], &[]).status.code(), Some(1));
    assert_eq!(mpqmc(&["no-such-command"], &[]).status.code(), Some(1));
    assert_eq!(mpqmc(&["cud", "gen", "--m", "10", "--vdc-base", "2"], &[]).status.code(), Some(1));
    assert_eq!(mpqmc(&["cud", "gen", "--m", "10", "--count", "5000"], &[]).status.code(), Some(1));

    let cfg = write(dir.path(), "s.toml", SAMPLE);
    let o = mpqmc(&["sample", "--config", &cfg, "--out", out.to_str().unwrap()], &[("MPQMC_WORKERS", "many")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("MPQMC_WORKERS"));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SAMPLE);
    let blocker = write(dir.path(), "file", "not a directory");
    let out = Path::new(&blocker).join("run");
    let o = mpqmc(&["sample", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[runtime]"));
}

#[test]
fn help_exits_zero() {
    let o = mpqmc(&["--help"], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("experiment"));
}
