use std::fs;
use std::path::Path;

use serde::Serialize;

use super::RunnerError;
use crate::samplers::{RunOutput, SamplerConfig};

/// 17 significant digits, dot decimal separator.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<(), RunnerError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| RunnerError::Config(e.to_string()))?;
    fs::write(path, text + "\n").map_err(RunnerError::io(path))
}

#[derive(Serialize)]
struct RunRecord<'a> {
    target: &'a str,
    #[serde(flatten)]
    meta: &'a crate::samplers::RunMeta,
    config: &'a SamplerConfig,
}

/// Writes `samples.csv`, `diagnostics.csv` and `meta.json` into `dir`.
pub fn write_run(dir: &Path, out: &RunOutput, config: &SamplerConfig, target: &str) -> Result<(), RunnerError> {
    fs::create_dir_all(dir).map_err(RunnerError::io(dir))?;
    let d = out.meta.dim;

    let mut w = csv::Writer::from_path(dir.join("samples.csv"))?;
    let mut header = vec!["iter".to_string(), "m".to_string()];
    header.extend((0..d).map(|k| format!("coord_{k}")));
    w.write_record(&header)?;
    let m = out.meta.accepted.max(1);
    for (i, x) in out.samples.iter().enumerate() {
        let mut rec = vec![(i / m).to_string(), (i % m).to_string()];
        rec.extend(x.iter().map(|v| fmt_float(*v)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(RunnerError::io(dir.join("samples.csv")))?;

    let mut w = csv::Writer::from_path(dir.join("diagnostics.csv"))?;
    let fdim = out.estimate.mu.len();
    let mut header: Vec<String> = vec!["iter".into(), "acpt_rate".into(), "msjd".into()];
    header.extend((0..fdim).map(|k| format!("mu_{k}")));
    header.push("trace_Sigma".into());
    header.extend((0..fdim).map(|k| format!("mu_tilde_{k}")));
    header.push("adapt_increment".into());
    w.write_record(&header)?;
    for r in &out.rows {
        let mut rec = vec![r.iter.to_string(), fmt_float(r.acpt_rate), fmt_float(r.msjd)];
        rec.extend(r.mu.iter().map(|v| fmt_float(*v)));
        rec.push(fmt_float(r.trace_sigma));
        rec.extend(r.mu_tilde.iter().map(|v| fmt_float(*v)));
        rec.push(fmt_float(r.adapt_increment));
        w.write_record(&rec)?;
    }
    w.flush().map_err(RunnerError::io(dir.join("diagnostics.csv")))?;

    write_json(&dir.join("meta.json"), &RunRecord { target, meta: &out.meta, config })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(-2.0), "-2.0000000000000000e0");
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -1e-300] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_float(f64::NAN), "NaN");
    }
}
