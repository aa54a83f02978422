use nalgebra::DVector;

use super::engine::Chain;
use super::{SamplerConfig, SamplerError};
use crate::driving::Driver;
use crate::targets::Target;

/// One iteration from `carried` on the tuple `u`; returns the new state and
/// the index it came from.
pub fn coupled_step(
    cfg: &SamplerConfig,
    target: &dyn Target,
    carried: &DVector<f64>,
    u: &[f64],
) -> Result<(DVector<f64>, usize), SamplerError> {
    let mut chain = Chain::new(cfg, target, carried.clone())?;
    let step = chain.step(u, 0)?;
    chain.advance(&step);
    Ok((chain.carried, *step.chosen.last().expect("at least one draw")))
}

/// Outcome of running two chains on shared driving tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    /// First iteration at which both chains picked the same fresh index.
    pub first_common_fresh: Option<usize>,
    /// Whether the states agreed at every iteration after that point.
    pub identical_after: bool,
    /// First iteration after which the states were equal.
    pub coalesced_at: Option<usize>,
}

/// Runs chains from `x` and `y` for `iterations` steps on the same tuples.
pub fn coupling_check(
    cfg: &SamplerConfig,
    target: &dyn Target,
    x: &DVector<f64>,
    y: &DVector<f64>,
    driver: &mut Driver,
    iterations: usize,
) -> Result<CouplingReport, SamplerError> {
    let d = target.dim();
    cfg.validate(d)?;
    let mut a = Chain::new(cfg, target, x.clone())?;
    let mut b = Chain::new(cfg, target, y.clone())?;
    let mut u = vec![0.0; cfg.width(d)];
    let mut report = CouplingReport { first_common_fresh: None, identical_after: true, coalesced_at: None };
    for it in 0..iterations {
        driver.next_tuple(&mut u)?;
        let sa = a.step(&u, it)?;
        let sb = b.step(&u, it)?;
        a.advance(&sa);
        b.advance(&sb);
        let same = a.carried == b.carried;
        if report.first_common_fresh.is_some() && !same {
            report.identical_after = false;
        }
        let (ia, ib) = (*sa.chosen.last().unwrap(), *sb.chosen.last().unwrap());
        if report.first_common_fresh.is_none() && ia == ib && ia != 0 {
            report.first_common_fresh = Some(it);
            report.identical_after &= same;
        }
        if same && report.coalesced_at.is_none() {
            report.coalesced_at = Some(it);
        } else if !same {
            report.coalesced_at = None;
        }
    }
    Ok(report)
}
