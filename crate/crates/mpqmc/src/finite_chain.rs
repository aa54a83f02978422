//! Transition laws over the `N+1` proposal indices of one iteration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::proposals::ProposalSet;

/// Largest state count accepted by the Tjelmeland construction.
pub const TJELMELAND_MAX_STATES: usize = 129;

const DRIFT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("every proposal has zero target mass")]
    AllZeroMass,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("{0} states exceed the construction limit of {TJELMELAND_MAX_STATES}")]
    TooManyStates(usize),
    #[error("row {row} drifted by {drift:e} from stochasticity")]
    Drift { row: usize, drift: f64 },
}

/// Which transition matrix drives the index chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// Every row equals the stationary weights.
    #[default]
    Barker,
    Peskun,
    SuwaTodo,
    Tjelmeland,
}

/// Probabilities over proposal indices.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexWeights {
    pub w: Vec<f64>,
}

impl IndexWeights {
    pub fn new(w: Vec<f64>) -> Result<Self, ChainError> {
        if w.is_empty() {
            return Err(ChainError::InvalidWeights("empty".into()));
        }
        if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(ChainError::InvalidWeights("negative or non-finite entry".into()));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(ChainError::InvalidWeights(format!("sum {s}")));
        }
        Ok(IndexWeights { w })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Row-stochastic `(N+1) x (N+1)` matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    a: Vec<f64>,
    pub construction: Construction,
}

impl TransitionMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    /// `sum_i w_i A(i,i)`.
    pub fn weighted_rejection(&self, w: &IndexWeights) -> f64 {
        (0..self.n).map(|i| w.w[i] * self.get(i, i)).sum()
    }

    fn finalize(n: usize, mut a: Vec<f64>, construction: Construction) -> Result<Self, ChainError> {
        for row in 0..n {
            let r = &mut a[row * n..(row + 1) * n];
            for v in r.iter_mut() {
                if *v < 0.0 {
                    if *v < -DRIFT_TOL {
                        return Err(ChainError::Drift { row, drift: *v });
                    }
                    *v = 0.0;
                }
            }
            let s: f64 = r.iter().sum();
            let drift = s - 1.0;
            if drift.abs() > DRIFT_TOL {
                return Err(ChainError::Drift { row, drift });
            }
            if drift != 0.0 {
                r.iter_mut().for_each(|v| *v /= s);
            }
        }
        Ok(TransitionMatrix { n, a, construction })
    }
}

/// Normalizes log masses with the log-sum-exp shift.
pub fn weights_from_log_masses(log_masses: &[f64]) -> Result<IndexWeights, ChainError> {
    let max = log_masses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(ChainError::AllZeroMass);
    }
    if max == f64::INFINITY {
        return Err(ChainError::InvalidWeights("infinite log mass".into()));
    }
    let e: Vec<f64> = log_masses.iter().map(|&m| (m - max).exp()).collect();
    let s: f64 = e.iter().sum();
    Ok(IndexWeights { w: e.into_iter().map(|v| v / s).collect() })
}

/// `w_j` proportional to `pi(y_j) kappa(y_j, y_{-j})`.
pub fn stationary_weights(ps: &ProposalSet) -> Result<IndexWeights, ChainError> {
    weights_from_log_masses(&ps.log_masses())
}

/// Independent draws from the stationary weights at every step.
pub fn barker_matrix(w: &IndexWeights) -> TransitionMatrix {
    let n = w.len();
    let a = (0..n).flat_map(|_| w.w.iter().copied()).collect();
    TransitionMatrix { n, a, construction: Construction::Barker }
}

/// `A(i,j) = min(1, R(i,j)) / N` off the diagonal, from log masses.
pub fn peskun_from_log_masses(log_masses: &[f64]) -> Result<TransitionMatrix, ChainError> {
    let n = log_masses.len();
    if log_masses.iter().all(|&m| m == f64::NEG_INFINITY || m.is_nan()) {
        return Err(ChainError::AllZeroMass);
    }
    if n == 1 {
        return TransitionMatrix::finalize(1, vec![1.0], Construction::Peskun);
    }
    let inv = 1.0 / (n - 1) as f64;
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let (mi, mj) = (log_masses[i], log_masses[j]);
            let r = if mj == f64::NEG_INFINITY {
                0.0
            } else if mi == f64::NEG_INFINITY {
                1.0
            } else {
                (mj - mi).exp().min(1.0)
            };
            a[i * n + j] = inv * r;
            off += inv * r;
        }
        a[i * n + i] = (1.0 - off).max(0.0);
    }
    TransitionMatrix::finalize(n, a, Construction::Peskun)
}

pub fn peskun_matrix(ps: &ProposalSet) -> Result<TransitionMatrix, ChainError> {
    peskun_from_log_masses(&ps.log_masses())
}

/// Interval overlap on `[0, len)`.
fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Suwa-Todo allocation: states sorted by descending weight are laid end to
/// end on a circle of circumference 1 and every state's mass flows to the arc
/// obtained by rotating its own arc by `w_max`.
pub fn suwa_todo_matrix(w: &IndexWeights) -> Result<TransitionMatrix, ChainError> {
    let n = w.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| w.w[b].total_cmp(&w.w[a]).then(a.cmp(&b)));
    let mut start = vec![0.0; n];
    let mut end = vec![0.0; n];
    let mut acc = 0.0;
    for &s in &order {
        start[s] = acc;
        acc += w.w[s];
        end[s] = acc;
    }
    let circ = acc;
    let shift = w.w[order[0]];
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        if w.w[i] == 0.0 {
            a[i * n..(i + 1) * n].copy_from_slice(&w.w);
            continue;
        }
        let (s0, s1) = (start[i] + shift, end[i] + shift);
        // pieces of the rotated arc inside [0, circ)
        let pieces: [(f64, f64); 2] = if s0 >= circ {
            [(s0 - circ, s1 - circ), (0.0, 0.0)]
        } else if s1 > circ {
            [(s0, circ), (0.0, s1 - circ)]
        } else {
            [(s0, s1), (0.0, 0.0)]
        };
        // the arcs tile the circle, so the overlaps add up to the rotated arc's
        // computed length; dividing by that keeps rows stochastic for tiny w_i
        let len: f64 = pieces.iter().map(|&(p0, p1)| p1 - p0).sum();
        if len <= 0.0 {
            // w_i is below the resolution of the cumulative sums: the arc is a
            // point, so all of the row goes to the state containing it
            let p = pieces[0].0;
            let j = order
                .iter()
                .copied()
                .filter(|&s| w.w[s] > 0.0)
                .find(|&s| end[s] > p)
                .unwrap_or(order[0]);
            a[i * n + j] = 1.0;
            continue;
        }
        for j in 0..n {
            let v: f64 = pieces.iter().map(|&(p0, p1)| overlap(p0, p1, start[j], end[j])).sum();
            a[i * n + j] = v / len;
        }
    }
    TransitionMatrix::finalize(n, a, Construction::SuwaTodo)
}

/// Reversible matrix obtained from the stationary one by moving diagonal mass
/// off the diagonal in symmetric pairs, visiting pairs `i < j` in
/// lexicographic order. At most one diagonal entry stays positive.
pub fn tjelmeland_optimized_matrix(w: &IndexWeights) -> Result<TransitionMatrix, ChainError> {
    let n = w.len();
    if n > TJELMELAND_MAX_STATES {
        return Err(ChainError::TooManyStates(n));
    }
    let mut a: Vec<f64> = (0..n).flat_map(|_| w.w.iter().copied()).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let (fi, fj) = (w.w[i] * a[i * n + i], w.w[j] * a[j * n + j]);
            if fi <= 0.0 || fj <= 0.0 {
                continue;
            }
            let delta = fi.min(fj);
            a[i * n + j] += delta / w.w[i];
            a[j * n + i] += delta / w.w[j];
            if fi <= fj {
                a[i * n + i] = 0.0;
                a[j * n + j] = (fj - delta) / w.w[j];
            } else {
                a[j * n + j] = 0.0;
                a[i * n + i] = (fi - delta) / w.w[i];
            }
            if a[i * n + i] == 0.0 {
                break;
            }
        }
    }
    TransitionMatrix::finalize(n, a, Construction::Tjelmeland)
}

/// Builds the configured matrix from log masses.
pub fn transition_matrix(construction: Construction, log_masses: &[f64]) -> Result<TransitionMatrix, ChainError> {
    match construction {
        Construction::Peskun => peskun_from_log_masses(log_masses),
        c => {
            let w = weights_from_log_masses(log_masses)?;
            match c {
                Construction::Barker => Ok(barker_matrix(&w)),
                Construction::SuwaTodo => suwa_todo_matrix(&w),
                _ => tjelmeland_optimized_matrix(&w),
            }
        }
    }
}

/// First `j` with `u <= gamma_j` for the cumulative sums `gamma`.
pub fn sample_index(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (j, &pj) in p.iter().enumerate() {
        acc += pj;
        if pj > 0.0 && u <= acc {
            return j;
        }
    }
    p.iter().rposition(|&v| v > 0.0).unwrap_or(p.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driving::UniformStream;

    fn w(v: &[f64]) -> IndexWeights {
        IndexWeights::new(v.to_vec()).unwrap()
    }

    fn balance_error(a: &TransitionMatrix, w: &IndexWeights) -> f64 {
        (0..a.size())
            .map(|j| ((0..a.size()).map(|i| w.w[i] * a.get(i, j)).sum::<f64>() - w.w[j]).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn equal_masses_uniform() {
        let iw = weights_from_log_masses(&[-3.0; 4]).unwrap();
        assert!(iw.w.iter().all(|&v| (v - 0.25).abs() < 1e-16));
    }

    #[test]
    fn direct_normalization() {
        let iw = weights_from_log_masses(&[0.0, 2f64.ln(), 3f64.ln()]).unwrap();
        for (a, b) in iw.w.iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn two_states_barker() {
        // w_2 = pi2 k2 / (pi1 k1 + pi2 k2), Barker's acceptance probability
        let iw = weights_from_log_masses(&[0.0, 0.5]).unwrap();
        let r = 0.5f64.exp();
        assert!((iw.w[1] - r / (1.0 + r)).abs() < 1e-15);
    }

    #[test]
    fn wide_log_range_normalized() {
        let iw = weights_from_log_masses(&[-600.0, 0.0, -300.0, f64::NEG_INFINITY]).unwrap();
        assert!((iw.w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(iw.w[3], 0.0);
        assert_eq!(
            weights_from_log_masses(&[f64::NEG_INFINITY; 3]),
            Err(ChainError::AllZeroMass)
        );
    }

    #[test]
    fn peskun_two_states_swap() {
        let a = peskun_from_log_masses(&[0.0, 0.0]).unwrap();
        assert_eq!(a.row(0), &[0.0, 1.0]);
        assert_eq!(a.row(1), &[1.0, 0.0]);
    }

    #[test]
    fn peskun_metropolis() {
        let a = peskun_from_log_masses(&[0.0, -1.0]).unwrap();
        assert!((a.get(0, 1) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(a.get(1, 0), 1.0);
    }

    #[test]
    fn peskun_detailed_balance() {
        let lm = [0.3, -1.2, 0.9, -0.1];
        let a = peskun_from_log_masses(&lm).unwrap();
        let iw = weights_from_log_masses(&lm).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((iw.w[i] * a.get(i, j) - iw.w[j] * a.get(j, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn suwa_todo_uniform_is_rejection_free() {
        let iw = w(&[0.25; 4]);
        let a = suwa_todo_matrix(&iw).unwrap();
        assert_eq!(a.weighted_rejection(&iw), 0.0);
        assert!(balance_error(&a, &iw) < 1e-15);
    }

    #[test]
    fn suwa_todo_minimal_rejection() {
        let iw = w(&[0.1, 0.7, 0.2]);
        let a = suwa_todo_matrix(&iw).unwrap();
        assert!((a.weighted_rejection(&iw) - 0.4).abs() < 1e-15);
        assert!(balance_error(&a, &iw) < 1e-15);
    }

    #[test]
    fn suwa_todo_negligible_weight() {
        let iw = weights_from_log_masses(&[-10.858522701623942, 29.41694437338007]).unwrap();
        let a = suwa_todo_matrix(&iw).unwrap();
        assert_eq!(a.row(0), &[0.0, 1.0]);
        assert!((a.row(1).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(balance_error(&a, &iw) < 1e-15);
    }

    #[test]
    fn suwa_todo_stationary_by_power_iteration() {
        let iw = w(&[0.05, 0.3, 0.15, 0.2, 0.3]);
        let a = suwa_todo_matrix(&iw).unwrap();
        let mut p = vec![1.0 / 5.0; 5];
        for _ in 0..5000 {
            p = (0..5).map(|j| (0..5).map(|i| p[i] * a.get(i, j)).sum()).collect();
        }
        // Suwa-Todo chains can be periodic; average two successive iterates.
        let q: Vec<f64> = (0..5).map(|j| (0..5).map(|i| p[i] * a.get(i, j)).sum()).collect();
        for j in 0..5 {
            assert!(((p[j] + q[j]) / 2.0 - iw.w[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn tjelmeland_properties() {
        let iw = w(&[0.25; 4]);
        let a = tjelmeland_optimized_matrix(&iw).unwrap();
        assert!((0..4).all(|i| a.get(i, i) == 0.0));
        let iw = w(&[0.1, 0.25, 0.05, 0.4, 0.2]);
        let a = tjelmeland_optimized_matrix(&iw).unwrap();
        assert!((0..5).filter(|&i| a.get(i, i) > 0.0).count() <= 1);
        for i in 0..5 {
            for j in 0..5 {
                assert!((iw.w[i] * a.get(i, j) - iw.w[j] * a.get(j, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tjelmeland_two_states_is_metropolis() {
        let iw = weights_from_log_masses(&[0.0, -0.7]).unwrap();
        let a = tjelmeland_optimized_matrix(&iw).unwrap();
        assert!((a.get(0, 1) - (-0.7f64).exp()).abs() < 1e-14);
        assert!((a.get(1, 0) - 1.0).abs() < 1e-14);
        let big = IndexWeights::new(vec![1.0 / 130.0; 130]).unwrap_or_else(|_| IndexWeights { w: vec![1.0 / 130.0; 130] });
        assert_eq!(tjelmeland_optimized_matrix(&big), Err(ChainError::TooManyStates(130)));
    }

    #[test]
    fn index_sampling_boundaries() {
        assert_eq!(sample_index(&[0.5, 0.5], 0.5), 0);
        assert_eq!(sample_index(&[0.2, 0.3, 0.5], 0.6), 2);
        assert_eq!(sample_index(&[0.0, 0.4, 0.6], 1e-300), 1);
        assert_eq!(sample_index(&[0.3, 0.7, 0.0], 1.0), 1);
    }

    #[test]
    fn empirical_frequencies_chi_square() {
        let iw = w(&[0.1, 0.2, 0.3, 0.4]);
        let mut s = UniformStream::pseudo_random(99);
        let n = 100_000;
        let mut c = [0usize; 4];
        for _ in 0..n {
            c[sample_index(&iw.w, s.next_uniform().unwrap())] += 1;
        }
        let chi2: f64 = (0..4)
            .map(|j| {
                let e = n as f64 * iw.w[j];
                (c[j] as f64 - e).powi(2) / e
            })
            .sum();
        // 0.999 quantile of chi-square with 3 degrees of freedom
        assert!(chi2 < 16.266, "chi2 = {chi2}");
    }
}
