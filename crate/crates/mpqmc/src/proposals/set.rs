use nalgebra::DVector;

use super::kernel::{GaussianParams, KernelChoice};
use super::ProposalError;
use crate::par;
use crate::targets::Target;

/// How one iteration's fresh points are generated.
#[derive(Debug, Clone, Copy)]
pub enum ProposalScheme<'a> {
    /// Fresh points drawn from the kernel at the carried point.
    Direct(KernelChoice<'a>),
    /// `z` drawn from `first` at the carried point, fresh points from `second` at `z`.
    Auxiliary { first: KernelChoice<'a>, second: KernelChoice<'a> },
}

impl<'a> ProposalScheme<'a> {
    /// Uniforms consumed to generate `n` points in dimension `d`.
    pub fn uniforms_needed(&self, n: usize, d: usize) -> usize {
        match self {
            ProposalScheme::Direct(_) => n * d,
            ProposalScheme::Auxiliary { .. } => (n + 1) * d,
        }
    }
}

/// The `N+1` points of one iteration. Index 0 is the carried point.
#[derive(Debug, Clone)]
pub struct ProposalSet {
    pub points: Vec<DVector<f64>>,
    pub log_pi: Vec<f64>,
    /// `log kappa(y_j, y_{-j})` for every `j`.
    pub log_kappa: Vec<f64>,
    pub i0: usize,
    /// Auxiliary point, when used.
    pub z: Option<DVector<f64>>,
}

impl ProposalSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `log pi(y_j) + log kappa(y_j, y_{-j})`.
    pub fn log_masses(&self) -> Vec<f64> {
        self.log_pi
            .iter()
            .zip(&self.log_kappa)
            .map(|(a, b)| {
                let v = a + b;
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            })
            .collect()
    }
}

/// Maps consecutive `d`-blocks of `u` through `params`.
pub fn propose_batch(params: &GaussianParams, u: &[f64]) -> Result<Vec<DVector<f64>>, ProposalError> {
    let d = params.dim();
    if !u.len().is_multiple_of(d) {
        return Err(ProposalError::DimensionMismatch { expected: d, got: u.len() % d });
    }
    u.chunks_exact(d).map(|b| params.sample(b)).collect()
}

/// `z`, the fresh points, and the parameters they came from.
pub type AuxiliaryDraw = (DVector<f64>, Vec<DVector<f64>>, GaussianParams);

/// Draws `z` from `first` at `carried` with the leading `d` uniforms, then the
/// fresh points from `second` at `z`. Returns `z`, the fresh points, and the
/// parameters they were drawn from.
pub fn auxiliary_state_batch(
    first: KernelChoice<'_>,
    second: KernelChoice<'_>,
    target: &dyn Target,
    carried: &DVector<f64>,
    u: &[f64],
) -> Result<AuxiliaryDraw, ProposalError> {
    let d = carried.len();
    if u.len() < d {
        return Err(ProposalError::DimensionMismatch { expected: d, got: u.len() });
    }
    let z = first.params_at(target, carried)?.sample(&u[..d])?;
    let params = second.params_at(target, &z)?;
    let ys = propose_batch(&params, &u[d..])?;
    Ok((z, ys, params))
}

/// `log kappa(from, to_set)` for a kernel that factorizes over the points.
pub fn kernel_logdensity(
    kernel: KernelChoice<'_>,
    target: &dyn Target,
    from: &DVector<f64>,
    to_set: &[DVector<f64>],
) -> Result<f64, ProposalError> {
    let p = kernel.params_at(target, from)?;
    Ok(to_set.iter().map(|y| p.log_density(y)).sum())
}

/// `out[j] = sum_{k != j} v[k]` via prefix and suffix sums (no cancellation).
fn leave_one_out(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut prefix = vec![0.0; n + 1];
    for k in 0..n {
        prefix[k + 1] = prefix[k] + v[k];
    }
    let mut suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + v[k];
    }
    (0..n).map(|j| prefix[j] + suffix[j + 1]).collect()
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Parameters the fresh points are drawn from, given the scheme.
pub fn fresh_params(
    scheme: &ProposalScheme<'_>,
    target: &dyn Target,
    carried: &DVector<f64>,
    u: &[f64],
) -> Result<(Option<DVector<f64>>, GaussianParams), ProposalError> {
    match scheme {
        ProposalScheme::Direct(k) => Ok((None, k.params_at(target, carried)?)),
        ProposalScheme::Auxiliary { first, second } => {
            let d = carried.len();
            let z = first.params_at(target, carried)?.sample(&u[..d])?;
            let p = second.params_at(target, &z)?;
            Ok((Some(z), p))
        }
    }
}

/// Evaluates target and kernel terms for `carried` plus the fresh points.
pub fn build_proposal_set(
    scheme: &ProposalScheme<'_>,
    target: &dyn Target,
    carried: &DVector<f64>,
    carried_log_pi: f64,
    z: Option<DVector<f64>>,
    fresh: Vec<DVector<f64>>,
) -> Result<ProposalSet, ProposalError> {
    let mut points = Vec::with_capacity(fresh.len() + 1);
    points.push(carried.clone());
    points.extend(fresh);
    let evals = par::map_range(points.len() - 1, |j| sanitize(target.log_density(&points[j + 1])));
    let mut log_pi = Vec::with_capacity(points.len());
    log_pi.push(carried_log_pi);
    log_pi.extend(evals);

    let log_kappa = match scheme {
        ProposalScheme::Direct(k) if !k.depends_on_from() => {
            let p = k.params_at(target, carried)?;
            let lq: Vec<f64> = par::map_slice(&points, |y| p.log_density(y));
            leave_one_out(&lq)
        }
        ProposalScheme::Direct(k) => {
            let rows: Vec<Result<f64, ProposalError>> = par::map_range(points.len(), |j| {
                if log_pi[j] == f64::NEG_INFINITY {
                    return Ok(f64::NEG_INFINITY);
                }
                let p = k.params_at(target, &points[j])?;
                Ok(points
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .map(|(_, y)| p.log_density(y))
                    .sum())
            });
            rows.into_iter().collect::<Result<Vec<_>, _>>()?
        }
        ProposalScheme::Auxiliary { first, second } => {
            let z = z.as_ref().ok_or(ProposalError::DimensionMismatch { expected: 1, got: 0 })?;
            let p2 = second.params_at(target, z)?;
            let lq2: Vec<f64> = par::map_slice(&points, |y| p2.log_density(y));
            let rest = leave_one_out(&lq2);
            let back: Vec<Result<f64, ProposalError>> = if first.depends_on_from() {
                par::map_range(points.len(), |j| {
                    if log_pi[j] == f64::NEG_INFINITY {
                        return Ok(f64::NEG_INFINITY);
                    }
                    Ok(first.params_at(target, &points[j])?.log_density(z))
                })
            } else {
                let v = first.params_at(target, carried)?.log_density(z);
                vec![Ok(v); points.len()]
            };
            let back = back.into_iter().collect::<Result<Vec<_>, _>>()?;
            back.iter().zip(&rest).map(|(a, b)| a + b).collect()
        }
    };
    let log_kappa = log_kappa.into_iter().map(sanitize).collect();
    Ok(ProposalSet { points, log_pi, log_kappa, i0: 0, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driving::UniformStream;
    use crate::proposals::{GaussianKernel, KernelChoice};
    use crate::targets::GaussianTarget;
    use nalgebra::DMatrix;

    fn uniforms(n: usize, seed: u64) -> Vec<f64> {
        UniformStream::pseudo_random(seed).prefix(n)
    }

    #[test]
    fn independent_kernel_ignores_from() {
        let k = GaussianKernel::independent(DVector::zeros(2), DMatrix::identity(2, 2) * 2.0).unwrap();
        let t = GaussianTarget::standard(2);
        let pts: Vec<_> = uniforms(6, 1).chunks(2).map(DVector::from_row_slice).collect();
        let a = kernel_logdensity(KernelChoice::plain(&k), &t, &DVector::zeros(2), &pts).unwrap();
        let b = kernel_logdensity(KernelChoice::plain(&k), &t, &DVector::from_element(2, 9.0), &pts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn joint_equals_product_of_marginals() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 2.0]);
        let k = GaussianKernel::random_walk(cov.clone()).unwrap();
        let t = GaussianTarget::standard(2);
        let from = DVector::from_vec(vec![0.3, -0.2]);
        let p = k.params_at(&t, &from).unwrap();
        let pts = propose_batch(&p, &uniforms(8, 2)).unwrap();
        let joint = kernel_logdensity(KernelChoice::plain(&k), &t, &from, &pts).unwrap();
        // Stack the four points as one 8-d Gaussian with block-diagonal covariance.
        let mut big = DMatrix::zeros(8, 8);
        let mut mean = DVector::zeros(8);
        let mut y = DVector::zeros(8);
        for (b, p) in pts.iter().enumerate() {
            big.view_mut((2 * b, 2 * b), (2, 2)).copy_from(&cov);
            mean.rows_mut(2 * b, 2).copy_from(&from);
            y.rows_mut(2 * b, 2).copy_from(p);
        }
        let stacked = GaussianTarget::new(mean, big).unwrap().log_density(&y);
        assert!((joint - stacked).abs() < 1e-12);
    }

    #[test]
    fn identical_inputs_identical_proposals() {
        let k1 = GaussianKernel::random_walk(DMatrix::identity(1, 1)).unwrap();
        let k2 = GaussianKernel::random_walk(DMatrix::identity(1, 1)).unwrap();
        let t = GaussianTarget::standard(1);
        let c = DVector::from_element(1, 0.2);
        let u = uniforms(5, 3);
        let a = propose_batch(&k1.params_at(&t, &c).unwrap(), &u).unwrap();
        let b = propose_batch(&k2.params_at(&t, &c).unwrap(), &u).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn auxiliary_midpoint_gives_kernel_mean() {
        let mean = DVector::from_vec(vec![1.0, -1.0]);
        let k = GaussianKernel::independent(mean.clone(), DMatrix::identity(2, 2)).unwrap();
        let t = GaussianTarget::standard(2);
        let mut u = vec![0.5, 0.5];
        u.extend(uniforms(6, 4));
        let (z, ys, _) =
            auxiliary_state_batch(KernelChoice::plain(&k), KernelChoice::plain(&k), &t, &DVector::zeros(2), &u).unwrap();
        assert_eq!(z, mean);
        assert_eq!(ys.len(), 3);
    }

    #[test]
    fn auxiliary_symmetric_kernel_reduces_to_target_ratio() {
        let k = GaussianKernel::random_walk(DMatrix::identity(2, 2) * 0.5).unwrap();
        let t = GaussianTarget::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0])).unwrap();
        let carried = DVector::from_vec(vec![0.1, 0.4]);
        let scheme = ProposalScheme::Auxiliary { first: KernelChoice::plain(&k), second: KernelChoice::plain(&k) };
        let u = uniforms(scheme.uniforms_needed(5, 2), 5);
        let (z, ys, _) = auxiliary_state_batch(KernelChoice::plain(&k), KernelChoice::plain(&k), &t, &carried, &u).unwrap();
        let set = build_proposal_set(&scheme, &t, &carried, t.log_density(&carried), Some(z), ys).unwrap();
        let m = set.log_masses();
        for j in 1..m.len() {
            let lhs = m[j] - m[0];
            let rhs = set.log_pi[j] - set.log_pi[0];
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn auxiliary_single_proposal_is_two_step_walk() {
        let k = GaussianKernel::random_walk(DMatrix::identity(1, 1)).unwrap();
        let t = GaussianTarget::standard(1);
        let c = DVector::from_element(1, 0.0);
        let u = [0.8413447460685429, 0.8413447460685429]; // Phi(1)
        let (z, ys, _) = auxiliary_state_batch(KernelChoice::plain(&k), KernelChoice::plain(&k), &t, &c, &u).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-9);
        assert!((ys[0][0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn set_caches_match_fresh_evaluation() {
        let k = GaussianKernel::random_walk(DMatrix::identity(2, 2)).unwrap();
        let t = GaussianTarget::standard(2);
        let carried = DVector::from_vec(vec![0.5, 0.5]);
        let p = k.params_at(&t, &carried).unwrap();
        let ys = propose_batch(&p, &uniforms(8, 6)).unwrap();
        let scheme = ProposalScheme::Direct(KernelChoice::plain(&k));
        let set = build_proposal_set(&scheme, &t, &carried, t.log_density(&carried), None, ys).unwrap();
        assert_eq!(set.len(), 5);
        for j in 0..5 {
            assert_eq!(set.log_pi[j], t.log_density(&set.points[j]));
            let others: Vec<_> = (0..5).filter(|&k| k != j).map(|k| set.points[k].clone()).collect();
            let direct = kernel_logdensity(KernelChoice::plain(&k), &t, &set.points[j], &others).unwrap();
            assert!((set.log_kappa[j] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn leave_one_out_sums() {
        assert_eq!(leave_one_out(&[1.0, 2.0, 4.0]), vec![6.0, 5.0, 3.0]);
        assert_eq!(leave_one_out(&[3.0]), vec![0.0]);
    }
}
