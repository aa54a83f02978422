//! Seeded synthetic datasets.

use nalgebra::{DMatrix, DVector};

use super::{OdeModel, OdeTarget, TargetError};
use crate::driving::UniformStream;
use crate::proposals::normal::inv_cdf;

/// Dimensions mirroring the five classic logistic-regression benchmarks.
pub const LOGISTIC_DIMS: [usize; 5] = [3, 8, 14, 15, 25];

fn logistic_rows(d: usize) -> usize {
    match d {
        3 => 250,
        8 => 532,
        14 => 270,
        15 => 690,
        25 => 1000,
        _ => 50 * d,
    }
}

struct Normals(UniformStream);

impl Normals {
    fn next(&mut self) -> f64 {
        inv_cdf(self.0.next_uniform().expect("pseudo-random streams are unbounded"))
    }
}

#[derive(Debug, Clone)]
pub struct LinregData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta: DVector<f64>,
}

/// Rows `x_i ~ N(0, S)` with `S_jk = 0.5^|j-k|`, `y = X beta + eps`, `beta = 1`.
pub fn simulate_linreg(d: usize, n: usize, sigma2: f64, seed: u64) -> LinregData {
    let mut z = Normals(UniformStream::pseudo_random(seed));
    let s = DMatrix::from_fn(d, d, |j, k| 0.5f64.powi((j as i32 - k as i32).abs()));
    let l = s.cholesky().expect("AR(1) correlation is SPD").l();
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        let e = DVector::from_iterator(d, (0..d).map(|_| z.next()));
        x.row_mut(i).copy_from(&(&l * e).transpose());
    }
    let beta = DVector::from_element(d, 1.0);
    let sd = sigma2.sqrt();
    let noise = DVector::from_iterator(n, (0..n).map(|_| sd * z.next()));
    let y = &x * &beta + noise;
    LinregData { x, y, beta }
}

#[derive(Debug, Clone)]
pub struct LogisticData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub theta: DVector<f64>,
}

/// Intercept column plus standard normal covariates; `theta_k ~ N(0, 1/d)`.
pub fn simulate_logistic(d: usize, seed: u64) -> LogisticData {
    let n = logistic_rows(d);
    let mut z = Normals(UniformStream::pseudo_random(seed));
    let mut u = UniformStream::pseudo_random(seed.wrapping_add(0x5151));
    let theta = DVector::from_iterator(d, (0..d).map(|_| z.next() / (d as f64).sqrt()));
    let x = DMatrix::from_fn(n, d, |_, j| if j == 0 { 1.0 } else { 0.0 });
    let mut x = x;
    for i in 0..n {
        for j in 1..d {
            x[(i, j)] = z.next();
        }
    }
    let eta = &x * &theta;
    let y = DVector::from_iterator(
        n,
        eta.iter().map(|&e| {
            let p = 1.0 / (1.0 + (-e).exp());
            if u.next_uniform().expect("unbounded") < p {
                1.0
            } else {
                0.0
            }
        }),
    );
    LogisticData { x, y, theta }
}

#[derive(Debug, Clone)]
pub struct OdeData {
    pub model: OdeModel,
    pub params: Vec<f64>,
    pub init: [f64; 2],
    pub times: Vec<f64>,
    pub obs: Vec<[f64; 2]>,
    pub noise_sd: [f64; 2],
}

impl OdeData {
    pub fn target(&self) -> Result<OdeTarget, TargetError> {
        OdeTarget::new(self.model, self.init, self.times.clone(), self.obs.clone(), self.noise_sd)
    }
}

/// Benchmark trajectory observed at `n` equally spaced times in `(0, horizon]`.
pub fn simulate_ode(model: OdeModel, n: usize, seed: u64) -> OdeData {
    let (params, init, horizon, _, sd) = model.benchmark();
    let times: Vec<f64> = (1..=n).map(|k| horizon * k as f64 / n as f64).collect();
    let clean = super::solve_rk4(|_, s| model.rhs(s, &params), init, 0.0, &times, super::ode::substeps_for(&times))
        .expect("benchmark parameters give a finite trajectory");
    let mut z = Normals(UniformStream::pseudo_random(seed));
    let obs = clean
        .iter()
        .map(|s| [s[0] + sd * z.next(), s[1] + sd * z.next()])
        .collect();
    OdeData { model, params, init, times, obs, noise_sd: [sd, sd] }
}
