use nalgebra::DVector;

use super::{Target, TargetError};

/// Two-state ODE models with positive parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeModel {
    /// `u' = a u - b u v`, `v' = c u v - d v`.
    LotkaVolterra,
    /// `u' = g (u - u^3/3 + v)`, `v' = -(u - a + b v) / g`.
    FitzHughNagumo,
}

impl OdeModel {
    pub fn param_dim(&self) -> usize {
        match self {
            OdeModel::LotkaVolterra => 4,
            OdeModel::FitzHughNagumo => 3,
        }
    }

    #[inline]
    pub fn rhs(&self, s: [f64; 2], p: &[f64]) -> [f64; 2] {
        let [u, v] = s;
        match self {
            OdeModel::LotkaVolterra => [p[0] * u - p[1] * u * v, p[2] * u * v - p[3] * v],
            OdeModel::FitzHughNagumo => {
                [p[2] * (u - u * u * u / 3.0 + v), -(u - p[0] + p[1] * v) / p[2]]
            }
        }
    }

    /// Parameters, initial state, time horizon, point count and noise sd of the benchmark.
    pub fn benchmark(&self) -> (Vec<f64>, [f64; 2], f64, usize, f64) {
        match self {
            OdeModel::LotkaVolterra => (vec![1.8, 0.5, 2.5, 1.0], [10.0, 5.0], 8.0, 400, 0.25),
            OdeModel::FitzHughNagumo => (vec![0.5, 0.5, 1.5], [-1.0, 1.0], 2.0, 200, 1.0),
        }
    }
}

/// Classical RK4 from `(t0, init)`, `substeps` equal steps between grid times.
pub fn solve_rk4(
    f: impl Fn(f64, [f64; 2]) -> [f64; 2],
    init: [f64; 2],
    t0: f64,
    times: &[f64],
    substeps: usize,
) -> Result<Vec<[f64; 2]>, TargetError> {
    let axpy = |a: [f64; 2], h: f64, k: [f64; 2]| [a[0] + h * k[0], a[1] + h * k[1]];
    let mut out = Vec::with_capacity(times.len());
    let mut s = init;
    let mut t = t0;
    for &target in times {
        if target < t {
            return Err(TargetError::InvalidParameter("time grid must be increasing".into()));
        }
        let h = (target - t) / substeps as f64;
        for k in 0..substeps {
            let tk = t + k as f64 * h;
            let k1 = f(tk, s);
            let k2 = f(tk + 0.5 * h, axpy(s, 0.5 * h, k1));
            let k3 = f(tk + 0.5 * h, axpy(s, 0.5 * h, k2));
            let k4 = f(tk + h, axpy(s, h, k3));
            s = [
                s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ];
            if !(s[0].is_finite() && s[1].is_finite()) {
                return Err(TargetError::SolverDiverged(tk + h));
            }
        }
        t = target;
        out.push(s);
    }
    Ok(out)
}

/// Posterior over ODE parameters with a Gamma(1, 3) prior on each component
/// and independent Gaussian observation noise.
#[derive(Debug, Clone)]
pub struct OdeTarget {
    model: OdeModel,
    init: [f64; 2],
    times: Vec<f64>,
    obs: Vec<[f64; 2]>,
    noise_sd: [f64; 2],
    substeps: usize,
}

const PRIOR_SCALE: f64 = 3.0;

/// Largest RK4 step used by [`OdeTarget`].
pub const MAX_STEP: f64 = 0.0025;

/// Substeps per observation interval: at least 4, and no step above [`MAX_STEP`].
pub fn substeps_for(times: &[f64]) -> usize {
    let mut prev = 0.0;
    let mut widest = 0.0f64;
    for &t in times {
        widest = widest.max(t - prev);
        prev = t;
    }
    ((widest / MAX_STEP - 1e-9).ceil() as usize).max(4)
}

impl OdeTarget {
    pub fn new(
        model: OdeModel,
        init: [f64; 2],
        times: Vec<f64>,
        obs: Vec<[f64; 2]>,
        noise_sd: [f64; 2],
    ) -> Result<Self, TargetError> {
        if times.len() != obs.len() {
            return Err(TargetError::DimensionMismatch { expected: times.len(), got: obs.len() });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| t < 0.0) {
            return Err(TargetError::InvalidParameter("observation times must be increasing and non-negative".into()));
        }
        if noise_sd.iter().any(|&s| !(s > 0.0)) {
            return Err(TargetError::InvalidParameter("noise sd must be positive".into()));
        }
        let substeps = substeps_for(&times);
        Ok(OdeTarget { model, init, times, obs, noise_sd, substeps })
    }

    pub fn model(&self) -> OdeModel {
        self.model
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn solve(&self, params: &[f64]) -> Result<Vec<[f64; 2]>, TargetError> {
        let m = self.model;
        solve_rk4(|_, s| m.rhs(s, params), self.init, 0.0, &self.times, self.substeps)
    }
}

impl Target for OdeTarget {
    fn dim(&self) -> usize {
        self.model.param_dim()
    }

    fn log_density(&self, theta: &DVector<f64>) -> f64 {
        if theta.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let prior: f64 = theta.iter().map(|&p| -p / PRIOR_SCALE - PRIOR_SCALE.ln()).sum();
        let Ok(traj) = self.solve(theta.as_slice()) else {
            return f64::NEG_INFINITY;
        };
        let norm: f64 = self.noise_sd.iter().map(|s| s.ln() + crate::proposals::normal::LN_SQRT_2PI).sum();
        let mut ll = -(self.obs.len() as f64) * norm;
        for (o, s) in self.obs.iter().zip(&traj) {
            for c in 0..2 {
                let z = (o[c] - s[c]) / self.noise_sd[c];
                ll -= 0.5 * z * z;
            }
        }
        let v = prior + ll;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    fn name(&self) -> &'static str {
        match self.model {
            OdeModel::LotkaVolterra => "lotka_volterra",
            OdeModel::FitzHughNagumo => "fitzhugh_nagumo",
        }
    }
}
