//! Linear nonautonomous delay and cyclic systems: fundamental solutions,
//! exponential decay fits, and the bounded entire solutions driven by a
//! nonnegative forcing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldModel, VectorField, Verdict};
use crate::models::{LinearCyclicField, LinearDelayField};
use crate::quad::{cells, dedup_sorted, gauss8};
use crate::signal::CoefficientSignal;
use crate::solver::{solve_dde_pulse, solve_ode, SolveOptions, Status, TrajectorySegment};

/// Spacing of the samples kept by a fundamental solution.
pub const SAMPLE_STEP: f64 = 1.0 / 16.0;

/// `U(s + tau, s)` for `tau` in [0, horizon], sampled every
/// [`SAMPLE_STEP`]. Matrices are stored row-major; column `j` is the
/// response to the unit vector `e_j`.
#[derive(Clone, Debug)]
pub struct FundamentalSolution {
    pub s: f64,
    pub dim: usize,
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    columns: Vec<TrajectorySegment>,
}

impl FundamentalSolution {
    fn from_columns(s: f64, horizon: f64, columns: Vec<TrajectorySegment>, offset: f64) -> Result<Self> {
        let dim = columns.len();
        for c in &columns {
            if let Status::BlewUp { at } = c.status() {
                return Err(Error::BlowUp { at: at + offset });
            }
        }
        let n = (horizon / SAMPLE_STEP).floor() as usize;
        let taus: Vec<f64> = (0..=n).map(|i| i as f64 * SAMPLE_STEP).collect();
        let mut values = vec![0.0; taus.len() * dim * dim];
        for (i, &tau) in taus.iter().enumerate() {
            for (j, c) in columns.iter().enumerate() {
                let v = c.value(tau + c.t0())?;
                for r in 0..dim {
                    values[i * dim * dim + r * dim + j] = v[r];
                }
            }
        }
        Ok(FundamentalSolution { s, dim, taus, values, columns })
    }

    pub fn horizon(&self) -> f64 {
        *self.taus.last().unwrap()
    }

    /// Matrix at sample `i`.
    pub fn matrix(&self, i: usize) -> &[f64] {
        let d2 = self.dim * self.dim;
        &self.values[i * d2..(i + 1) * d2]
    }

    /// Max-row-sum norm at sample `i`.
    pub fn norm(&self, i: usize) -> f64 {
        let m = self.matrix(i);
        (0..self.dim).map(|r| (0..self.dim).map(|c| m[r * self.dim + c].abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// `U(s + tau, s)` at any `tau` in [0, horizon] (dense output).
    pub fn at(&self, tau: f64) -> Result<Vec<f64>> {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for (j, c) in self.columns.iter().enumerate() {
            let v = c.value(tau + c.t0())?;
            for r in 0..d {
                out[r * d + j] = v[r];
            }
        }
        Ok(out)
    }
}

/// Fundamental solution of `z' = -alpha z + beta z(t-1)` started at time
/// `s`: zero before `s` and one at `s`.
pub fn fundamental_scalar_delay(
    alpha: &CoefficientSignal,
    beta: &CoefficientSignal,
    s: f64,
    horizon: f64,
    opts: &SolveOptions,
) -> Result<FundamentalSolution> {
    let f = VectorField::new(LinearDelayField::homogeneous(alpha.clone(), beta.clone())).translate(s);
    let seg = solve_dde_pulse(&f, &[1.0], horizon, opts)?;
    FundamentalSolution::from_columns(s, horizon, vec![seg], s)
}

/// Fundamental matrix of `z1' = beta z_m - alpha_1 z1`,
/// `z_i' = z_{i-1} - alpha_i z_i`, started at the identity at time `s`.
pub fn fundamental_matrix_ode(
    alphas: &[CoefficientSignal],
    beta: &CoefficientSignal,
    s: f64,
    horizon: f64,
    opts: &SolveOptions,
) -> Result<FundamentalSolution> {
    let m = alphas.len();
    if m < 2 {
        return Err(Error::InvalidModel(format!("cyclic system needs m >= 2 stages, got {m}")));
    }
    let f = VectorField::new(LinearCyclicField { alphas: alphas.to_vec(), beta: beta.clone(), gamma: CoefficientSignal::constant(0.0) });
    let mut cols = Vec::with_capacity(m);
    for j in 0..m {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        cols.push(solve_ode(&f, s, &e, s + horizon, opts)?);
    }
    FundamentalSolution::from_columns(s, horizon, cols, 0.0)
}

/// Exponential bound `|U(s + tau, s)| <= K exp(-delta tau)` fitted to one
/// fundamental solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    pub k: f64,
    pub delta: f64,
    /// Root-mean-square misfit of the log envelope on the fitted tail.
    pub residual: f64,
    pub verdict: Verdict,
    /// Time of the largest norm on the tail when no decay was found.
    pub witness: Option<f64>,
}

/// Fits `log` of the decreasing envelope `max_{tau' >= tau} |U|` by a
/// line on the second half of the horizon; `delta` is minus the slope and
/// `K` is the smallest constant making the bound hold at every sample.
pub fn fit_decay(u: &FundamentalSolution) -> DecayEstimate {
    let n = u.taus.len();
    let norms: Vec<f64> = (0..n).map(|i| u.norm(i)).collect();
    if norms.iter().any(|v| !v.is_finite()) || n < 4 {
        return DecayEstimate { k: f64::INFINITY, delta: 0.0, residual: f64::NAN, verdict: Verdict::Fail, witness: None };
    }
    let mut env = norms.clone();
    for i in (0..n - 1).rev() {
        env[i] = env[i].max(env[i + 1]);
    }
    let start = n / 2;
    let pts: Vec<(f64, f64)> = (start..n).map(|i| (u.taus[i], env[i].max(1e-300).ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum::<f64>() / m).sqrt();
    let delta = -slope;
    if !(delta > 1e-6) {
        let w = (start..n).max_by(|&a, &b| norms[a].partial_cmp(&norms[b]).unwrap()).map(|i| u.s + u.taus[i]);
        return DecayEstimate { k: f64::INFINITY, delta, residual, verdict: Verdict::Fail, witness: w };
    }
    let k = (0..n).map(|i| norms[i] * (delta * u.taus[i]).exp()).fold(1.0, f64::max);
    DecayEstimate { k, delta, residual, verdict: Verdict::Pass, witness: None }
}

/// `W(sigma) = U(t, t - sigma)` solves the reflected delay equation
/// `W'(sigma) = -alpha(t - sigma) W(sigma) + beta(t - sigma + 1) W(sigma - 1)`
/// from the pulse initial condition.
struct ReflectedDelayField {
    alpha: CoefficientSignal,
    beta: CoefficientSignal,
    gamma: CoefficientSignal,
    t: f64,
}

impl FieldModel for ReflectedDelayField {
    fn dim(&self) -> usize {
        1
    }
    fn delayed(&self) -> bool {
        true
    }
    fn eval(&self, sigma: f64, anchor: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        let t = self.t;
        out[0] = -self.alpha.value_in(t - sigma, t - anchor) * x[0] + self.beta.value_in(t + 1.0 - sigma, t + 1.0 - anchor) * y[0];
    }
    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let t = self.t;
        let mut v: Vec<f64> = self.alpha.breakpoints(t - b, t - a).into_iter().map(|p| t - p).collect();
        v.extend(self.gamma.breakpoints(t - b, t - a).into_iter().map(|p| t - p));
        v.extend(self.beta.breakpoints(t + 1.0 - b, t + 1.0 - a).into_iter().map(|p| t + 1.0 - p));
        v.retain(|p| *p >= a && *p <= b);
        v.sort_by(|p, q| p.partial_cmp(q).unwrap());
        dedup_sorted(v, 1e-12)
    }
    fn label(&self) -> String {
        "reflected-linear-delay".into()
    }
}

/// Truncation length `tau` with
/// `K C exp(-delta tau) e^delta / (e^delta - 1) < eps / 2`, where `C`
/// bounds the forcing over unit windows.
pub fn tail_length(decay: &DecayEstimate, c: f64, eps: f64) -> Result<f64> {
    if !decay.verdict.passed() || !(decay.delta > 0.0) {
        return Err(Error::DecayFailure("no exponential decay available for the tail bound".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidOptions(format!("accuracy must be positive, got {eps}")));
    }
    let d = decay.delta;
    let num = 2.0 * decay.k * c.max(1e-300) * d.exp() / (d.exp() - 1.0);
    Ok((num / eps).ln().max(0.0) / d + 1.0)
}

/// `b~(f_t) = int_{-inf}^t U(t, s) gamma(s) ds`, the value at `t` of the
/// bounded entire solution of `y' = -alpha y + beta y(t-1) + gamma`,
/// computed from the reflected equation and truncated by the decay bound.
pub fn btilde(coef: &LinearDelayField, t: f64, decay: &DecayEstimate, eps: f64, opts: &SolveOptions) -> Result<f64> {
    let (_, c) = coef.gamma.window_integral_range(1.0, t - 64.0, t);
    let tau = tail_length(decay, c, eps)?;
    let tau = (tau / opts.h).ceil() * opts.h;
    let field = VectorField::new(ReflectedDelayField { alpha: coef.alpha.clone(), beta: coef.beta.clone(), gamma: coef.gamma.clone(), t });
    let w = solve_dde_pulse(&field, &[1.0], tau, opts)?;
    if let Status::BlewUp { at } = w.status() {
        return Err(Error::BlowUp { at: t - at });
    }
    let knots = w.knots();
    let mut total = 0.0;
    let mut buf = [0.0];
    for win in knots.windows(2) {
        let (a, b) = (win[0], win[1]);
        let mid = 0.5 * (a + b);
        total += gauss8(a, b, |s, _| {
            w.value_anchored(s, mid, &mut buf);
            buf[0] * coef.gamma.value_in(t - s, t - mid)
        });
    }
    Ok(total)
}

/// `a~(f_t) = int_{-inf}^t exp(-int_s^t alpha) h0(s) ds`. Requires a
/// positive lower bound on `alpha` for the tail estimate.
pub fn atilde(alpha: &CoefficientSignal, h0: &CoefficientSignal, t: f64, eps: f64) -> Result<f64> {
    let a = alpha.lower_bound();
    if !(a > 0.0) {
        return Err(Error::DecayFailure("alpha has no positive lower bound".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidOptions(format!("accuracy must be positive, got {eps}")));
    }
    let (_, c) = h0.window_integral_range(1.0, t - 64.0, t);
    let tau = ((2.0 * c.max(1e-300) / ((1.0 - (-a).exp()) * eps)).ln() / a).max(0.0) + 1.0;
    let lo = t - tau;
    let mut bps = alpha.breakpoints(lo, t);
    bps.extend(h0.breakpoints(lo, t));
    bps.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let bps = dedup_sorted(bps, 1e-12);
    let cs = cells(lo, t, &bps, 1.0 / 16.0);
    // integral of alpha from the right end of each cell to t
    let mut right = vec![0.0; cs.len()];
    let mut acc = 0.0;
    for i in (0..cs.len()).rev() {
        right[i] = acc;
        acc += alpha.integral(cs[i].0, cs[i].1);
    }
    let mut total = 0.0;
    for (i, &(p, q)) in cs.iter().enumerate() {
        let mid = 0.5 * (p + q);
        total += gauss8(p, q, |s, _| (-(alpha.integral(s, q) + right[i])).exp() * h0.value_in(s, mid));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(v: f64) -> CoefficientSignal {
        CoefficientSignal::constant(v)
    }

    #[test]
    fn pure_decay_fit_is_exact() {
        let u = fundamental_scalar_delay(&c(1.0), &c(0.0), 0.0, 30.0, &SolveOptions::default()).unwrap();
        let d = fit_decay(&u);
        assert!(d.verdict.passed());
        assert_abs_diff_eq!(d.delta, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(d.k, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn unstable_delay_fails() {
        let u = fundamental_scalar_delay(&c(1.0), &c(2.0), 0.0, 30.0, &SolveOptions::default()).unwrap();
        let d = fit_decay(&u);
        assert!(!d.verdict.passed());
        assert!(d.witness.is_some());
    }

    #[test]
    fn btilde_constant_coefficients() {
        let opts = SolveOptions::default();
        let coef = LinearDelayField { alpha: c(1.0), beta: c(0.25), gamma: c(1.0) };
        let u = fundamental_scalar_delay(&coef.alpha, &coef.beta, 0.0, 30.0, &opts).unwrap();
        let d = fit_decay(&u);
        let b = btilde(&coef, 0.0, &d, 1e-9, &opts).unwrap();
        assert_abs_diff_eq!(b, 4.0 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn atilde_matches_closed_forms() {
        assert_abs_diff_eq!(atilde(&c(1.0), &c(1.0), 0.0, 1e-12).unwrap(), 1.0, epsilon = 1e-10);
        let pulses = CoefficientSignal::cells(1.0, &[1.0, 0.0]).unwrap();
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(atilde(&c(1.0), &pulses, 0.0, 1e-12).unwrap(), 1.0 / (e + 1.0), epsilon = 1e-10);
        assert!(atilde(&c(0.0), &c(1.0), 0.0, 1e-6).is_err());
    }
}
