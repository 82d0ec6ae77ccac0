//! Semi-equilibria sampled along the translate orbit of a field, the
//! pullback iteration, its monotone limits, and forward attraction in the
//! part metric.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::linear::{fit_decay, fundamental_matrix_ode, fundamental_scalar_delay, tail_length};
use crate::models::Model;
use crate::phase::History;
use crate::semiflow::solve_checked;
use crate::solver::{solve_dde_pulse, solve_ode, SolveOptions, Status, TrajectorySegment};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Sub,
    Super,
    Candidate,
}

/// `t -> a(f_t)` at `t = t_min + i * step`, each value a history.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumTrace {
    pub kind: TraceKind,
    pub t_min: f64,
    pub step: f64,
    pub values: Vec<History>,
}

impl EquilibriumTrace {
    pub fn new(kind: TraceKind, t_min: f64, step: f64, values: Vec<History>) -> Result<Self> {
        if values.is_empty() || !(step > 0.0) {
            return Err(Error::InvalidOptions("trace needs at least one value and a positive step".into()));
        }
        let (d, m) = (values[0].dim(), values[0].per_unit());
        if values.iter().any(|h| h.dim() != d || h.per_unit() != m) {
            return Err(Error::GridMismatch { left: m, right: values.iter().map(|h| h.per_unit()).find(|&p| p != m).unwrap_or(m) });
        }
        Ok(EquilibriumTrace { kind, t_min, step, values })
    }

    /// The same history at every sampled time.
    pub fn constant(kind: TraceKind, window: (f64, f64), step: f64, value: &History) -> Result<Self> {
        let n = ((window.1 - window.0) / step).round() as usize;
        EquilibriumTrace::new(kind, window.0, step, vec![value.clone(); n + 1])
    }

    pub fn t_max(&self) -> f64 {
        self.t_min + (self.values.len() - 1) as f64 * self.step
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_min + i as f64 * self.step
    }

    pub fn dim(&self) -> usize {
        self.values[0].dim()
    }

    /// Index of sample time `t`, which must lie on the grid.
    pub fn index(&self, t: f64) -> Result<usize> {
        let r = (t - self.t_min) / self.step;
        let i = r.round();
        if (r - i).abs() > 1e-9 || i < 0.0 || i as usize >= self.values.len() {
            return Err(Error::OutOfDomain { t, lo: self.t_min, hi: self.t_max() });
        }
        Ok(i as usize)
    }

    pub fn at(&self, t: f64) -> Result<&History> {
        Ok(&self.values[self.index(t)?])
    }

    /// Restriction to the sample times in [lo, hi].
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<EquilibriumTrace> {
        let i0 = self.index(lo.max(self.t_min))?;
        let i1 = self.index(hi.min(self.t_max()))?;
        EquilibriumTrace::new(self.kind, self.time(i0), self.step, self.values[i0..=i1].to_vec())
    }

    /// `max (self - other)` over shared times, nodes and components.
    pub fn order_excess(&self, other: &EquilibriumTrace) -> Result<f64> {
        let (lo, hi) = (self.t_min.max(other.t_min), self.t_max().min(other.t_max()));
        let mut worst = f64::NEG_INFINITY;
        let mut t = lo;
        while t <= hi + 1e-9 {
            worst = worst.max(self.at(t)?.order_excess(other.at(t)?)?);
            t += self.step;
        }
        Ok(worst)
    }

    /// Sup distance over shared times.
    pub fn sup_distance(&self, other: &EquilibriumTrace) -> Result<f64> {
        let (lo, hi) = (self.t_min.max(other.t_min), self.t_max().min(other.t_max()));
        let mut worst = 0.0f64;
        let mut t = lo;
        while t <= hi + 1e-9 {
            worst = worst.max(self.at(t)?.sup_distance(other.at(t)?)?);
            t += self.step;
        }
        Ok(worst)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().map(|h| h.min_value()).fold(f64::INFINITY, f64::min)
    }

    /// CSV of the current values `a(f_t)(0)`: header `t,x1,...,xN`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for k in 0..self.dim() {
            out.push_str(&format!(",x{}", k + 1));
        }
        out.push('\n');
        for (i, h) in self.values.iter().enumerate() {
            out.push_str(&format!("{:.16e}", self.time(i)));
            for v in h.last() {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Samples of a trajectory of `f` translated by `start` (so that time `t`
/// of the trace is time `t - start` of the solve).
fn trace_from_segment(kind: TraceKind, seg: &TrajectorySegment, start: f64, window: (f64, f64), step: f64) -> Result<EquilibriumTrace> {
    let n = ((window.1 - window.0) / step).round() as usize;
    let values: Vec<History> =
        (0..=n).into_par_iter().map(|i| seg.extract_history(window.0 + i as f64 * step - start)).collect::<Result<_>>()?;
    EquilibriumTrace::new(kind, window.0, step, values)
}

/// `a_tau(f_t) = x_tau(., f_{t - tau}, a(f_{t - tau}))` for every sample
/// time `t` with `t - tau` in the input window.
pub fn pullback_step(f: &VectorField, a: &EquilibriumTrace, tau: f64, opts: &SolveOptions) -> Result<EquilibriumTrace> {
    if tau < 0.0 {
        return Err(Error::InvalidOptions(format!("pullback time must be nonnegative, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(a.clone());
    }
    let shift = (tau / a.step).round() as usize;
    if ((tau / a.step) - shift as f64).abs() > 1e-9 {
        return Err(Error::InvalidOptions(format!("pullback time {tau} must be a multiple of the trace step {}", a.step)));
    }
    if shift >= a.values.len() {
        return Err(Error::WindowUnderflow { needed: tau, available: a.t_max() - a.t_min });
    }
    let values: Vec<History> = (shift..a.values.len())
        .into_par_iter()
        .map(|i| {
            let src = i - shift;
            let g = f.translate(a.time(src));
            let seg = solve_checked(&g, &a.values[src], tau, opts)?;
            seg.extract_history_with(tau, a.values[src].per_unit())
        })
        .collect::<Result<_>>()?;
    EquilibriumTrace::new(a.kind, a.time(shift), a.step, values)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PullbackSchedule {
    /// Pullback time added per iteration.
    pub step: f64,
    pub max_steps: usize,
    /// Cauchy tolerance on sup increments.
    pub tolerance: f64,
    /// Allowed decrease of an increasing iteration (and vice versa).
    pub budget: f64,
}

impl Default for PullbackSchedule {
    fn default() -> Self {
        PullbackSchedule { step: 2.0, max_steps: 30, tolerance: 1e-8, budget: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackDiagnostics {
    pub taus: Vec<f64>,
    pub increments_sub: Vec<f64>,
    pub increments_super: Vec<f64>,
    /// Worst step against the expected direction (positive = violation).
    pub monotone_violation: f64,
    /// `max(0, u - v)` over the final window.
    pub sandwich_residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PullbackLimit {
    pub u: EquilibriumTrace,
    pub v: EquilibriumTrace,
    pub diagnostics: PullbackDiagnostics,
}

/// Iterates `a_{tau + step} = pullback_step(a_tau, step)` and likewise for
/// `b`, stopping when both sup increments fall below the tolerance. The
/// iterates must increase (resp. decrease) up to the budget.
pub fn limit_equilibrium(
    f: &VectorField,
    a: &EquilibriumTrace,
    b: &EquilibriumTrace,
    schedule: &PullbackSchedule,
    opts: &SolveOptions,
) -> Result<PullbackLimit> {
    let gap = a.order_excess(b)?;
    if gap > schedule.budget {
        return Err(Error::SemiEquilibriumViolated(format!("sub trace exceeds super trace by {gap:.3e}")));
    }
    let mut u = a.clone();
    let mut v = b.clone();
    let mut diag = PullbackDiagnostics {
        taus: Vec::new(),
        increments_sub: Vec::new(),
        increments_super: Vec::new(),
        monotone_violation: f64::NEG_INFINITY,
        sandwich_residual: 0.0,
        converged: schedule.max_steps == 0,
    };
    let mut tau = 0.0;
    for _ in 0..schedule.max_steps {
        let u2 = pullback_step(f, &u, schedule.step, opts)?;
        let v2 = pullback_step(f, &v, schedule.step, opts)?;
        tau += schedule.step;
        let down = u.order_excess(&u2)?;
        let up = v2.order_excess(&v)?;
        diag.monotone_violation = diag.monotone_violation.max(down).max(up);
        if down > schedule.budget || up > schedule.budget {
            return Err(Error::SemiEquilibriumViolated(format!(
                "pullback iterates not monotone at tau = {tau}: decrease {down:.3e}, increase {up:.3e}"
            )));
        }
        let du = u2.sup_distance(&u)?;
        let dv = v2.sup_distance(&v)?;
        diag.taus.push(tau);
        diag.increments_sub.push(du);
        diag.increments_super.push(dv);
        u = u2;
        v = v2;
        if du < schedule.tolerance && dv < schedule.tolerance {
            diag.converged = true;
            break;
        }
    }
    u.kind = TraceKind::Candidate;
    v.kind = TraceKind::Candidate;
    diag.sandwich_residual = u.order_excess(&v)?.max(0.0);
    if !diag.monotone_violation.is_finite() {
        diag.monotone_violation = 0.0;
    }
    Ok(PullbackLimit { u, v, diagnostics: diag })
}

/// `max_t ||u(f_{t+s}) - x_s(., f_t, u(f_t))||` over sample times `t`
/// taken every `stride` samples.
pub fn equilibrium_residual(u: &EquilibriumTrace, f: &VectorField, s: f64, stride: usize, opts: &SolveOptions) -> Result<f64> {
    let span = u.t_max() - u.t_min;
    if s > span - 1.0 + 1e-9 {
        return Err(Error::WindowUnderflow { needed: s + 1.0, available: span });
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let shift = (s / u.step).round() as usize;
    let idx: Vec<usize> = (0..u.values.len() - shift).step_by(stride.max(1)).collect();
    let res: Vec<f64> = idx
        .par_iter()
        .map(|&i| -> Result<f64> {
            let seg = solve_checked(&f.translate(u.time(i)), &u.values[i], s, opts)?;
            seg.extract_history_with(s, u.values[i].per_unit())?.sup_distance(&u.values[i + shift])
        })
        .collect::<Result<_>>()?;
    Ok(res.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttractionSeries {
    pub times: Vec<f64>,
    pub part_metric: Vec<f64>,
    pub distance: Vec<f64>,
    /// `(2 e^p - e^-p - 1) min(|u|, |x|)` at each time.
    pub norm_bound: Vec<f64>,
    /// Largest increase between consecutive part-metric samples.
    pub max_increase: f64,
}

impl AttractionSeries {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,part_metric,distance,norm_bound\n");
        for i in 0..self.times.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.times[i], self.part_metric[i], self.distance[i], self.norm_bound[i]
            ));
        }
        out
    }
}

/// Part metric between the equilibrium and the solution from `phi`, both
/// started at trace time `t0` and sampled every `step` up to `t0 + horizon`.
/// Equilibrium values beyond the trace window are continued by the flow,
/// since `u(f_{t0 + t}) = x_t(., f_{t0}, u(f_{t0}))`.
pub fn forward_attraction(
    f: &VectorField,
    u: &EquilibriumTrace,
    t0: f64,
    phi: &History,
    horizon: f64,
    step: f64,
    opts: &SolveOptions,
) -> Result<AttractionSeries> {
    let u0 = u.at(t0)?;
    let g = f.translate(t0);
    let eq = solve_checked(&g, u0, horizon, opts)?;
    let x = solve_checked(&g, phi, horizon, opts)?;
    let n = (horizon / step).round() as usize;
    let mut series =
        AttractionSeries { times: Vec::new(), part_metric: Vec::new(), distance: Vec::new(), norm_bound: Vec::new(), max_increase: 0.0 };
    for i in 0..=n {
        let t = i as f64 * step;
        let (ue, xe) = if t == 0.0 {
            (u0.clone(), phi.clone())
        } else {
            (eq.extract_history_with(t, u0.per_unit())?, x.extract_history_with(t, u0.per_unit())?)
        };
        let p = ue.part_metric(&xe)?;
        let d = ue.sup_distance(&xe)?;
        let bound = (2.0 * p.exp() - (-p).exp() - 1.0) * ue.sup_norm().min(xe.sup_norm());
        series.times.push(t0 + t);
        series.part_metric.push(p);
        series.distance.push(d);
        series.norm_bound.push(bound);
    }
    series.max_increase = series.part_metric.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(series)
}

/// Options for [`equilibrium_traces_from_linear`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceOptions {
    pub window: (f64, f64),
    pub step: f64,
    /// Accuracy of the truncated integrals from minus infinity.
    pub epsilon: f64,
    pub solve: SolveOptions,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { window: (-80.0, 10.0), step: 1.0 / 8.0, epsilon: 1e-12, solve: SolveOptions::default() }
    }
}

/// The sub- and super-equilibria given by the bounded entire solutions of
/// the linear minorant and majorant. Each is computed as one long solve
/// from zero, started early enough that the neglected tail is below
/// `epsilon`; the result is itself a solution of the linear equation, so
/// the comparison with the nonlinear field holds exactly.
pub fn equilibrium_traces_from_linear(model: &Model, opts: &TraceOptions) -> Result<(EquilibriumTrace, EquilibriumTrace)> {
    let (lo, hi) = opts.window;
    if !(hi > lo) {
        return Err(Error::InvalidOptions(format!("empty window {:?}", opts.window)));
    }
    let fit_horizon = 40.0;
    let (minorant, majorant, decay, gamma_c, h0_c, floor) = match model {
        Model::Scalar(m) => {
            let u = fundamental_scalar_delay(&m.spec.alpha, &m.spec.beta, lo, fit_horizon, &opts.solve)?;
            (
                &m.minorant,
                &m.majorant,
                fit_decay(&u),
                m.spec.gamma.window_integral_range(1.0, lo - 64.0, hi).1,
                m.spec.h.base.window_integral_range(1.0, lo - 64.0, hi).1,
                m.spec.alpha.lower_bound(),
            )
        }
        Model::Cyclic(m) => {
            let u = fundamental_matrix_ode(&m.spec.alphas, &m.spec.beta, lo, fit_horizon, &opts.solve)?;
            let floor = m.spec.alphas.iter().map(|a| a.lower_bound()).fold(f64::INFINITY, f64::min);
            (
                &m.minorant,
                &m.majorant,
                fit_decay(&u),
                m.spec.gamma.window_integral_range(1.0, lo - 64.0, hi).1,
                m.spec.h.base.window_integral_range(1.0, lo - 64.0, hi).1,
                floor,
            )
        }
        Model::Field(_) => return Err(Error::InvalidModel("linear traces need a population model".into())),
    };
    let tau_b = tail_length(&decay, gamma_c, opts.epsilon)?;
    if !(floor > 0.0) {
        return Err(Error::DecayFailure("alpha has no positive lower bound".into()));
    }
    // minorant tail: the chain of m stages decays at least like t^(m-1) e^(-floor t)
    let tau_a = ((2.0 * h0_c.max(1e-300) / ((1.0 - (-floor).exp()) * opts.epsilon)).ln() / floor).max(0.0) + 1.0;
    let tau_a = tau_a + if let Model::Cyclic(m) = model { 10.0 * m.spec.alphas.len() as f64 / floor } else { 0.0 };
    let per_step = |tau: f64| (tau / opts.step).ceil() * opts.step + 1.0;
    let start_a = lo - per_step(tau_a);
    let start_b = lo - per_step(tau_b);
    let (seg_a, seg_b) = match model {
        Model::Scalar(_) => (
            solve_dde_pulse(&minorant.translate(start_a), &[0.0], hi - start_a, &opts.solve)?,
            solve_dde_pulse(&majorant.translate(start_b), &[0.0], hi - start_b, &opts.solve)?,
        ),
        _ => {
            let z = vec![0.0; model.dim()];
            (
                solve_ode(&minorant.translate(start_a), 0.0, &z, hi - start_a, &opts.solve)?,
                solve_ode(&majorant.translate(start_b), 0.0, &z, hi - start_b, &opts.solve)?,
            )
        }
    };
    for seg in [&seg_a, &seg_b] {
        if let Status::BlewUp { at } = seg.status() {
            return Err(Error::BlowUp { at });
        }
    }
    let a = trace_from_segment(TraceKind::Sub, &seg_a, start_a, opts.window, opts.step)?;
    let b = trace_from_segment(TraceKind::Super, &seg_b, start_b, opts.window, opts.step)?;
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FnField;
    use crate::models::preset;

    #[test]
    fn pullback_of_zero_time_is_identity() {
        let f = VectorField::new(FnField::zero(1));
        let h = History::constant(&[2.0], 64).unwrap();
        let a = EquilibriumTrace::constant(TraceKind::Sub, (-4.0, 0.0), 0.5, &h).unwrap();
        let opts = SolveOptions::with_step(1.0 / 64.0);
        assert_eq!(pullback_step(&f, &a, 0.0, &opts).unwrap(), a);
        let b = pullback_step(&f, &a, 1.0, &opts).unwrap();
        assert_eq!(b.t_min, -3.0);
        assert!(b.sup_distance(&a).unwrap() == 0.0);
        assert!(matches!(pullback_step(&f, &a, 5.0, &opts), Err(Error::WindowUnderflow { .. })));
    }

    #[test]
    fn zero_field_residual_vanishes() {
        let f = VectorField::new(FnField::zero(1));
        let h = History::constant(&[1.5], 64).unwrap();
        let u = EquilibriumTrace::constant(TraceKind::Candidate, (-4.0, 0.0), 0.5, &h).unwrap();
        let r = equilibrium_residual(&u, &f, 1.0, 1, &SolveOptions::with_step(1.0 / 64.0)).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn linear_traces_are_ordered_and_positive() {
        let m = preset("golden").unwrap();
        let opts = TraceOptions { window: (-4.0, 2.0), step: 0.5, solve: SolveOptions::with_step(1.0 / 64.0), ..Default::default() };
        let (a, b) = equilibrium_traces_from_linear(&m, &opts).unwrap();
        assert!(a.min_value() > 0.0);
        assert!(a.order_excess(&b).unwrap() <= 0.0);
        // constant coefficients: minorant limit h0/alpha = 1, majorant 1.25/0.75
        assert!((a.at(0.0).unwrap().last()[0] - 1.0).abs() < 1e-9);
        assert!((b.at(0.0).unwrap().last()[0] - 5.0 / 3.0).abs() < 1e-8);
    }
}
