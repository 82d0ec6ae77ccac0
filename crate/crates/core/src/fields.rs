//! Carathéodory vector fields `f(t, x, y)`, time translation, and sampled
//! checks of the order conditions used throughout the crate.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::CoefficientSignal;

/// Order and sublinearity conditions a field may satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    /// Cooperative in `x`: `a <= b`, `a_k = b_k` gives `f_k(t,a,c) <= f_k(t,b,c)`.
    Kx,
    /// Monotone in the delayed argument: `c <= d` gives `f_k(t,a,c) <= f_k(t,a,d)`.
    Ky,
    /// Both at once: `f_k(t,a,c) <= f_k(t,b,d)`.
    Kxy,
    /// Cooperative, for fields without delay.
    K1,
    /// Fully monotone: `(a,c) <= (b,d)` gives `f(t,a,c) <= f(t,b,d)`.
    K2,
    /// Sublinear on the cone: `f(t, la, lc) >= l f(t, a, c)`.
    S,
    /// Strictly sublinear with a margin, on every subinterval of given length.
    #[serde(rename = "strongS")]
    StrongS,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::Kx => "Kx",
            Condition::Ky => "Ky",
            Condition::Kxy => "Kxy",
            Condition::K1 => "K1",
            Condition::K2 => "K2",
            Condition::S => "S",
            Condition::StrongS => "strongS",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "Kx" => Condition::Kx,
            "Ky" => Condition::Ky,
            "Kxy" => Condition::Kxy,
            "K1" => Condition::K1,
            "K2" => Condition::K2,
            "S" => Condition::S,
            "strongS" => Condition::StrongS,
            other => return Err(Error::InvalidModel(format!("unknown condition {other}"))),
        })
    }
}

/// A concrete field. Implementations must be pure.
///
/// `anchor` selects the smooth piece of every coefficient (see
/// [`CoefficientSignal::value_in`]); solvers pass a point inside the
/// current step so values at step ends are one-sided limits.
pub trait FieldModel: Send + Sync {
    fn dim(&self) -> usize;
    fn delayed(&self) -> bool;
    fn eval(&self, t: f64, anchor: f64, x: &[f64], y: &[f64], out: &mut [f64]);
    /// Times in [a, b] where the time dependence may jump.
    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64>;
    fn flags(&self) -> Vec<Condition> {
        Vec::new()
    }
    fn label(&self) -> String;
    /// Integral over [a, b] of a bound `l_k` with
    /// `f_k(t,b,c) - f_k(t,a,c) >= -l_k(t) (b_k - a_k)` for ordered `a <= b`.
    fn l_bound_integral(&self, _k: usize, _a: f64, _b: f64) -> Option<f64> {
        None
    }
}

/// A field together with a translation offset: evaluates `f(shift + t, x, y)`.
#[derive(Clone)]
pub struct VectorField {
    model: Arc<dyn FieldModel>,
    shift: f64,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("label", &self.model.label())
            .field("dim", &self.model.dim())
            .field("shift", &self.shift)
            .finish()
    }
}

impl VectorField {
    pub fn new<M: FieldModel + 'static>(model: M) -> Self {
        VectorField { model: Arc::new(model), shift: 0.0 }
    }

    pub fn from_arc(model: Arc<dyn FieldModel>) -> Self {
        VectorField { model, shift: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn delayed(&self) -> bool {
        self.model.delayed()
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn label(&self) -> String {
        self.model.label()
    }

    pub fn flags(&self) -> Vec<Condition> {
        self.model.flags()
    }

    pub fn model(&self) -> &Arc<dyn FieldModel> {
        &self.model
    }

    /// The translate `f_s(t, x, y) = f(s + t, x, y)`.
    pub fn translate(&self, s: f64) -> Self {
        VectorField { model: self.model.clone(), shift: self.shift + s }
    }

    pub fn eval(&self, t: f64, anchor: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.model.eval(self.shift + t, self.shift + anchor, x, y, out)
    }

    /// Right-continuous evaluation, allocating the result.
    pub fn eval_at(&self, t: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval(t, t, x, y, &mut out);
        out
    }

    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let s = self.shift;
        self.model.breakpoints(s + a, s + b).into_iter().map(|p| p - s).collect()
    }

    pub fn l_bound_integral(&self, k: usize, a: f64, b: f64) -> Option<f64> {
        self.model.l_bound_integral(k, self.shift + a, self.shift + b)
    }
}

pub type FieldFn = dyn Fn(f64, f64, &[f64], &[f64], &mut [f64]) + Send + Sync;

/// A field given by a closure `(t, anchor, x, y, out)`. Breakpoints are
/// those of the attached signals.
#[derive(Clone)]
pub struct FnField {
    label: String,
    dim: usize,
    delayed: bool,
    func: Arc<FieldFn>,
    signals: Vec<CoefficientSignal>,
    flags: Vec<Condition>,
    l_bounds: Option<Vec<CoefficientSignal>>,
}

impl FnField {
    pub fn new<F>(label: impl Into<String>, dim: usize, delayed: bool, func: F) -> Self
    where
        F: Fn(f64, f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        FnField { label: label.into(), dim, delayed, func: Arc::new(func), signals: Vec::new(), flags: Vec::new(), l_bounds: None }
    }

    /// The zero field in dimension `dim`.
    pub fn zero(dim: usize) -> Self {
        FnField::new("zero", dim, true, |_, _, _, _, out| out.fill(0.0)).with_flags(&[
            Condition::Kx,
            Condition::Ky,
            Condition::Kxy,
            Condition::K2,
            Condition::S,
        ])
    }

    pub fn with_signals(mut self, signals: Vec<CoefficientSignal>) -> Self {
        self.signals = signals;
        self
    }

    pub fn with_flags(mut self, flags: &[Condition]) -> Self {
        self.flags = flags.to_vec();
        self
    }

    pub fn with_l_bounds(mut self, l: Vec<CoefficientSignal>) -> Self {
        self.l_bounds = Some(l);
        self
    }
}

impl FieldModel for FnField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn delayed(&self) -> bool {
        self.delayed
    }
    fn eval(&self, t: f64, anchor: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.func)(t, anchor, x, y, out)
    }
    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        merge_breakpoints(self.signals.iter(), a, b)
    }
    fn flags(&self) -> Vec<Condition> {
        self.flags.clone()
    }
    fn label(&self) -> String {
        self.label.clone()
    }
    fn l_bound_integral(&self, k: usize, a: f64, b: f64) -> Option<f64> {
        self.l_bounds.as_ref().and_then(|l| l.get(k)).map(|s| s.integral(a, b))
    }
}

/// Sorted union of the breakpoints of several signals in [a, b].
pub fn merge_breakpoints<'a>(signals: impl Iterator<Item = &'a CoefficientSignal>, a: f64, b: f64) -> Vec<f64> {
    let mut all: Vec<f64> = signals.flat_map(|s| s.breakpoints(a, b)).collect();
    all.sort_by(|p, q| p.partial_cmp(q).unwrap());
    all.dedup();
    all
}

/// Monotone saturating profiles used by the nonlinear feedback terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `y / (1 + y)`
    Saturating,
    /// `1 - exp(-y)`
    Exponential,
    /// `min(y, 1)`
    Clipped,
    /// `y` (gives the linear model)
    Identity,
}

impl Shape {
    pub fn apply(self, y: f64) -> f64 {
        match self {
            Shape::Saturating => y / (1.0 + y),
            Shape::Exponential => -(-y).exp_m1(),
            Shape::Clipped => y.min(1.0),
            Shape::Identity => y,
        }
    }

    /// Lipschitz constant on `y >= 0`.
    pub fn lipschitz(self) -> f64 {
        1.0
    }
}

/// `h(t, y) = base(t) + gain(t) * shape(max(y, 0))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub base: CoefficientSignal,
    pub gain: CoefficientSignal,
    pub shape: Shape,
}

impl Nonlinearity {
    pub fn new(base: CoefficientSignal, gain: CoefficientSignal, shape: Shape) -> Self {
        Nonlinearity { base, gain, shape }
    }

    pub fn eval(&self, t: f64, anchor: f64, y: f64) -> f64 {
        self.base.value_in(t, anchor) + self.gain.value_in(t, anchor) * self.shape.apply(y.max(0.0))
    }

    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        merge_breakpoints([&self.base, &self.gain].into_iter(), a, b)
    }
}

/// Verdict of a sampled check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_pass(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub points: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub trials: usize,
    pub worst_violation: f64,
    pub witness: Option<Witness>,
    pub verdict: Verdict,
}

/// How `check_condition` draws its samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sampler {
    pub trials: usize,
    pub seed: u64,
    pub t_range: (f64, f64),
    pub radius: f64,
    pub tolerance: f64,
    /// Expected dimension, if the caller wants it checked.
    pub dim: Option<usize>,
    /// Subinterval length for the strong sublinearity check.
    pub delta: f64,
    pub times_per_interval: usize,
    pub samples_per_time: usize,
    /// Smallest state magnitude drawn by the strong sublinearity check.
    pub min_magnitude: f64,
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler {
            trials: 2000,
            seed: 0,
            t_range: (-10.0, 10.0),
            radius: 4.0,
            tolerance: 1e-10,
            dim: None,
            delta: 1.0,
            times_per_interval: 8,
            samples_per_time: 64,
            min_magnitude: 1e-12,
        }
    }
}

/// Default strictness threshold for the strong sublinearity margin.
pub fn strictness_threshold(lambda: f64, y: f64) -> f64 {
    1e-8 * (1.0 - lambda) * y.min(1.0)
}

/// Sample times in [lo, hi]: `n` uniform draws plus the midpoints between
/// consecutive breakpoints, never a breakpoint itself.
fn sample_times(f: &VectorField, lo: f64, hi: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let bps = f.breakpoints(lo, hi);
    let mut ts: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    let mut edges = vec![lo];
    edges.extend(bps.iter().cloned().filter(|&p| p > lo && p < hi));
    edges.push(hi);
    for w in edges.windows(2) {
        ts.push(0.5 * (w[0] + w[1]));
    }
    ts.retain(|t| bps.binary_search_by(|p| p.partial_cmp(t).unwrap()).is_err());
    ts
}

/// Nonnegative perturbation with a random scale, so that some samples sit
/// very close to the order boundary.
fn bump(rng: &mut ChaCha8Rng, radius: f64) -> f64 {
    match rng.gen_range(0..4) {
        0 => 0.0,
        1 => radius * 10f64.powf(rng.gen_range(-8.0..0.0)),
        _ => rng.gen_range(0.0..radius),
    }
}

struct Tuple {
    t: f64,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

fn draw_tuple(rng: &mut ChaCha8Rng, times: &[f64], n: usize, r: f64) -> Tuple {
    let t = times[rng.gen_range(0..times.len())];
    let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..r)).collect();
    let b: Vec<f64> = a.iter().map(|v| v + bump(rng, r)).collect();
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..r)).collect();
    let d: Vec<f64> = c.iter().map(|v| v + bump(rng, r)).collect();
    Tuple { t, a, b, c, d }
}

struct Worst {
    value: f64,
    witness: Option<Witness>,
}

impl Worst {
    fn new() -> Self {
        Worst { value: f64::NEG_INFINITY, witness: None }
    }
    fn offer(&mut self, v: f64, t: f64, points: &[&[f64]]) {
        if v > self.value {
            self.value = v;
            self.witness = Some(Witness { t, points: points.iter().map(|p| p.to_vec()).collect() });
        }
    }
}

/// Violation of `f_k(t,a,c) <= f_k(t,b,d)` over the components `k` where
/// `a_k = b_k` (all components when `all` is set).
fn order_violation(f: &VectorField, t: f64, a: &[f64], b: &[f64], c: &[f64], d: &[f64], all: bool) -> Result<f64> {
    let n = f.dim();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    let mut worst = f64::NEG_INFINITY;
    if all {
        f.eval(t, t, a, c, &mut lo);
        f.eval(t, t, b, d, &mut hi);
        check_finite(t, a, c, &lo)?;
        check_finite(t, b, d, &hi)?;
        for k in 0..n {
            worst = worst.max(lo[k] - hi[k]);
        }
        return Ok(worst);
    }
    f.eval(t, t, a, c, &mut lo);
    check_finite(t, a, c, &lo)?;
    let mut bk = b.to_vec();
    for k in 0..n {
        bk.copy_from_slice(b);
        bk[k] = a[k];
        f.eval(t, t, &bk, d, &mut hi);
        check_finite(t, &bk, d, &hi)?;
        worst = worst.max(lo[k] - hi[k]);
    }
    Ok(worst)
}

fn check_finite(t: f64, x: &[f64], y: &[f64], v: &[f64]) -> Result<()> {
    if v.iter().all(|z| z.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { t, x: x.to_vec(), y: y.to_vec() })
    }
}

/// Checks one condition on random samples. Violations are signed: a
/// nonpositive worst violation means no counterexample was found.
pub fn check_condition(f: &VectorField, cond: Condition, sampler: &Sampler) -> Result<ConditionReport> {
    let n = f.dim();
    if let Some(d) = sampler.dim {
        if d != n {
            return Err(Error::DimensionMismatch { expected: n, got: d });
        }
    }
    if cond == Condition::StrongS {
        return check_strong_sublinearity(f, sampler);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let (lo, hi) = sampler.t_range;
    let times = sample_times(f, lo, hi, sampler.trials.max(1), &mut rng);
    let r = sampler.radius;
    let mut worst = Worst::new();
    for _ in 0..sampler.trials {
        let Tuple { t, a, b, c, d } = draw_tuple(&mut rng, &times, n, r);
        match cond {
            Condition::Kx | Condition::K1 => {
                let v = order_violation(f, t, &a, &b, &c, &c, false)?;
                worst.offer(v, t, &[&a, &b, &c]);
            }
            Condition::Ky => {
                if !f.delayed() {
                    worst.offer(0.0, t, &[&a, &c, &d]);
                    continue;
                }
                let v = order_violation(f, t, &a, &a, &c, &d, true)?;
                worst.offer(v, t, &[&a, &c, &d]);
            }
            Condition::Kxy => {
                let v1 = order_violation(f, t, &a, &b, &c, &d, false)?;
                let v2 = order_violation(f, t, &a, &b, &c, &c, false)?;
                let v3 = if f.delayed() { order_violation(f, t, &a, &a, &c, &d, true)? } else { 0.0 };
                worst.offer(v1.max(v2).max(v3), t, &[&a, &b, &c, &d]);
            }
            Condition::K2 => {
                let v = order_violation(f, t, &a, &b, &c, &d, true)?;
                worst.offer(v, t, &[&a, &b, &c, &d]);
            }
            Condition::S => {
                let x: Vec<f64> = a.iter().map(|v| v.abs()).collect();
                let y: Vec<f64> = c.iter().map(|v| v.abs()).collect();
                let lambda = rng.gen_range(0.0..=1.0);
                let v = sublinearity_gap(f, t, lambda, &x, &y)?;
                // violation is the negative gap
                worst.offer(-v.iter().cloned().fold(f64::INFINITY, f64::min), t, &[&x, &y, &[lambda]]);
            }
            Condition::StrongS => unreachable!(),
        }
    }
    let value = if worst.value.is_finite() { worst.value } else { 0.0 };
    let verdict = Verdict::from_pass(value <= sampler.tolerance);
    Ok(ConditionReport { condition: cond, trials: sampler.trials, worst_violation: value, witness: worst.witness, verdict })
}

/// `f(t, lx, ly) - l f(t, x, y)` per component.
fn sublinearity_gap(f: &VectorField, t: f64, lambda: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let n = f.dim();
    let lx: Vec<f64> = x.iter().map(|v| lambda * v).collect();
    let ly: Vec<f64> = y.iter().map(|v| lambda * v).collect();
    let mut scaled = vec![0.0; n];
    let mut plain = vec![0.0; n];
    f.eval(t, t, &lx, &ly, &mut scaled);
    f.eval(t, t, x, y, &mut plain);
    check_finite(t, &lx, &ly, &scaled)?;
    check_finite(t, x, y, &plain)?;
    Ok((0..n).map(|k| scaled[k] - lambda * plain[k]).collect())
}

/// Strong sublinearity: on every subinterval of length `delta`, some
/// sampled time must have, for all sampled `(l, x, y)` with `x, y >> 0`,
/// a component whose gap exceeds [`strictness_threshold`]. The reported
/// violation is the worst, over subintervals, of the best time's shortfall.
fn check_strong_sublinearity(f: &VectorField, sampler: &Sampler) -> Result<ConditionReport> {
    let n = f.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let (lo, hi) = sampler.t_range;
    let delta = sampler.delta.max(1e-6);
    let cells = ((hi - lo) / delta).ceil().max(1.0) as usize;
    let log_lo = sampler.min_magnitude.max(1e-300).ln();
    let log_hi = sampler.radius.ln();
    let mut worst = Worst::new();
    let mut trials = 0;
    for i in 0..cells {
        let a = lo + i as f64 * delta;
        let b = (a + delta).min(hi);
        let times = sample_times(f, a, b, sampler.times_per_interval, &mut rng);
        let mut best = f64::INFINITY;
        let mut best_witness: Option<Witness> = None;
        for &t in &times {
            let mut shortfall = f64::NEG_INFINITY;
            let mut witness = None;
            for _ in 0..sampler.samples_per_time {
                trials += 1;
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(log_lo..log_hi).exp()).collect();
                let y: Vec<f64> = (0..n).map(|_| rng.gen_range(log_lo..log_hi).exp()).collect();
                let lambda = rng.gen_range(0.01..0.99);
                let gap = sublinearity_gap(f, t, lambda, &x, &y)?;
                let scale = x.iter().chain(&y).cloned().fold(0.0, f64::max);
                let thr = strictness_threshold(lambda, scale);
                let margin = gap.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let s = thr - margin;
                if s > shortfall {
                    shortfall = s;
                    witness = Some(Witness { t, points: vec![x, y, vec![lambda]] });
                }
            }
            if shortfall < best {
                best = shortfall;
                best_witness = witness;
            }
        }
        if best > worst.value {
            worst.value = best;
            worst.witness = best_witness;
        }
    }
    let value = if worst.value.is_finite() { worst.value } else { 0.0 };
    let verdict = Verdict::from_pass(value < 0.0);
    Ok(ConditionReport { condition: Condition::StrongS, trials, worst_violation: value, witness: worst.witness, verdict })
}

/// A sampled function of time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Lattice and random-point resolution of the state ball for m-bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MBoundGrid {
    pub times: usize,
    pub lattice_per_axis: usize,
    pub max_lattice_points: usize,
    pub random_points: usize,
    pub seed: u64,
}

impl Default for MBoundGrid {
    fn default() -> Self {
        MBoundGrid { times: 64, lattice_per_axis: 33, max_lattice_points: 33 * 33 * 33, random_points: 1000, seed: 0 }
    }
}

/// Sampled optimal m-bounds `m^j(t) = sup_{|x|,|y| <= j} |f(t,x,y)|` (max
/// norms) for several radii. The estimate for a radius also includes the
/// points drawn for all smaller radii, so the result is nondecreasing in
/// `j` at every time.
pub fn optimal_m_bounds(f: &VectorField, radii: &[f64], window: (f64, f64), grid: &MBoundGrid) -> Result<Vec<SampledFunction>> {
    let n = f.dim();
    let dims = if f.delayed() { 2 * n } else { n };
    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
    let times = sample_times(f, window.0, window.1, grid.times, &mut rng);
    let mut times = times;
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut per_axis = grid.lattice_per_axis.max(2);
    while (per_axis as f64).powi(dims as i32) > grid.max_lattice_points as f64 && per_axis > 3 {
        per_axis -= 2;
    }
    let unit_lattice: Vec<Vec<f64>> = {
        let count = per_axis.pow(dims as u32);
        (0..count)
            .map(|mut idx| {
                (0..dims)
                    .map(|_| {
                        let i = idx % per_axis;
                        idx /= per_axis;
                        -1.0 + 2.0 * i as f64 / (per_axis - 1) as f64
                    })
                    .collect()
            })
            .collect()
    };
    let unit_random: Vec<Vec<f64>> = (0..grid.random_points).map(|_| (0..dims).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();

    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&i, &j| radii[i].partial_cmp(&radii[j]).unwrap());
    let mut running = vec![0.0f64; times.len()];
    let mut out = vec![SampledFunction { times: times.clone(), values: Vec::new() }; radii.len()];
    let mut buf = vec![0.0; n];
    for &ri in &order {
        let j = radii[ri];
        for (ti, &t) in times.iter().enumerate() {
            let mut m = running[ti];
            for p in unit_lattice.iter().chain(&unit_random) {
                let z: Vec<f64> = p.iter().map(|v| v * j).collect();
                let (x, y) = if f.delayed() { z.split_at(n) } else { (&z[..], &z[..]) };
                f.eval(t, t, x, y, &mut buf);
                check_finite(t, x, y, &buf)?;
                for v in &buf {
                    m = m.max(v.abs());
                }
            }
            running[ti] = m;
        }
        out[ri].values = running.clone();
    }
    Ok(out)
}

pub fn optimal_m_bound(f: &VectorField, radius: f64, window: (f64, f64), grid: &MBoundGrid) -> Result<SampledFunction> {
    Ok(optimal_m_bounds(f, &[radius], window, grid)?.remove(0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquicontinuityReport {
    pub delta: Option<f64>,
    pub worst_window_integral: f64,
    pub verdict: Verdict,
}

/// Smallest dyadic refinement level tried by the equicontinuity check.
const EQUI_MAX_LEVEL: i32 = 40;

/// Largest `delta = r 2^-k` such that every window integral of width
/// `delta` inside [-r, r] is at most `eps` for all signals (with a 1e-12
/// relative slack for exact ties).
pub fn check_l1loc_equicontinuity(signals: &[CoefficientSignal], r: f64, eps: f64) -> EquicontinuityReport {
    if signals.is_empty() {
        return EquicontinuityReport { delta: Some(r), worst_window_integral: 0.0, verdict: Verdict::Pass };
    }
    let mut last = f64::INFINITY;
    for k in 0..=EQUI_MAX_LEVEL {
        let delta = r * 2f64.powi(-k);
        let worst = signals.iter().map(|s| s.window_integral_range(delta, -r, r - delta).1).fold(f64::NEG_INFINITY, f64::max);
        last = worst;
        if worst <= eps * (1.0 + 1e-12) {
            return EquicontinuityReport { delta: Some(delta), worst_window_integral: worst, verdict: Verdict::Pass };
        }
    }
    EquicontinuityReport { delta: None, worst_window_integral: last, verdict: Verdict::Fail }
}
