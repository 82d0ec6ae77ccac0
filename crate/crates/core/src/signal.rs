//! Nonnegative scalar coefficient signals with known breakpoints.
//!
//! Signals carry the time dependence of every model in the crate (decay
//! rates, delayed gains, forcing terms). All kinds except the smooth
//! quasi-periodic one have an exact antiderivative; the smooth quasi-periodic
//! kind integrates by composite Gauss-Legendre quadrature split at its kinks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Height cap of a spike, relative to its amplitude. The profile is
/// `amplitude * min(sqrt(width/|u|), SPIKE_CAP)`.
pub const SPIKE_CAP: f64 = 1.0e3;

fn default_quad_tol() -> f64 {
    1e-12
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Harmonic {
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalKind {
    Constant {
        value: f64,
    },
    /// Periodic piecewise constant: `values[i]` on `[cuts[i], cuts[i+1])`
    /// (the last cell ends at `period`).
    Step {
        period: f64,
        cuts: Vec<f64>,
        values: Vec<f64>,
    },
    /// Periodic piecewise linear through `(knots[i], values[i])`, with
    /// `knots[0] = 0` and the last knot equal to `period`.
    PiecewiseLinear {
        period: f64,
        knots: Vec<f64>,
        values: Vec<f64>,
    },
    /// `offset + sum a_k g(sin(w_k t + p_k))` with `g` the identity or the
    /// positive part. With `quantum` set, the signal is replaced by its
    /// midpoint step approximation on cells of that length.
    QuasiPeriodic {
        offset: f64,
        terms: Vec<Harmonic>,
        #[serde(default)]
        rectify: bool,
        #[serde(default)]
        quantum: Option<f64>,
        #[serde(default = "default_quad_tol")]
        quad_tol: f64,
    },
    /// Periodic integrable spike around `center`, supported on
    /// `|u| < width`, on top of a constant `base`.
    Spike {
        period: f64,
        center: f64,
        width: f64,
        amplitude: f64,
        #[serde(default)]
        base: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SignalSpec {
    #[serde(flatten)]
    kind: SignalKind,
    #[serde(default)]
    floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalSpec", into = "SignalSpec")]
pub struct CoefficientSignal {
    kind: SignalKind,
    floor: f64,
}

impl TryFrom<SignalSpec> for CoefficientSignal {
    type Error = Error;
    fn try_from(s: SignalSpec) -> Result<Self> {
        CoefficientSignal::new(s.kind, s.floor)
    }
}

impl From<CoefficientSignal> for SignalSpec {
    fn from(s: CoefficientSignal) -> Self {
        SignalSpec { kind: s.kind, floor: s.floor }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidSignal(msg.into())
}

/// `(n, u)` with `t = n * period + u`, `0 <= u < period`.
fn reduce(t: f64, period: f64) -> (f64, f64) {
    let n = (t / period).floor();
    let mut u = t - n * period;
    if u >= period {
        u -= period;
        return (n + 1.0, u.max(0.0));
    }
    (n, u.max(0.0))
}

/// Index `i` of the cell `[edges[i], edges[i+1])` containing `u`.
fn cell_of(edges: &[f64], u: f64) -> usize {
    edges.partition_point(|&c| c <= u).saturating_sub(1)
}

impl CoefficientSignal {
    pub fn new(kind: SignalKind, floor: f64) -> Result<Self> {
        if !floor.is_finite() || floor < 0.0 {
            return Err(bad(format!("floor must be finite and nonnegative, got {floor}")));
        }
        match &kind {
            SignalKind::Constant { value } => {
                if !value.is_finite() {
                    return Err(bad("constant must be finite"));
                }
            }
            SignalKind::Step { period, cuts, values } => {
                check_period(*period)?;
                if cuts.is_empty() || cuts.len() != values.len() {
                    return Err(bad("step needs one value per cut"));
                }
                if cuts[0] != 0.0 {
                    return Err(bad("first cut must be 0"));
                }
                if cuts.windows(2).any(|w| w[1] <= w[0]) || *cuts.last().unwrap() >= *period {
                    return Err(bad("cuts must increase strictly inside [0, period)"));
                }
            }
            SignalKind::PiecewiseLinear { period, knots, values } => {
                check_period(*period)?;
                if knots.len() < 2 || knots.len() != values.len() {
                    return Err(bad("piecewise-linear needs at least two knots, one value each"));
                }
                if knots[0] != 0.0 || *knots.last().unwrap() != *period {
                    return Err(bad("knots must start at 0 and end at the period"));
                }
                if knots.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(bad("knots must increase strictly"));
                }
            }
            SignalKind::QuasiPeriodic { offset, terms, quantum, quad_tol, .. } => {
                if !offset.is_finite()
                    || terms
                        .iter()
                        .any(|h| !h.amplitude.is_finite() || !h.frequency.is_finite() || h.frequency <= 0.0 || !h.phase.is_finite())
                {
                    return Err(bad("quasi-periodic parameters must be finite with positive frequencies"));
                }
                if let Some(q) = quantum {
                    if !(q.is_finite() && *q > 0.0) {
                        return Err(bad("quantum must be positive"));
                    }
                }
                if !(quad_tol.is_finite() && *quad_tol > 0.0) {
                    return Err(bad("quadrature tolerance must be positive"));
                }
            }
            SignalKind::Spike { period, center, width, amplitude, base } => {
                check_period(*period)?;
                if !(width.is_finite() && *width > 0.0 && *width < 0.5 * period) {
                    return Err(bad("spike width must be in (0, period/2)"));
                }
                if !center.is_finite() || !amplitude.is_finite() || *amplitude < 0.0 || !base.is_finite() {
                    return Err(bad("spike center, amplitude and base must be finite, amplitude >= 0"));
                }
            }
        }
        let sig = CoefficientSignal { kind, floor };
        let lb = sig.lower_bound();
        if lb < 0.0 {
            return Err(bad(format!("signal takes negative values (lower bound {lb})")));
        }
        if lb < floor {
            return Err(bad(format!("declared floor {floor} exceeds lower bound {lb}")));
        }
        Ok(sig)
    }

    pub fn constant(value: f64) -> Self {
        Self::new(SignalKind::Constant { value }, value.max(0.0)).expect("nonnegative constant")
    }

    /// Piecewise constant with the given cell values on equal cells of
    /// length `cell`, repeating.
    pub fn cells(cell: f64, values: &[f64]) -> Result<Self> {
        let cuts = (0..values.len()).map(|i| i as f64 * cell).collect();
        let floor = values.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
        Self::new(SignalKind::Step { period: cell * values.len() as f64, cuts, values: values.to_vec() }, floor)
    }

    /// `offset + a1 (sin t)_+ + a2 (sin sqrt2 t)_+`, quantized on cells of
    /// length `quantum` when given.
    pub fn quasi_periodic(offset: f64, a1: f64, a2: f64, quantum: Option<f64>) -> Result<Self> {
        Self::new(
            SignalKind::QuasiPeriodic {
                offset,
                terms: vec![
                    Harmonic { amplitude: a1, frequency: 1.0, phase: 0.0 },
                    Harmonic { amplitude: a2, frequency: std::f64::consts::SQRT_2, phase: 0.0 },
                ],
                rectify: true,
                quantum,
                quad_tol: default_quad_tol(),
            },
            offset.max(0.0),
        )
    }

    pub fn kind(&self) -> &SignalKind {
        &self.kind
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn is_identically_zero(&self) -> bool {
        match &self.kind {
            SignalKind::Constant { value } => *value == 0.0,
            SignalKind::Step { values, .. } | SignalKind::PiecewiseLinear { values, .. } => values.iter().all(|&v| v == 0.0),
            SignalKind::QuasiPeriodic { offset, terms, .. } => *offset == 0.0 && terms.iter().all(|h| h.amplitude == 0.0),
            SignalKind::Spike { amplitude, base, .. } => *amplitude == 0.0 && *base == 0.0,
        }
    }

    /// A provable lower bound for the signal.
    pub fn lower_bound(&self) -> f64 {
        match &self.kind {
            SignalKind::Constant { value } => *value,
            SignalKind::Step { values, .. } | SignalKind::PiecewiseLinear { values, .. } => {
                values.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            SignalKind::QuasiPeriodic { offset, terms, rectify, .. } => {
                let neg: f64 = terms.iter().map(|h| if *rectify { (-h.amplitude).max(0.0) } else { h.amplitude.abs() }).sum();
                offset - neg
            }
            SignalKind::Spike { base, .. } => *base,
        }
    }

    /// A provable upper bound for the signal.
    pub fn upper_bound(&self) -> f64 {
        match &self.kind {
            SignalKind::Constant { value } => *value,
            SignalKind::Step { values, .. } | SignalKind::PiecewiseLinear { values, .. } => {
                values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }
            SignalKind::QuasiPeriodic { offset, terms, rectify, .. } => {
                let pos: f64 = terms.iter().map(|h| if *rectify { h.amplitude.max(0.0) } else { h.amplitude.abs() }).sum();
                offset + pos
            }
            SignalKind::Spike { base, amplitude, .. } => base + amplitude * SPIKE_CAP,
        }
    }

    fn smooth_qp(offset: f64, terms: &[Harmonic], rectify: bool, t: f64) -> f64 {
        offset
            + terms
                .iter()
                .map(|h| {
                    let s = (h.frequency * t + h.phase).sin();
                    h.amplitude * if rectify { s.max(0.0) } else { s }
                })
                .sum::<f64>()
    }

    fn spike_profile(width: f64, amplitude: f64, u: f64) -> f64 {
        let a = u.abs();
        if a >= width {
            0.0
        } else if a <= width / (SPIKE_CAP * SPIKE_CAP) {
            amplitude * SPIKE_CAP
        } else {
            amplitude * (width / a).sqrt()
        }
    }

    /// Antiderivative of the spike profile from 0 to `x` (odd in `x`).
    fn spike_primitive(width: f64, amplitude: f64, x: f64) -> f64 {
        let a = x.abs().min(width);
        let uc = width / (SPIKE_CAP * SPIKE_CAP);
        let v =
            if a <= uc { amplitude * SPIKE_CAP * a } else { amplitude * (SPIKE_CAP * uc + 2.0 * width.sqrt() * (a.sqrt() - uc.sqrt())) };
        v.copysign(x)
    }

    /// Right-continuous value at `t`.
    pub fn value(&self, t: f64) -> f64 {
        self.value_in(t, t)
    }

    /// Value at `t` of the smooth piece that contains `anchor`. Evaluating
    /// at a breakpoint with the anchor inside the cell to its left gives the
    /// left limit.
    pub fn value_in(&self, t: f64, anchor: f64) -> f64 {
        match &self.kind {
            SignalKind::Constant { value } => *value,
            SignalKind::Step { period, cuts, values } => {
                let (_, u) = reduce(anchor, *period);
                values[cell_of(cuts, u)]
            }
            SignalKind::PiecewiseLinear { period, knots, values } => {
                let (n, ua) = reduce(anchor, *period);
                let i = cell_of(knots, ua).min(knots.len() - 2);
                let u = t - n * period;
                let slope = (values[i + 1] - values[i]) / (knots[i + 1] - knots[i]);
                values[i] + slope * (u - knots[i])
            }
            SignalKind::QuasiPeriodic { offset, terms, rectify, quantum, .. } => match quantum {
                Some(q) => {
                    let k = (anchor / q).floor();
                    Self::smooth_qp(*offset, terms, *rectify, (k + 0.5) * q)
                }
                None => Self::smooth_qp(*offset, terms, *rectify, t),
            },
            SignalKind::Spike { period, center, width, amplitude, base } => {
                let (n, ua) = reduce(anchor - center + 0.5 * period, *period);
                let u = t - center - n * period + 0.5 * period - 0.5 * period;
                let ua = ua - 0.5 * period;
                // stay on the anchor's side of the singular point
                let u = if ua != 0.0 && u.signum() != ua.signum() { 0.0f64.copysign(ua) } else { u };
                if ua.abs() >= *width {
                    *base
                } else {
                    base + Self::spike_profile(*width, *amplitude, u)
                }
            }
        }
    }

    /// Exact (or quadrature, for the smooth quasi-periodic kind) integral
    /// over [a, b]; negative when b < a.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integral(b, a);
        }
        if a == b {
            return 0.0;
        }
        match &self.kind {
            SignalKind::Constant { value } => value * (b - a),
            SignalKind::Step { .. } | SignalKind::PiecewiseLinear { .. } | SignalKind::Spike { .. } => {
                self.primitive(b) - self.primitive(a)
            }
            SignalKind::QuasiPeriodic { offset, terms, rectify, quantum, quad_tol } => match quantum {
                Some(q) => {
                    let ka = (a / q).floor();
                    let kb = (b / q).floor();
                    let val = |k: f64| Self::smooth_qp(*offset, terms, *rectify, (k + 0.5) * q);
                    if ka == kb {
                        return val(ka) * (b - a);
                    }
                    let mut s = val(ka) * ((ka + 1.0) * q - a) + val(kb) * (b - kb * q);
                    let mut k = ka + 1.0;
                    while k < kb {
                        s += val(k) * q;
                        k += 1.0;
                    }
                    s
                }
                None => {
                    let kinks = if *rectify { self.breakpoints(a, b) } else { Vec::new() };
                    adaptive_integral(a, b, &kinks, *quad_tol, |t| Self::smooth_qp(*offset, terms, *rectify, t))
                }
            },
        }
    }

    /// Antiderivative from 0 for the kinds with a closed form.
    fn primitive(&self, t: f64) -> f64 {
        match &self.kind {
            SignalKind::Step { period, cuts, values } => {
                let total: f64 = cell_lengths(cuts, *period).zip(values).map(|(l, v)| l * v).sum();
                let (n, u) = reduce(t, *period);
                let i = cell_of(cuts, u);
                let partial: f64 =
                    cell_lengths(cuts, *period).zip(values).take(i).map(|(l, v)| l * v).sum::<f64>() + values[i] * (u - cuts[i]);
                n * total + partial
            }
            SignalKind::PiecewiseLinear { period, knots, values } => {
                let piece = |i: usize, du: f64| {
                    let slope = (values[i + 1] - values[i]) / (knots[i + 1] - knots[i]);
                    values[i] * du + 0.5 * slope * du * du
                };
                let total: f64 = (0..knots.len() - 1).map(|i| piece(i, knots[i + 1] - knots[i])).sum();
                let (n, u) = reduce(t, *period);
                let i = cell_of(knots, u).min(knots.len() - 2);
                let partial: f64 = (0..i).map(|j| piece(j, knots[j + 1] - knots[j])).sum::<f64>() + piece(i, u - knots[i]);
                n * total + partial
            }
            SignalKind::Spike { period, center, width, amplitude, base } => {
                // periods start at center - period/2
                let full = 2.0 * Self::spike_primitive(*width, *amplitude, *width);
                let (n, u) = reduce(t - center + 0.5 * period, *period);
                let partial =
                    Self::spike_primitive(*width, *amplitude, u - 0.5 * period) + Self::spike_primitive(*width, *amplitude, *width);
                base * t + n * full + partial
            }
            _ => unreachable!("primitive only for closed-form kinds"),
        }
    }

    /// Times in [a, b] where the signal or its derivative may jump.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if b < a {
            return out;
        }
        let mut periodic = |period: f64, offsets: &[f64]| {
            let n0 = ((a - offsets.iter().cloned().fold(f64::NEG_INFINITY, f64::max)) / period).floor();
            let mut n = n0;
            loop {
                let base = n * period;
                if base + offsets.iter().cloned().fold(f64::INFINITY, f64::min) > b {
                    break;
                }
                for &o in offsets {
                    let p = base + o;
                    if p >= a && p <= b {
                        out.push(p);
                    }
                }
                n += 1.0;
            }
        };
        match &self.kind {
            SignalKind::Constant { .. } => {}
            SignalKind::Step { period, cuts, .. } => periodic(*period, cuts),
            SignalKind::PiecewiseLinear { period, knots, .. } => periodic(*period, &knots[..knots.len() - 1]),
            SignalKind::Spike { period, center, width, .. } => {
                let uc = width / (SPIKE_CAP * SPIKE_CAP);
                periodic(*period, &[center - width, center - uc, *center, center + uc, center + width])
            }
            SignalKind::QuasiPeriodic { terms, rectify, quantum, .. } => match quantum {
                Some(q) => {
                    let mut k = (a / q).ceil();
                    while k * q <= b {
                        out.push(k * q);
                        k += 1.0;
                    }
                }
                None => {
                    if *rectify {
                        for h in terms {
                            // zeros of sin(w t + p): t = (k pi - p) / w
                            let pi = std::f64::consts::PI;
                            let mut k = ((h.frequency * a + h.phase) / pi).ceil();
                            loop {
                                let t = (k * pi - h.phase) / h.frequency;
                                if t > b {
                                    break;
                                }
                                out.push(t);
                                k += 1.0;
                            }
                        }
                    }
                }
            },
        }
        quad::dedup_sorted(out, 0.0)
    }

    /// Period, if the signal is periodic.
    pub fn period(&self) -> Option<f64> {
        match &self.kind {
            SignalKind::Constant { .. } => Some(1.0),
            SignalKind::Step { period, .. } | SignalKind::PiecewiseLinear { period, .. } | SignalKind::Spike { period, .. } => {
                Some(*period)
            }
            SignalKind::QuasiPeriodic { terms, .. } => {
                if terms.iter().all(|h| h.amplitude == 0.0) {
                    Some(1.0)
                } else {
                    None
                }
            }
        }
    }

    /// Minimum and maximum of `∫_t^{t+width}` over window starts in [lo, hi].
    /// Starts are sampled on a grid of spacing `width/32` (at most 1/64)
    /// plus every breakpoint and breakpoint minus width, which locates the
    /// exact extremes for piecewise-constant signals.
    pub fn window_integral_range(&self, width: f64, lo: f64, hi: f64) -> (f64, f64) {
        let mut starts = Vec::new();
        let step = (width / 32.0).min(1.0 / 64.0);
        let n = ((hi - lo) / step).ceil() as usize;
        for i in 0..=n {
            starts.push((lo + step * i as f64).min(hi));
        }
        for bp in self.breakpoints(lo, hi + width) {
            for s in [bp, bp - width] {
                if s >= lo && s <= hi {
                    starts.push(s);
                }
            }
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for s in starts {
            let v = self.integral(s, s + width);
            min = min.min(v);
            max = max.max(v);
        }
        (min, max)
    }
}

fn check_period(p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 {
        Ok(())
    } else {
        Err(bad(format!("period must be positive, got {p}")))
    }
}

fn cell_lengths(cuts: &[f64], period: f64) -> impl Iterator<Item = f64> + '_ {
    (0..cuts.len()).map(move |i| if i + 1 < cuts.len() { cuts[i + 1] - cuts[i] } else { period - cuts[i] })
}

/// Composite 8-point Gauss-Legendre, split at `kinks`, refined until two
/// successive levels agree to `tol`.
fn adaptive_integral<F: Fn(f64) -> f64>(a: f64, b: f64, kinks: &[f64], tol: f64, f: F) -> f64 {
    let mut pieces = (b - a).max(1e-300) / 0.25;
    pieces = pieces.ceil().max(1.0);
    let mut prev = quad::integrate(a, b, kinks, (b - a) / pieces, |t, _| f(t));
    for _ in 0..12 {
        pieces *= 2.0;
        let next = quad::integrate(a, b, kinks, (b - a) / pieces, |t, _| f(t));
        if (next - prev).abs() <= tol * (1.0 + (b - a)) {
            return next;
        }
        prev = next;
    }
    prev
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn numeric(sig: &CoefficientSignal, a: f64, b: f64) -> f64 {
        // brute-force midpoint rule on a very fine grid, as an oracle
        let n = 400_000;
        let h = (b - a) / n as f64;
        (0..n).map(|i| sig.value(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn step_integral_matches_oracle() {
        let s = CoefficientSignal::cells(0.5, &[0.0, 4.0]).unwrap();
        assert_eq!(s.value(0.25), 0.0);
        assert_eq!(s.value(0.5), 4.0);
        assert_eq!(s.value_in(0.5, 0.4), 0.0);
        assert_abs_diff_eq!(s.integral(-1.3, 2.2), numeric(&s, -1.3, 2.2), epsilon = 1e-4);
        assert_abs_diff_eq!(s.integral(0.0, 1.0), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn piecewise_linear_integral() {
        let s = CoefficientSignal::new(
            SignalKind::PiecewiseLinear { period: 2.0, knots: vec![0.0, 1.0, 2.0], values: vec![1.0, 3.0, 1.0] },
            1.0,
        )
        .unwrap();
        assert_abs_diff_eq!(s.integral(0.0, 2.0), 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.value(0.5), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.integral(-0.7, 3.1), numeric(&s, -0.7, 3.1), epsilon = 1e-6);
    }

    #[test]
    fn quasi_periodic_quadrature_matches_closed_form() {
        let s = CoefficientSignal::quasi_periodic(1.0, 0.5, 0.5, None).unwrap();
        // closed form: int (sin wt)_+ over [a,b] via -cos/w on positive arcs
        let exact = |a: f64, b: f64| {
            let mut total = b - a;
            for w in [1.0, std::f64::consts::SQRT_2] {
                let mut pts = vec![a];
                pts.extend(s.breakpoints(a, b));
                pts.push(b);
                for p in pts.windows(2) {
                    let mid = 0.5 * (p[0] + p[1]);
                    if (w * mid).sin() > 0.0 {
                        total += 0.5 * ((w * p[0]).cos() - (w * p[1]).cos()) / w;
                    }
                }
            }
            total
        };
        assert_abs_diff_eq!(s.integral(-3.0, 7.5), exact(-3.0, 7.5), epsilon = 1e-11);
    }

    #[test]
    fn quantized_is_cellwise_constant() {
        let q = 1.0 / 64.0;
        let s = CoefficientSignal::quasi_periodic(1.0, 0.5, 0.5, Some(q)).unwrap();
        assert_eq!(s.value(0.3), s.value(0.3 + 1e-4));
        assert_abs_diff_eq!(s.integral(-0.9, 1.7), numeric(&s, -0.9, 1.7), epsilon = 1e-5);
        let bps = s.breakpoints(0.0, 1.0);
        assert_eq!(bps.len(), 65);
    }

    #[test]
    fn spike_integral_is_exact() {
        let s =
            CoefficientSignal::new(SignalKind::Spike { period: 2.0, center: 0.5, width: 0.25, amplitude: 1.0, base: 0.1 }, 0.1).unwrap();
        let one_period = s.integral(-0.5, 1.5);
        let uc = 0.25 / (SPIKE_CAP * SPIKE_CAP);
        let expected = 0.2 + 2.0 * (SPIKE_CAP * uc + 2.0 * 0.5 * (0.5 - uc.sqrt()));
        assert_abs_diff_eq!(one_period, expected, epsilon = 1e-12);
        assert!(s.value(0.5 + 1e-3) > 10.0);
        assert_eq!(s.value(1.5), 0.1);
    }

    #[test]
    fn rejects_negative_and_bad_floor() {
        assert!(CoefficientSignal::new(SignalKind::Constant { value: -1.0 }, 0.0).is_err());
        assert!(CoefficientSignal::new(SignalKind::Constant { value: 1.0 }, 2.0).is_err());
        assert!(CoefficientSignal::cells(1.0, &[1.0, -0.5]).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let s = CoefficientSignal::quasi_periodic(1.0, 0.5, 0.25, Some(1.0 / 64.0)).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        let back: CoefficientSignal = serde_json::from_str(&j).unwrap();
        assert_eq!(s, back);
        let bad: std::result::Result<CoefficientSignal, _> = serde_json::from_str(r#"{"kind":"constant","value":-2}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn window_range_of_alternating_cells() {
        let s = CoefficientSignal::cells(0.5, &[0.0, 4.0]).unwrap();
        let (min, max) = s.window_integral_range(0.25, -1.0, 0.75);
        assert_eq!(min, 0.0);
        assert_abs_diff_eq!(max, 1.0, epsilon = 1e-14);
    }
}
