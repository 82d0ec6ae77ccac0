//! Method-of-steps integration of ODEs and unit-delay DDEs with
//! breakpoint-aligned steps and cubic Hermite dense output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::phase::{History, DEFAULT_NODES_PER_UNIT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Classical fourth-order Runge-Kutta with fixed step.
    Rk4Fixed,
    /// Embedded Heun/Euler pair with step-size control.
    HeunAdaptive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Base step; must be `2^-k`.
    pub h: f64,
    pub method: Method,
    pub blowup_cap: f64,
    /// Local error tolerance of the adaptive method.
    pub tolerance: f64,
    /// Grid of histories produced by ODE and pulse solves.
    pub nodes_per_unit: usize,
    /// How many delay periods a breakpoint is carried forward as a knot.
    pub breakpoint_depth: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            h: 1.0 / 256.0,
            method: Method::Rk4Fixed,
            blowup_cap: 1e9,
            tolerance: 1e-8,
            nodes_per_unit: DEFAULT_NODES_PER_UNIT,
            breakpoint_depth: 3,
        }
    }
}

impl SolveOptions {
    pub fn with_step(h: f64) -> Self {
        SolveOptions { h, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let k = -self.h.log2();
        if !(self.h > 0.0 && self.h <= 1.0 && k.fract() == 0.0) {
            return Err(Error::InvalidOptions(format!("step must be 2^-k with k >= 0, got {}", self.h)));
        }
        if !(self.blowup_cap > 0.0) {
            return Err(Error::InvalidOptions("blow-up cap must be positive".into()));
        }
        if self.method == Method::HeunAdaptive && !(self.tolerance > 0.0) {
            return Err(Error::InvalidOptions("adaptive tolerance must be positive".into()));
        }
        if self.nodes_per_unit < 16 {
            return Err(Error::InvalidOptions("at least 16 history nodes per unit".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Status {
    Complete,
    #[serde(rename = "blewup")]
    BlewUp {
        at: f64,
    },
}

/// What the delayed argument reads before the segment starts.
#[derive(Clone, Debug, PartialEq)]
enum Past {
    History(History),
    /// Zero on [-1, 0): the pulse initial condition.
    Zero,
    /// Non-delayed problem.
    None,
}

/// Dense solution on [t0, t1] (plus the initial history on [t0-1, t0]
/// for delay problems).
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySegment {
    dim: usize,
    knots: Vec<f64>,
    values: Vec<f64>,
    d_left: Vec<f64>,
    d_right: Vec<f64>,
    past: Past,
    status: Status,
    nodes_per_unit: usize,
}

impl TrajectorySegment {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t0(&self) -> f64 {
        self.knots[0]
    }

    pub fn t1(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn knot_value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn end_value(&self) -> &[f64] {
        self.knot_value(self.knots.len() - 1)
    }

    /// Earliest time with a defined value.
    pub fn start(&self) -> f64 {
        match self.past {
            Past::History(_) => self.t0() - 1.0,
            _ => self.t0(),
        }
    }

    fn cell(&self, anchor: f64) -> usize {
        let n = self.knots.len();
        if n < 2 {
            return 0;
        }
        self.knots.partition_point(|&k| k <= anchor).clamp(1, n - 1) - 1
    }

    /// Dense value at `t`, with `anchor` choosing the cell (and the
    /// one-sided derivatives) when `t` is a knot.
    pub(crate) fn value_anchored(&self, t: f64, anchor: f64, out: &mut [f64]) {
        let t0 = self.t0();
        if anchor < t0 || (t < t0 && anchor <= t0) {
            match &self.past {
                Past::History(h) => h.value_into(t - t0, anchor - t0, out),
                _ => out.fill(0.0),
            }
            return;
        }
        let n = self.dim;
        if self.knots.len() == 1 {
            out.copy_from_slice(&self.values[..n]);
            return;
        }
        let i = self.cell(anchor);
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        if t == a {
            out.copy_from_slice(&self.values[i * n..(i + 1) * n]);
            return;
        }
        if t == b {
            out.copy_from_slice(&self.values[(i + 1) * n..(i + 2) * n]);
            return;
        }
        let h = b - a;
        let u = (t - a) / h;
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        for k in 0..n {
            out[k] = h00 * self.values[i * n + k]
                + h10 * h * self.d_right[i * n + k]
                + h01 * self.values[(i + 1) * n + k]
                + h11 * h * self.d_left[(i + 1) * n + k];
        }
    }

    fn derivative_anchored(&self, t: f64, anchor: f64, out: &mut [f64]) {
        let n = self.dim;
        let i = self.cell(anchor);
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        let h = b - a;
        let u = (t - a) / h;
        let u2 = u * u;
        let d00 = (6.0 * u2 - 6.0 * u) / h;
        let d10 = 3.0 * u2 - 4.0 * u + 1.0;
        let d01 = (-6.0 * u2 + 6.0 * u) / h;
        let d11 = 3.0 * u2 - 2.0 * u;
        for k in 0..n {
            out[k] = d00 * self.values[i * n + k]
                + d10 * self.d_right[i * n + k]
                + d01 * self.values[(i + 1) * n + k]
                + d11 * self.d_left[(i + 1) * n + k];
        }
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let lo = self.start();
        let hi = self.t1();
        if t < lo - 1e-12 || t > hi + 1e-12 {
            if let Status::BlewUp { at } = self.status {
                if t > hi {
                    return Err(Error::BlowUp { at });
                }
            }
            return Err(Error::OutOfDomain { t, lo, hi });
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> Result<Vec<f64>> {
        self.check_domain(t)?;
        let mut out = vec![0.0; self.dim];
        let t = t.clamp(self.start(), self.t1());
        self.value_anchored(t, t, &mut out);
        Ok(out)
    }

    /// The history `x_t(s) = x(t + s)`, `s` in [-1, 0], on the grid of the
    /// initial history (or the configured grid for ODE and pulse solves).
    pub fn extract_history(&self, t: f64) -> Result<History> {
        self.extract_history_with(t, self.nodes_per_unit)
    }

    pub fn extract_history_with(&self, t: f64, per_unit: usize) -> Result<History> {
        self.check_domain(t - 1.0)?;
        self.check_domain(t)?;
        let n = self.dim;
        let t0 = self.t0();
        let mut samples = vec![0.0; (per_unit + 1) * n];
        let mut dl = vec![0.0; (per_unit + 1) * n];
        let mut dr = vec![0.0; (per_unit + 1) * n];
        for i in 0..=per_unit {
            let s = t - 1.0 + i as f64 / per_unit as f64;
            let s = s.clamp(self.start(), self.t1());
            let row = i * n..(i + 1) * n;
            if s < t0 {
                if let Past::History(h) = &self.past {
                    let r = s - t0;
                    h.value_into(r, r, &mut samples[row.clone()]);
                    let pos = (r + 1.0) * h.per_unit() as f64;
                    if pos.fract() == 0.0 {
                        let j = pos as usize;
                        dl[row.clone()].copy_from_slice(h.derivative_left(j));
                        dr[row].copy_from_slice(h.derivative_right(j));
                    } else {
                        let eps = 1e-7;
                        let mut a = vec![0.0; n];
                        let mut b = vec![0.0; n];
                        h.value_into(r - eps, r, &mut a);
                        h.value_into(r + eps, r, &mut b);
                        for k in 0..n {
                            dl[i * n + k] = (b[k] - a[k]) / (2.0 * eps);
                            dr[i * n + k] = dl[i * n + k];
                        }
                    }
                }
                continue;
            }
            match self.knots.binary_search_by(|k| k.partial_cmp(&s).unwrap()) {
                Ok(j) => {
                    samples[row.clone()].copy_from_slice(&self.values[j * n..(j + 1) * n]);
                    if j == 0 {
                        if let Past::History(h) = &self.past {
                            dl[row.clone()].copy_from_slice(h.derivative_left(h.per_unit()));
                        } else {
                            dl[row.clone()].copy_from_slice(&self.d_right[..n]);
                        }
                    } else {
                        dl[row.clone()].copy_from_slice(&self.d_left[j * n..(j + 1) * n]);
                    }
                    dr[row].copy_from_slice(&self.d_right[j * n..(j + 1) * n]);
                }
                Err(_) => {
                    self.value_anchored(s, s, &mut samples[row.clone()]);
                    self.derivative_anchored(s, s, &mut dl[row.clone()]);
                    dr[row.clone()].copy_from_slice(&dl[row]);
                }
            }
        }
        History::from_parts(n, per_unit, samples, dl, dr)
    }

    /// Samples on the knots, as CSV with header `t,x1,...,xN`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for k in 0..self.dim {
            out.push_str(&format!(",x{}", k + 1));
        }
        out.push('\n');
        if let Past::History(h) = &self.past {
            for i in 0..h.per_unit() {
                out.push_str(&format!("{:.16e}", self.t0() + h.node_time(i)));
                for v in h.node(i) {
                    out.push_str(&format!(",{:.16e}", v));
                }
                out.push('\n');
            }
        }
        for (i, t) in self.knots.iter().enumerate() {
            out.push_str(&format!("{:.16e}", t));
            for v in self.knot_value(i) {
                out.push_str(&format!(",{:.16e}", v));
            }
            out.push('\n');
        }
        out
    }
}

/// Mandatory step ends in [a, b]: multiples of `grid`, the field's
/// breakpoints, and breakpoints carried forward by whole delays.
fn knots_in(f: &VectorField, a: f64, b: f64, grid: f64, origin: f64, depth: usize, extra: &[f64]) -> Vec<f64> {
    let mut pts = vec![a, b];
    let mut k = (a / grid).ceil();
    while k * grid < b {
        pts.push(k * grid);
        k += 1.0;
    }
    for j in 0..=depth {
        let shift = j as f64;
        if a - shift < origin - 1e-12 && j > 0 {
            break;
        }
        for p in f.breakpoints((a - shift).max(origin), b - shift) {
            pts.push(p + shift);
        }
    }
    pts.extend(extra.iter().cloned().filter(|&p| p > a && p < b));
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    // drop points within 1e-12 of an earlier point, keeping a and b
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for p in pts {
        if p < a || p > b {
            continue;
        }
        if let Some(&last) = out.last() {
            if p - last <= 1e-12 {
                if p == b {
                    *out.last_mut().unwrap() = b;
                }
                continue;
            }
        }
        out.push(p);
    }
    if *out.last().unwrap() != b {
        out.push(b);
    }
    if out[0] != a {
        out.insert(0, a);
    }
    out
}

struct Integrator<'a> {
    f: &'a VectorField,
    opts: &'a SolveOptions,
    seg: TrajectorySegment,
    delayed: bool,
    y0: Vec<f64>,
    ym: Vec<f64>,
    y1: Vec<f64>,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> Integrator<'a> {
    fn new(f: &'a VectorField, opts: &'a SolveOptions, t0: f64, x0: &[f64], past: Past, per_unit: usize) -> Self {
        let n = x0.len();
        let delayed = !matches!(past, Past::None);
        Integrator {
            f,
            opts,
            seg: TrajectorySegment {
                dim: n,
                knots: vec![t0],
                values: x0.to_vec(),
                d_left: vec![0.0; n],
                d_right: vec![0.0; n],
                past,
                status: Status::Complete,
                nodes_per_unit: per_unit,
            },
            delayed,
            y0: vec![0.0; n],
            ym: vec![0.0; n],
            y1: vec![0.0; n],
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            tmp: vec![0.0; n],
        }
    }

    fn eval(&self, t: f64, anchor: f64, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        if self.delayed {
            self.f.eval(t, anchor, x, y, out);
        } else {
            self.f.eval(t, anchor, x, x, out);
        }
        if out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite { t, x: x.to_vec(), y: y.to_vec() })
        }
    }

    fn delayed_into(&self, t: f64, anchor: f64, out: &mut [f64]) {
        if self.delayed {
            self.seg.value_anchored(t - 1.0, anchor - 1.0, out);
        }
    }

    fn current(&self) -> Vec<f64> {
        self.seg.end_value().to_vec()
    }

    /// Appends a step ending at `tb` with value `xb`; returns false on blow-up.
    fn push(&mut self, tb: f64, xb: &[f64], d_right_a: &[f64], d_left_b: &[f64]) -> bool {
        let n = self.seg.dim;
        let last = self.seg.knots.len() - 1;
        self.seg.d_right[last * n..(last + 1) * n].copy_from_slice(d_right_a);
        self.seg.knots.push(tb);
        self.seg.values.extend_from_slice(xb);
        self.seg.d_left.extend_from_slice(d_left_b);
        self.seg.d_right.extend_from_slice(d_left_b);
        let norm = xb.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm >= self.opts.blowup_cap {
            self.seg.status = Status::BlewUp { at: tb };
            return false;
        }
        true
    }

    fn rk4_step(&mut self, ta: f64, tb: f64) -> Result<bool> {
        let n = self.seg.dim;
        let h = tb - ta;
        let m = 0.5 * (ta + tb);
        let x = self.current();
        let mut y0 = std::mem::take(&mut self.y0);
        let mut ym = std::mem::take(&mut self.ym);
        let mut y1 = std::mem::take(&mut self.y1);
        let mut k = std::mem::take(&mut self.k);
        let mut tmp = std::mem::take(&mut self.tmp);
        self.delayed_into(ta, m, &mut y0);
        self.delayed_into(m, m, &mut ym);
        self.delayed_into(tb, m, &mut y1);
        self.eval(ta, m, &x, &y0, &mut k[0])?;
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k[0][i];
        }
        self.eval(m, m, &tmp, &ym, &mut k[1])?;
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k[1][i];
        }
        self.eval(m, m, &tmp, &ym, &mut k[2])?;
        for i in 0..n {
            tmp[i] = x[i] + h * k[2][i];
        }
        self.eval(tb, m, &tmp, &y1, &mut k[3])?;
        let xb: Vec<f64> = (0..n).map(|i| x[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i])).collect();
        let mut dl = vec![0.0; n];
        self.eval(tb, m, &xb, &y1, &mut dl)?;
        let ok = self.push(tb, &xb, &k[0], &dl);
        self.y0 = y0;
        self.ym = ym;
        self.y1 = y1;
        self.k = k;
        self.tmp = tmp;
        Ok(ok)
    }

    /// Adaptive Heun/Euler substeps across [ta, tb]; returns false on blow-up.
    fn heun_cell(&mut self, ta: f64, tb: f64) -> Result<bool> {
        let n = self.seg.dim;
        let tol = self.opts.tolerance;
        let mut t = ta;
        let mut h = (tb - ta).min(self.opts.h);
        let mut y0 = vec![0.0; n];
        let mut y1 = vec![0.0; n];
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        while t < tb {
            if t + h > tb || tb - (t + h) < 1e-12 {
                h = tb - t;
            }
            let te = if h == tb - t { tb } else { t + h };
            let m = 0.5 * (t + te);
            let x = self.current();
            self.delayed_into(t, m, &mut y0);
            self.delayed_into(te, m, &mut y1);
            self.eval(t, m, &x, &y0, &mut k1)?;
            let pred: Vec<f64> = (0..n).map(|i| x[i] + h * k1[i]).collect();
            self.eval(te, m, &pred, &y1, &mut k2)?;
            let err = (0..n).map(|i| 0.5 * h * (k2[i] - k1[i]).abs() / (1.0 + x[i].abs())).fold(0.0, f64::max);
            if err <= tol || h <= 1e-10 {
                let xb: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * (k1[i] + k2[i])).collect();
                let mut dl = vec![0.0; n];
                self.eval(te, m, &xb, &y1, &mut dl)?;
                if !self.push(te, &xb, &k1, &dl) {
                    return Ok(false);
                }
                t = te;
                let grow = if err > 0.0 { (0.9 * (tol / err).sqrt()).min(4.0) } else { 4.0 };
                h = (h * grow).min(self.opts.h);
            } else {
                h *= (0.9 * (tol / err).sqrt()).max(0.1);
            }
        }
        Ok(true)
    }

    fn run(mut self, t_end: f64, origin: f64, extra_first: &[f64]) -> Result<TrajectorySegment> {
        let grid = match self.opts.method {
            Method::Rk4Fixed => self.opts.h,
            Method::HeunAdaptive => 1.0,
        };
        let t0 = self.seg.t0();
        let mut a = t0;
        while a < t_end {
            // one delay unit at a time
            let b = if self.delayed { ((a - origin).floor() + 1.0 + origin).min(t_end) } else { t_end };
            let b = if b <= a { (a + 1.0).min(t_end) } else { b };
            let extra: &[f64] = if a == t0 { extra_first } else { &[] };
            let knots = knots_in(self.f, a, b, grid, origin, if self.delayed { self.opts.breakpoint_depth } else { 0 }, extra);
            for w in knots.windows(2) {
                let ok = match self.opts.method {
                    Method::Rk4Fixed => self.rk4_step(w[0], w[1])?,
                    Method::HeunAdaptive => self.heun_cell(w[0], w[1])?,
                };
                if !ok {
                    return Ok(self.seg);
                }
            }
            a = b;
        }
        Ok(self.seg)
    }
}

/// Solves `x' = f(t, x)` from `x(t0) = x0` up to `t1`.
pub fn solve_ode(f: &VectorField, t0: f64, x0: &[f64], t1: f64, opts: &SolveOptions) -> Result<TrajectorySegment> {
    opts.validate()?;
    if x0.len() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: x0.len() });
    }
    if !(t1 > t0) {
        return Err(Error::InvalidOptions(format!("end time {t1} must exceed start {t0}")));
    }
    Integrator::new(f, opts, t0, x0, Past::None, opts.nodes_per_unit).run(t1, t0, &[])
}

/// Solves `x'(t) = f(t, x(t), x(t-1))` with `x = phi` on [-1, 0], up to `t1`.
pub fn solve_dde(f: &VectorField, phi: &History, t1: f64, opts: &SolveOptions) -> Result<TrajectorySegment> {
    opts.validate()?;
    if phi.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: phi.dim() });
    }
    if !(t1 > 0.0) {
        return Err(Error::InvalidOptions(format!("horizon must be positive, got {t1}")));
    }
    let ratio = opts.h * phi.per_unit() as f64;
    if ratio.fract() != 0.0 && (1.0 / ratio).fract() != 0.0 {
        return Err(Error::InvalidOptions(format!("history grid 1/{} incompatible with step {}", phi.per_unit(), opts.h)));
    }
    // history nodes shifted by one delay are kinks of the delayed input
    let extra: Vec<f64> = if (phi.per_unit() as f64) * opts.h > 1.0 || opts.method == Method::HeunAdaptive {
        (1..phi.per_unit()).map(|i| phi.node_time(i) + 1.0).collect()
    } else {
        Vec::new()
    };
    let per_unit = phi.per_unit();
    let x0 = phi.last().to_vec();
    Integrator::new(f, opts, 0.0, &x0, Past::History(phi.clone()), per_unit).run(t1, 0.0, &extra)
}

/// Solves the delay problem from the pulse initial condition: `x(0) = x0`
/// and the delayed argument reads zero on [-1, 0).
pub fn solve_dde_pulse(f: &VectorField, x0: &[f64], t1: f64, opts: &SolveOptions) -> Result<TrajectorySegment> {
    opts.validate()?;
    if x0.len() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: x0.len() });
    }
    if !(t1 > 0.0) {
        return Err(Error::InvalidOptions(format!("horizon must be positive, got {t1}")));
    }
    Integrator::new(f, opts, 0.0, x0, Past::Zero, opts.nodes_per_unit).run(t1, 0.0, &[])
}
