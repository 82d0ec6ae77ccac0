//! Computable distances between vector fields built from integral
//! seminorms, and moduli of continuity derived from m-bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{SampledFunction, VectorField};
use crate::quad::{cells, dedup_sorted, gauss8};
use crate::signal::CoefficientSignal;

/// One seminorm `p_{I,x}`: an interval and a state point (`x` and, for
/// delay fields, the delayed value `y`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisTerm {
    pub interval: (f64, f64),
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormBasis {
    pub terms: Vec<BasisTerm>,
}

impl SeminormBasis {
    /// Intervals `[-q, q]` for `q` in {1, 2, 4, 8}, `points_per_interval`
    /// seeded points from the lattice `{0, 1/4, ..., 4}^N`, weights `2^-k`.
    pub fn standard(dim: usize, points_per_interval: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        let mut k = 1;
        for q in [1.0, 2.0, 4.0, 8.0] {
            for _ in 0..points_per_interval {
                let mut draw = || (0..dim).map(|_| rng.gen_range(0..=16) as f64 * 0.25).collect::<Vec<f64>>();
                let x = draw();
                let y = draw();
                terms.push(BasisTerm { interval: (-q, q), x, y, weight: 0.5f64.powi(k) });
                k += 1;
            }
        }
        SeminormBasis { terms }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let total: f64 = self.terms.iter().map(|t| t.weight).sum();
        if total > 1.0 + 1e-12 || self.terms.iter().any(|t| !(t.weight > 0.0)) {
            return Err(Error::InvalidOptions(format!("basis weights must be positive with sum <= 1, got {total}")));
        }
        for t in &self.terms {
            if t.x.len() != dim || t.y.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: t.x.len() });
            }
            if !(t.interval.1 > t.interval.0) {
                return Err(Error::InvalidOptions(format!("empty interval {:?}", t.interval)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Integral of the norm of the difference.
    Tp,
    /// Norm of the integral of the difference.
    SigmaP,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub metric: Metric,
    pub value: f64,
    pub terms: Vec<f64>,
}

fn joint_cells(f: &VectorField, g: &VectorField, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut bps = f.breakpoints(a, b);
    bps.extend(g.breakpoints(a, b));
    bps.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cells(a, b, &dedup_sorted(bps, 1e-12), 1.0 / 8.0)
}

fn seminorm(f: &VectorField, g: &VectorField, term: &BasisTerm, metric: Metric) -> f64 {
    let n = f.dim();
    let mut fv = vec![0.0; n];
    let mut gv = vec![0.0; n];
    let (a, b) = term.interval;
    let mut vec_int = vec![0.0; n];
    let mut abs_int = 0.0;
    for (p, q) in joint_cells(f, g, a, b) {
        let mid = 0.5 * (p + q);
        match metric {
            Metric::Tp => {
                abs_int += gauss8(p, q, |t, _| {
                    f.eval(t, mid, &term.x, &term.y, &mut fv);
                    g.eval(t, mid, &term.x, &term.y, &mut gv);
                    fv.iter().zip(&gv).fold(0.0, |m, (u, v)| m.max((u - v).abs()))
                });
            }
            Metric::SigmaP => {
                for (k, slot) in vec_int.iter_mut().enumerate() {
                    *slot += gauss8(p, q, |t, _| {
                        f.eval(t, mid, &term.x, &term.y, &mut fv);
                        g.eval(t, mid, &term.x, &term.y, &mut gv);
                        fv[k] - gv[k]
                    });
                }
            }
        }
    }
    match metric {
        Metric::Tp => abs_int,
        Metric::SigmaP => vec_int.iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

/// `sum_k w_k min(1, p_k(f - g))` over the basis.
pub fn distance(f: &VectorField, g: &VectorField, basis: &SeminormBasis, metric: Metric) -> Result<DistanceReport> {
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: g.dim() });
    }
    basis.validate(f.dim())?;
    let terms: Vec<f64> = basis.terms.par_iter().map(|t| seminorm(f, g, t, metric)).collect();
    let value = basis.terms.iter().zip(&terms).map(|(t, p)| t.weight * p.min(1.0)).sum();
    Ok(DistanceReport { metric, value, terms })
}

pub fn tp_distance(f: &VectorField, g: &VectorField, basis: &SeminormBasis) -> Result<DistanceReport> {
    distance(f, g, basis, Metric::Tp)
}

pub fn sigma_p_distance(f: &VectorField, g: &VectorField, basis: &SeminormBasis) -> Result<DistanceReport> {
    distance(f, g, basis, Metric::SigmaP)
}

/// Nondecreasing function on `[0, s_max]` with `theta(0) = 0`, tabulated
/// and linearly interpolated; constant beyond the table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Modulus {
    pub s: Vec<f64>,
    pub theta: Vec<f64>,
}

impl Modulus {
    pub fn new(s: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        if s.len() != theta.len() || s.is_empty() {
            return Err(Error::InvalidOptions("modulus table needs matching nonempty columns".into()));
        }
        if s[0] != 0.0 || theta[0] != 0.0 {
            return Err(Error::InvalidOptions("modulus must start at theta(0) = 0".into()));
        }
        if s.windows(2).any(|w| w[1] <= w[0]) || theta.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidOptions("modulus must be tabulated on increasing s and be nondecreasing".into()));
        }
        Ok(Modulus { s, theta })
    }

    pub fn zero() -> Self {
        Modulus { s: vec![0.0], theta: vec![0.0] }
    }

    /// `theta(s) = c s` on [0, s_max].
    pub fn linear(c: f64, s_max: f64) -> Self {
        Modulus { s: vec![0.0, s_max], theta: vec![0.0, c * s_max] }
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let i = self.s.partition_point(|&p| p <= s);
        if i >= self.s.len() {
            return *self.theta.last().unwrap();
        }
        let (s0, s1) = (self.s[i - 1], self.s[i]);
        let (t0, t1) = (self.theta[i - 1], self.theta[i]);
        t0 + (t1 - t0) * (s - s0) / (s1 - s0)
    }
}

/// `theta(s) = sup_{t in I, m in family} int_t^{t+s} m` tabulated at
/// `n + 1` points on [0, |I|].
pub fn moduli_from_mbounds(family: &[CoefficientSignal], interval: (f64, f64), n: usize) -> Result<Modulus> {
    let (lo, hi) = interval;
    if !(hi > lo) || n == 0 {
        return Err(Error::InvalidOptions(format!("bad modulus table over {interval:?} with {n} steps")));
    }
    let len = hi - lo;
    let s: Vec<f64> = (0..=n).map(|i| len * i as f64 / n as f64).collect();
    let mut theta = vec![0.0; n + 1];
    for i in 1..=n {
        let w = family.iter().map(|m| m.window_integral_range(s[i], lo, hi).1).fold(0.0, f64::max);
        theta[i] = w.max(theta[i - 1]);
    }
    Modulus::new(s, theta)
}

/// The same modulus from sampled m-bounds (trapezoid rule between samples,
/// window starts at the sample times inside `I`).
pub fn moduli_from_sampled(family: &[SampledFunction], interval: (f64, f64), n: usize) -> Result<Modulus> {
    let (lo, hi) = interval;
    if !(hi > lo) || n == 0 {
        return Err(Error::InvalidOptions(format!("bad modulus table over {interval:?} with {n} steps")));
    }
    let len = hi - lo;
    let s: Vec<f64> = (0..=n).map(|i| len * i as f64 / n as f64).collect();
    let mut theta = vec![0.0; n + 1];
    for m in family {
        if m.times.len() < 2 || m.times.len() != m.values.len() {
            return Err(Error::InvalidOptions("sampled m-bound needs at least two matching samples".into()));
        }
        let mut cum = vec![0.0; m.times.len()];
        for i in 1..m.times.len() {
            cum[i] = cum[i - 1] + 0.5 * (m.values[i] + m.values[i - 1]) * (m.times[i] - m.times[i - 1]);
        }
        let prim = |t: f64| -> f64 {
            let i = m.times.partition_point(|&p| p <= t).clamp(1, m.times.len() - 1);
            let (t0, t1) = (m.times[i - 1], m.times[i]);
            let r = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            let v0 = m.values[i - 1];
            let vt = v0 + r * (m.values[i] - v0);
            cum[i - 1] + 0.5 * (v0 + vt) * r * (t1 - t0)
        };
        for i in 1..=n {
            for &t in m.times.iter().filter(|&&t| t >= lo && t <= hi) {
                theta[i] = f64::max(theta[i], prim(t + s[i]) - prim(t));
            }
        }
    }
    for i in 1..=n {
        theta[i] = theta[i].max(theta[i - 1]);
    }
    Modulus::new(s, theta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThetaDOptions {
    /// Lattice values per axis for constant candidates.
    pub lattice: usize,
    pub random_paths: usize,
    /// Knots per candidate path.
    pub knots: usize,
    pub seed: u64,
}

impl Default for ThetaDOptions {
    fn default() -> Self {
        ThetaDOptions { lattice: 9, random_paths: 64, knots: 32, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateFamily {
    Constant,
    Random,
    Greedy,
}

/// A lower bound for `sup_x int_I |f - g|(t, x(t), y) dt` over paths with
/// `|x| <= j` and modulus `theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaDReport {
    pub value: f64,
    pub lower_bound: bool,
    pub family: CandidateFamily,
}

struct PathIntegrand<'a> {
    f: &'a VectorField,
    g: &'a VectorField,
    y: &'a [f64],
    bps: Vec<f64>,
}

impl PathIntegrand<'_> {
    /// Integral over [a, b] along the segment from `xa` to `xb`.
    fn segment(&self, a: f64, b: f64, xa: &[f64], xb: &[f64]) -> f64 {
        let n = xa.len();
        let mut fv = vec![0.0; n];
        let mut gv = vec![0.0; n];
        let mut x = vec![0.0; n];
        let inner: Vec<f64> = self.bps.iter().cloned().filter(|&p| p > a && p < b).collect();
        cells(a, b, &inner, b - a)
            .into_iter()
            .map(|(p, q)| {
                let mid = 0.5 * (p + q);
                gauss8(p, q, |t, _| {
                    let r = (t - a) / (b - a);
                    for k in 0..n {
                        x[k] = xa[k] + r * (xb[k] - xa[k]);
                    }
                    self.f.eval(t, mid, &x, self.y, &mut fv);
                    self.g.eval(t, mid, &x, self.y, &mut gv);
                    fv.iter().zip(&gv).fold(0.0, |m, (u, v)| m.max((u - v).abs()))
                })
            })
            .sum()
    }

    fn path(&self, times: &[f64], xs: &[Vec<f64>]) -> f64 {
        (0..times.len() - 1).map(|i| self.segment(times[i], times[i + 1], &xs[i], &xs[i + 1])).sum()
    }
}

fn admissible(times: &[f64], xs: &[Vec<f64>], j: f64, theta: &Modulus) -> bool {
    for (i, a) in xs.iter().enumerate() {
        if a.iter().any(|v| v.abs() > j) {
            return false;
        }
        for k in i + 1..xs.len() {
            let d = a.iter().zip(&xs[k]).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            if d > theta.eval(times[k] - times[i]) + 1e-15 {
                return false;
            }
        }
    }
    true
}

/// Seminorm of the `T_ThetaD` family, approximated from below by constant
/// lattice paths, random admissible paths and greedy paths that move by
/// the largest admissible step towards the larger integrand.
pub fn theta_d_seminorm(
    f: &VectorField,
    g: &VectorField,
    interval: (f64, f64),
    y: &[f64],
    j: f64,
    theta: &Modulus,
    opts: &ThetaDOptions,
) -> Result<ThetaDReport> {
    let n = f.dim();
    if g.dim() != n || y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    let (a, b) = interval;
    if !(b > a) {
        return Err(Error::InvalidOptions(format!("empty interval {interval:?}")));
    }
    let mut bps = f.breakpoints(a, b);
    bps.extend(g.breakpoints(a, b));
    bps.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let ig = PathIntegrand { f, g, y, bps: dedup_sorted(bps, 1e-12) };

    // constant lattice candidates, capped at 4096 points
    let mut per_axis = opts.lattice.max(1);
    while per_axis > 1 && per_axis.pow(n as u32) > 4096 {
        per_axis -= 1;
    }
    let axis: Vec<f64> =
        if per_axis == 1 { vec![0.0] } else { (0..per_axis).map(|i| -j + 2.0 * j * i as f64 / (per_axis - 1) as f64).collect() };
    let total = per_axis.pow(n as u32);
    let best_const = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let c: Vec<f64> = (0..n)
                .map(|_| {
                    let v = axis[idx % per_axis];
                    idx /= per_axis;
                    v
                })
                .collect();
            (ig.segment(a, b, &c, &c), c)
        })
        .reduce_with(|p, q| if q.0 > p.0 { q } else { p })
        .unwrap();
    let mut best = (best_const.0, CandidateFamily::Constant);

    let k = opts.knots.max(2);
    let times: Vec<f64> = (0..=k).map(|i| a + (b - a) * i as f64 / k as f64).collect();
    let step = theta.eval((b - a) / k as f64);
    if step > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..opts.random_paths {
            let mut xs = vec![(0..n).map(|_| rng.gen_range(-j..=j)).collect::<Vec<f64>>()];
            for _ in 0..k {
                let prev = xs.last().unwrap();
                xs.push(prev.iter().map(|v| (v + rng.gen_range(-step..=step)).clamp(-j, j)).collect());
            }
            if admissible(&times, &xs, j, theta) {
                let v = ig.path(&times, &xs);
                if v > best.0 {
                    best = (v, CandidateFamily::Random);
                }
            }
        }
        // greedy: from the best constant, pick per cell the move in
        // {-step, 0, +step} (all components together) with the larger integral
        let mut xs = vec![best_const.1.clone()];
        for i in 0..k {
            let prev = xs.last().unwrap().clone();
            let mut choice = (f64::NEG_INFINITY, prev.clone());
            for dir in [-1.0, 0.0, 1.0] {
                let cand: Vec<f64> = prev.iter().map(|v| (v + dir * step).clamp(-j, j)).collect();
                let val = ig.segment(times[i], times[i + 1], &prev, &cand);
                if val > choice.0 {
                    choice = (val, cand);
                }
            }
            xs.push(choice.1);
        }
        if admissible(&times, &xs, j, theta) {
            let v = ig.path(&times, &xs);
            if v > best.0 {
                best = (v, CandidateFamily::Greedy);
            }
        }
    }
    Ok(ThetaDReport { value: best.0, lower_bound: true, family: best.1 })
}
