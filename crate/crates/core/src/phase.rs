//! Histories: continuous functions on [-1, 0] stored on a uniform grid,
//! with the componentwise order and the part metric on the cone interior.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of grid intervals per delay unit.
pub const DEFAULT_NODES_PER_UNIT: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// Cubic Hermite from stored one-sided node derivatives.
    Hermite,
    Linear,
}

/// A function `[-1, 0] -> R^N` sampled at `-1 + i/M`, `i = 0..=M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    dim: usize,
    per_unit: usize,
    samples: Vec<f64>,
    /// Left and right derivatives at each node (Hermite only).
    d_left: Vec<f64>,
    d_right: Vec<f64>,
    interpolation: Interpolation,
}

impl History {
    fn check_grid(dim: usize, per_unit: usize) -> Result<()> {
        if dim == 0 {
            return Err(Error::InvalidModel("history dimension must be positive".into()));
        }
        if per_unit < 16 {
            return Err(Error::InvalidOptions(format!("history needs at least 16 nodes per unit, got {per_unit}")));
        }
        Ok(())
    }

    /// Builds a Hermite history from node values and one-sided derivatives,
    /// each `(M+1) * N` row-major.
    pub fn from_parts(dim: usize, per_unit: usize, samples: Vec<f64>, d_left: Vec<f64>, d_right: Vec<f64>) -> Result<Self> {
        Self::check_grid(dim, per_unit)?;
        let len = (per_unit + 1) * dim;
        if samples.len() != len || d_left.len() != len || d_right.len() != len {
            return Err(Error::DimensionMismatch { expected: len, got: samples.len() });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("history samples must be finite".into()));
        }
        Ok(History { dim, per_unit, samples, d_left, d_right, interpolation: Interpolation::Hermite })
    }

    /// Piecewise-linear history from node values.
    pub fn from_samples(dim: usize, per_unit: usize, samples: Vec<f64>) -> Result<Self> {
        Self::check_grid(dim, per_unit)?;
        let len = (per_unit + 1) * dim;
        if samples.len() != len {
            return Err(Error::DimensionMismatch { expected: len, got: samples.len() });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("history samples must be finite".into()));
        }
        let zeros = vec![0.0; len];
        Ok(History { dim, per_unit, samples, d_left: zeros.clone(), d_right: zeros, interpolation: Interpolation::Linear })
    }

    pub fn constant(value: &[f64], per_unit: usize) -> Result<Self> {
        let dim = value.len();
        let samples = value.iter().cloned().cycle().take((per_unit + 1) * dim).collect();
        let zeros = vec![0.0; (per_unit + 1) * dim];
        Self::from_parts(dim, per_unit, samples, zeros.clone(), zeros)
    }

    /// Samples a smooth function and its derivative.
    pub fn from_fn<F, D>(dim: usize, per_unit: usize, f: F, df: D) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64>,
        D: Fn(f64) -> Vec<f64>,
    {
        let mut samples = Vec::with_capacity((per_unit + 1) * dim);
        let mut ds = Vec::with_capacity((per_unit + 1) * dim);
        for i in 0..=per_unit {
            let s = -1.0 + i as f64 / per_unit as f64;
            let v = f(s);
            let d = df(s);
            if v.len() != dim || d.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
            samples.extend(v);
            ds.extend(d);
        }
        Self::from_parts(dim, per_unit, samples, ds.clone(), ds)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn per_unit(&self) -> usize {
        self.per_unit
    }

    pub fn len(&self) -> usize {
        self.per_unit + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn node_time(&self, i: usize) -> f64 {
        -1.0 + i as f64 / self.per_unit as f64
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn derivative_left(&self, i: usize) -> &[f64] {
        &self.d_left[i * self.dim..(i + 1) * self.dim]
    }

    pub fn derivative_right(&self, i: usize) -> &[f64] {
        &self.d_right[i * self.dim..(i + 1) * self.dim]
    }

    /// Value at the end point `s = 0`.
    pub fn last(&self) -> &[f64] {
        self.node(self.per_unit)
    }

    /// Value at `s`, using the grid cell containing `anchor` when `s`
    /// sits on a node (so one-sided derivatives are respected).
    pub fn value_into(&self, s: f64, anchor: f64, out: &mut [f64]) {
        let m = self.per_unit as f64;
        let pos = (s + 1.0) * m;
        let apos = (anchor + 1.0) * m;
        let cell = (apos.floor().max(0.0) as usize).min(self.per_unit - 1);
        let h = 1.0 / m;
        let u = (pos - cell as f64).clamp(0.0, 1.0);
        let (i0, i1) = (cell * self.dim, (cell + 1) * self.dim);
        match self.interpolation {
            Interpolation::Linear => {
                for k in 0..self.dim {
                    out[k] = self.samples[i0 + k] * (1.0 - u) + self.samples[i1 + k] * u;
                }
            }
            Interpolation::Hermite => {
                let u2 = u * u;
                let u3 = u2 * u;
                let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
                let h10 = u3 - 2.0 * u2 + u;
                let h01 = -2.0 * u3 + 3.0 * u2;
                let h11 = u3 - u2;
                for k in 0..self.dim {
                    out[k] = h00 * self.samples[i0 + k]
                        + h10 * h * self.d_right[i0 + k]
                        + h01 * self.samples[i1 + k]
                        + h11 * h * self.d_left[i1 + k];
                }
            }
        }
        // exact at nodes
        if u == 0.0 {
            out.copy_from_slice(&self.samples[i0..i0 + self.dim]);
        } else if u == 1.0 {
            out.copy_from_slice(&self.samples[i1..i1 + self.dim]);
        }
    }

    pub fn value(&self, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.value_into(s, s, &mut out);
        out
    }

    fn same_grid(&self, other: &History) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        if self.per_unit != other.per_unit {
            return Err(Error::GridMismatch { left: self.per_unit, right: other.per_unit });
        }
        Ok(())
    }

    /// `self <= other` at every node and component, up to slack `eta`.
    pub fn order_leq(&self, other: &History, eta: f64) -> Result<bool> {
        self.same_grid(other)?;
        Ok(self.samples.iter().zip(&other.samples).all(|(a, b)| *a <= *b + eta))
    }

    /// `self <= other` and not equal.
    pub fn order_lt(&self, other: &History, eta: f64) -> Result<bool> {
        Ok(self.order_leq(other, eta)? && self.samples != other.samples)
    }

    /// Strict inequality at every node and component.
    pub fn order_ll(&self, other: &History) -> Result<bool> {
        self.same_grid(other)?;
        Ok(self.samples.iter().zip(&other.samples).all(|(a, b)| a < b))
    }

    /// `max_{nodes, i} (self_i - other_i)`: positive iff `self <= other` fails.
    pub fn order_excess(&self, other: &History) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self.samples.iter().zip(&other.samples).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn min_value(&self) -> f64 {
        self.samples.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &History) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self.samples.iter().zip(&other.samples).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// `max |log(other_i(s) / self_i(s))|` over nodes, for histories in
    /// the interior of the positive cone.
    pub fn part_metric(&self, other: &History) -> Result<f64> {
        self.same_grid(other)?;
        let mut p = 0.0f64;
        for (i, (a, b)) in self.samples.iter().zip(&other.samples).enumerate() {
            if *a <= 0.0 || *b <= 0.0 {
                let node = i / self.dim;
                return Err(Error::NotInInterior(format!("node s = {} has value {}", self.node_time(node), a.min(*b))));
            }
            p = p.max((b / a).ln().abs());
        }
        Ok(p)
    }

    pub fn scale(&self, lambda: f64) -> History {
        let mut h = self.clone();
        for v in h.samples.iter_mut().chain(h.d_left.iter_mut()).chain(h.d_right.iter_mut()) {
            *v *= lambda;
        }
        h
    }

    /// `(1 - theta) self + theta other`.
    pub fn affine(&self, other: &History, theta: f64) -> Result<History> {
        self.same_grid(other)?;
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (1.0 - theta) * x + theta * y).collect::<Vec<_>>();
        let interpolation = if self.interpolation == other.interpolation { self.interpolation } else { Interpolation::Linear };
        Ok(History {
            dim: self.dim,
            per_unit: self.per_unit,
            samples: mix(&self.samples, &other.samples),
            d_left: mix(&self.d_left, &other.d_left),
            d_right: mix(&self.d_right, &other.d_right),
            interpolation,
        })
    }

    /// Adds `other` scaled by `c` (node values and derivatives).
    pub fn add_scaled(&self, other: &History, c: f64) -> Result<History> {
        self.same_grid(other)?;
        let mut h = self.clone();
        for (v, w) in h.samples.iter_mut().zip(&other.samples) {
            *v += c * w;
        }
        for (v, w) in h.d_left.iter_mut().zip(&other.d_left) {
            *v += c * w;
        }
        for (v, w) in h.d_right.iter_mut().zip(&other.d_right) {
            *v += c * w;
        }
        if other.interpolation == Interpolation::Linear {
            h.interpolation = Interpolation::Linear;
        }
        Ok(h)
    }

    /// CSV with header `s,x1,...,xN`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s");
        for k in 0..self.dim {
            out.push_str(&format!(",x{}", k + 1));
        }
        out.push('\n');
        for i in 0..self.len() {
            out.push_str(&format!("{:.16e}", self.node_time(i)));
            for v in self.node(i) {
                out.push_str(&format!(",{:.16e}", v));
            }
            out.push('\n');
        }
        out
    }
}
