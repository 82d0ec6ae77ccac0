//! The skew-product semiflow `(t, f, phi) -> (f_t, x_t(., f, phi))` and
//! sampled harnesses for monotonicity, strict order, sublinearity and
//! continuous dependence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{VectorField, Verdict};
use crate::phase::History;
use crate::solver::{solve_dde, SolveOptions, Status, TrajectorySegment};
use crate::topologies::{tp_distance, SeminormBasis};

/// Solves from `phi` and checks that the solution reached `t`.
pub fn solve_checked(f: &VectorField, phi: &History, t: f64, opts: &SolveOptions) -> Result<TrajectorySegment> {
    let seg = solve_dde(f, phi, t, opts)?;
    if let Status::BlewUp { at } = seg.status() {
        return Err(Error::BlowUp { at });
    }
    Ok(seg)
}

/// `Phi(t, f, phi) = (f_t, x_t(., f, phi))`.
pub fn flow(t: f64, f: &VectorField, phi: &History, opts: &SolveOptions) -> Result<(VectorField, History)> {
    if t < 0.0 {
        return Err(Error::InvalidOptions(format!("flow time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok((f.clone(), phi.clone()));
    }
    let seg = solve_checked(f, phi, t, opts)?;
    Ok((f.translate(t), seg.extract_history(t)?))
}

/// `||Phi(t + s) - Phi(t, Phi(s))||` on the history grid.
pub fn semigroup_defect(f: &VectorField, phi: &History, t: f64, s: f64, opts: &SolveOptions) -> Result<f64> {
    let (_, direct) = flow(t + s, f, phi, opts)?;
    let (fs, mid) = flow(s, f, phi, opts)?;
    let (_, composed) = flow(t, &fs, &mid, opts)?;
    direct.sup_distance(&composed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessWitness {
    pub preset: String,
    pub t: f64,
    pub phi: Vec<f64>,
    pub other: Option<Vec<f64>>,
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessResult {
    pub property: String,
    pub trials: usize,
    /// Signed: nonpositive means no counterexample was seen.
    pub worst_violation: f64,
    pub tolerance: f64,
    /// Integrator error allowance estimated by step halving.
    pub budget: f64,
    /// Smallest strict gap (strict order) or sublinearity margin, if measured.
    pub margin: Option<f64>,
    pub blowups: usize,
    pub witness: Option<HarnessWitness>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessOptions {
    pub trials: usize,
    pub horizon: f64,
    pub seed: u64,
    pub tolerance: f64,
    /// Spacing of the comparison times.
    pub grid_step: f64,
    pub lambdas: Vec<f64>,
    pub solve: SolveOptions,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        HarnessOptions {
            trials: 100,
            horizon: 10.0,
            seed: 0,
            tolerance: 1e-6,
            grid_step: 1.0 / 16.0,
            lambdas: (1..=9).map(|k| k as f64 / 10.0).collect(),
            solve: SolveOptions::default(),
        }
    }
}

fn trial_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64 + 1);
    rng
}

/// Smooth history `c0 + c1 sin(w s + p)` per component, bounded below by
/// `c0 / 2 > 0`.
pub fn random_positive_history(rng: &mut ChaCha8Rng, dim: usize, per_unit: usize) -> Result<History> {
    let params: Vec<(f64, f64, f64, f64)> = (0..dim)
        .map(|_| {
            let c0 = rng.gen_range(0.2..3.0);
            (c0, rng.gen_range(-0.5..0.5) * c0, rng.gen_range(0.5..6.0), rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let p2 = params.clone();
    History::from_fn(
        dim,
        per_unit,
        move |s| params.iter().map(|&(c0, c1, w, p)| c0 + c1 * (w * s + p).sin()).collect(),
        move |s| p2.iter().map(|&(_, c1, w, p)| c1 * w * (w * s + p).cos()).collect(),
    )
}

/// Nonnegative perturbation: a smooth compactly supported bump of random
/// height, center and width, or (one time in four) a constant shift. With
/// `at_zero` the bump is centered at `s = 0`, so it is positive there.
pub fn random_bump(rng: &mut ChaCha8Rng, dim: usize, per_unit: usize, at_zero: bool) -> Result<History> {
    let height = |rng: &mut ChaCha8Rng| match rng.gen_range(0..3) {
        0 => 10f64.powf(rng.gen_range(-8.0..0.0)),
        _ => rng.gen_range(0.01..2.0),
    };
    if !at_zero && rng.gen_range(0..4) == 0 {
        let c: Vec<f64> = (0..dim).map(|_| height(rng)).collect();
        return History::constant(&c, per_unit);
    }
    let params: Vec<(f64, f64, f64)> = (0..dim)
        .map(|_| {
            let a = height(rng);
            let c = if at_zero { 0.0 } else { rng.gen_range(-1.0..0.0) };
            (a, c, rng.gen_range(0.1..1.0))
        })
        .collect();
    let p2 = params.clone();
    History::from_fn(
        dim,
        per_unit,
        move |s| {
            params
                .iter()
                .map(|&(a, c, w)| {
                    let u = (s - c) / w;
                    if u.abs() < 1.0 {
                        a * (1.0 - u * u).powi(2)
                    } else {
                        0.0
                    }
                })
                .collect()
        },
        move |s| {
            p2.iter()
                .map(|&(a, c, w)| {
                    let u = (s - c) / w;
                    if u.abs() < 1.0 {
                        -4.0 * a * u * (1.0 - u * u) / w
                    } else {
                        0.0
                    }
                })
                .collect()
        },
    )
}

/// Ordered pair `phi <= psi = phi + bump`.
pub fn ordered_pair(rng: &mut ChaCha8Rng, dim: usize, per_unit: usize, strict_at_zero: bool) -> Result<(History, History)> {
    let phi = random_positive_history(rng, dim, per_unit)?;
    let bump = random_bump(rng, dim, per_unit, strict_at_zero)?;
    let psi = phi.add_scaled(&bump, 1.0)?;
    Ok((phi, psi))
}

fn grid(horizon: f64, step: f64) -> Vec<f64> {
    let n = (horizon / step).round() as usize;
    (0..=n).map(|i| (i as f64 * step).min(horizon)).collect()
}

/// Integrator error allowance: four times the largest difference between
/// the solutions with steps `h` and `h/2` on the comparison grid (the
/// step-`h` error is about 16/15 of that difference for a fourth-order
/// method).
pub fn integrator_budget(f: &VectorField, phi: &History, horizon: f64, opts: &SolveOptions) -> Result<f64> {
    let coarse = solve_checked(f, phi, horizon, opts)?;
    let mut fine_opts = opts.clone();
    fine_opts.h = opts.h / 2.0;
    let fine = solve_checked(f, phi, horizon, &fine_opts)?;
    let mut diff = 0.0f64;
    for t in grid(horizon, 1.0 / 16.0) {
        let a = coarse.value(t)?;
        let b = fine.value(t)?;
        for (p, q) in a.iter().zip(&b) {
            diff = diff.max((p - q).abs());
        }
    }
    Ok(4.0 * diff)
}

struct Trial {
    violation: f64,
    t: f64,
    margin: f64,
    blew_up: bool,
    lambda: Option<f64>,
}

fn reduce(
    property: &str,
    label: &str,
    trials: Vec<Trial>,
    inputs: &[(History, Option<History>)],
    tolerance: f64,
    budget: f64,
    margin_needed: bool,
) -> HarnessResult {
    let mut worst = f64::NEG_INFINITY;
    let mut arg = None;
    let mut margin = f64::INFINITY;
    let mut blowups = 0;
    for (i, tr) in trials.iter().enumerate() {
        if tr.blew_up {
            blowups += 1;
            continue;
        }
        margin = margin.min(tr.margin);
        if tr.violation > worst {
            worst = tr.violation;
            arg = Some(i);
        }
    }
    let witness = arg.map(|i| HarnessWitness {
        preset: label.to_string(),
        t: trials[i].t,
        phi: inputs[i].0.samples().to_vec(),
        other: inputs[i].1.as_ref().map(|h| h.samples().to_vec()),
        lambda: trials[i].lambda,
    });
    let worst = if worst.is_finite() { worst } else { 0.0 };
    let ok = worst <= tolerance + budget && (!margin_needed || margin > 0.0);
    HarnessResult {
        property: property.into(),
        trials: trials.len(),
        worst_violation: worst,
        tolerance,
        budget,
        margin: if margin_needed || margin.is_finite() { Some(margin) } else { None },
        blowups,
        witness,
        verdict: Verdict::from_pass(ok),
    }
}

fn sample_pairs(f: &VectorField, opts: &HarnessOptions, strict: bool) -> Result<Vec<(History, History)>> {
    (0..opts.trials).map(|i| ordered_pair(&mut trial_rng(opts.seed, i), f.dim(), opts.solve.nodes_per_unit, strict)).collect()
}

/// Solves from both members of each ordered pair and reports the largest
/// `x(t, f, phi) - x(t, f, psi)` over the grid and components.
pub fn monotonicity_harness(f: &VectorField, label: &str, opts: &HarnessOptions) -> Result<HarnessResult> {
    let pairs = sample_pairs(f, opts, false)?;
    monotonicity_harness_pairs(f, label, &pairs, opts)
}

pub fn monotonicity_harness_pairs(
    f: &VectorField,
    label: &str,
    pairs: &[(History, History)],
    opts: &HarnessOptions,
) -> Result<HarnessResult> {
    for (phi, psi) in pairs {
        if phi.order_excess(psi)? > 0.0 {
            return Err(Error::InvalidOptions("monotonicity pairs must satisfy phi <= psi".into()));
        }
    }
    let times = grid(opts.horizon, opts.grid_step);
    let trials: Vec<Trial> = pairs
        .par_iter()
        .map(|(phi, psi)| -> Result<Trial> {
            let (a, b) = match (solve_checked(f, phi, opts.horizon, &opts.solve), solve_checked(f, psi, opts.horizon, &opts.solve)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(Error::BlowUp { .. }), _) | (_, Err(Error::BlowUp { .. })) => {
                    return Ok(Trial { violation: f64::NEG_INFINITY, t: 0.0, margin: f64::INFINITY, blew_up: true, lambda: None })
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            let mut worst = (f64::NEG_INFINITY, 0.0);
            for &t in &times {
                let (x, y) = (a.value(t)?, b.value(t)?);
                for (p, q) in x.iter().zip(&y) {
                    if p - q > worst.0 {
                        worst = (p - q, t);
                    }
                }
            }
            Ok(Trial { violation: worst.0, t: worst.1, margin: f64::INFINITY, blew_up: false, lambda: None })
        })
        .collect::<Result<_>>()?;
    let budget = budget_for(f, pairs.first().map(|p| &p.1), opts);
    let inputs: Vec<(History, Option<History>)> = pairs.iter().map(|(a, b)| (a.clone(), Some(b.clone()))).collect();
    Ok(reduce("monotonicity", label, trials, &inputs, opts.tolerance, budget, false))
}

fn budget_for(f: &VectorField, phi: Option<&History>, opts: &HarnessOptions) -> f64 {
    phi.and_then(|p| integrator_budget(f, p, opts.horizon, &opts.solve).ok()).unwrap_or(0.0)
}

/// Pairs with `phi <= psi` and `phi_k(0) < psi_k(0)` for every `k`: checks
/// that every component gap stays positive on (0, T] and above the floor
/// `gap_k(0) exp(-int_0^t l_k)` given by the field's l-bound.
pub fn strict_order_harness(f: &VectorField, label: &str, opts: &HarnessOptions) -> Result<HarnessResult> {
    let pairs = sample_pairs(f, opts, true)?;
    strict_order_harness_pairs(f, label, &pairs, opts)
}

pub fn strict_order_harness_pairs(
    f: &VectorField,
    label: &str,
    pairs: &[(History, History)],
    opts: &HarnessOptions,
) -> Result<HarnessResult> {
    let n = f.dim();
    for (phi, psi) in pairs {
        if phi.order_excess(psi)? > 0.0 || phi.last().iter().zip(psi.last()).any(|(a, b)| a >= b) {
            return Err(Error::InvalidOptions("strict order pairs need phi <= psi and phi(0) << psi(0)".into()));
        }
    }
    let times: Vec<f64> = grid(opts.horizon, opts.grid_step).into_iter().filter(|&t| t > 0.0).collect();
    let trials: Vec<Trial> = pairs
        .par_iter()
        .map(|(phi, psi)| -> Result<Trial> {
            let a = solve_checked(f, phi, opts.horizon, &opts.solve)?;
            let b = solve_checked(f, psi, opts.horizon, &opts.solve)?;
            let g0: Vec<f64> = (0..n).map(|k| psi.last()[k] - phi.last()[k]).collect();
            let mut worst = (f64::NEG_INFINITY, 0.0);
            let mut min_gap = f64::INFINITY;
            for &t in &times {
                let (x, y) = (a.value(t)?, b.value(t)?);
                for k in 0..n {
                    let gap = y[k] - x[k];
                    min_gap = min_gap.min(gap);
                    let floor = match f.l_bound_integral(k, 0.0, t) {
                        Some(l) => g0[k] * (-l).exp(),
                        None => 0.0,
                    };
                    if floor - gap > worst.0 {
                        worst = (floor - gap, t);
                    }
                }
            }
            Ok(Trial { violation: worst.0, t: worst.1, margin: min_gap, blew_up: false, lambda: None })
        })
        .collect::<Result<_>>()?;
    let budget = budget_for(f, pairs.first().map(|p| &p.1), opts);
    let inputs: Vec<(History, Option<History>)> = pairs.iter().map(|(a, b)| (a.clone(), Some(b.clone()))).collect();
    Ok(reduce("strict-order", label, trials, &inputs, opts.tolerance, budget, true))
}

/// Checks `x(t, f, l phi) >= l x(t, f, phi)` over the lambda grid, and
/// `x(t, f, phi) >= 0`, for sampled positive histories. The reported
/// margin is the smallest `x(t, f, l phi) - l x(t, f, phi)` over `t >= 1`.
pub fn sublinearity_harness(f: &VectorField, label: &str, opts: &HarnessOptions) -> Result<HarnessResult> {
    let phis: Vec<History> = (0..opts.trials)
        .map(|i| random_positive_history(&mut trial_rng(opts.seed, i), f.dim(), opts.solve.nodes_per_unit))
        .collect::<Result<_>>()?;
    sublinearity_harness_histories(f, label, &phis, opts)
}

pub fn sublinearity_harness_histories(f: &VectorField, label: &str, phis: &[History], opts: &HarnessOptions) -> Result<HarnessResult> {
    for l in &opts.lambdas {
        if !(0.0..=1.0).contains(l) {
            return Err(Error::InvalidOptions(format!("lambda must lie in [0, 1], got {l}")));
        }
    }
    let times = grid(opts.horizon, opts.grid_step);
    let per_phi: Vec<Vec<Trial>> = phis
        .par_iter()
        .map(|phi| -> Result<Vec<Trial>> {
            let base = solve_checked(f, phi, opts.horizon, &opts.solve)?;
            let xs: Vec<Vec<f64>> = times.iter().map(|&t| base.value(t)).collect::<Result<_>>()?;
            let cone = xs.iter().zip(&times).flat_map(|(x, &t)| x.iter().map(move |v| (-v, t))).fold((f64::NEG_INFINITY, 0.0), |m, p| {
                if p.0 > m.0 {
                    p
                } else {
                    m
                }
            });
            let mut out = Vec::with_capacity(opts.lambdas.len());
            for &l in &opts.lambdas {
                let seg = solve_checked(f, &phi.scale(l), opts.horizon, &opts.solve)?;
                let mut worst = cone;
                let mut margin = f64::INFINITY;
                for (i, &t) in times.iter().enumerate() {
                    let y = seg.value(t)?;
                    for (p, q) in y.iter().zip(&xs[i]) {
                        let d = l * q - p;
                        if d > worst.0 {
                            worst = (d, t);
                        }
                        if t >= 1.0 && l < 1.0 {
                            margin = margin.min(-d);
                        }
                    }
                }
                out.push(Trial { violation: worst.0, t: worst.1, margin, blew_up: false, lambda: Some(l) });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let budget = budget_for(f, phis.first(), opts);
    let mut trials = Vec::new();
    let mut inputs = Vec::new();
    for (phi, ts) in phis.iter().zip(per_phi) {
        for t in ts {
            trials.push(t);
            inputs.push((phi.clone(), None));
        }
    }
    Ok(reduce("sublinearity", label, trials, &inputs, opts.tolerance, budget, false))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRow {
    pub n: usize,
    pub d_field: f64,
    pub d_history: f64,
    pub sup_error: f64,
}

/// One member of a convergent sequence `(f_n, phi_n)`.
#[derive(Clone, Debug)]
pub struct SequenceMember {
    pub n: usize,
    pub field: VectorField,
    pub history: History,
}

/// For each member: the T_P distance to `f`, the history distance, and
/// `sup_{[-1, T]} |x(., f_n, phi_n) - x(., f, phi)|` sampled every
/// `opts.grid_step` (and at every history node on [-1, 0]).
pub fn continuity_harness(
    f: &VectorField,
    phi: &History,
    members: &[SequenceMember],
    basis: &SeminormBasis,
    opts: &HarnessOptions,
) -> Result<Vec<ContinuityRow>> {
    let limit = solve_checked(f, phi, opts.horizon, &opts.solve)?;
    let mut times: Vec<f64> = (0..phi.len()).map(|i| phi.node_time(i)).collect();
    times.extend(grid(opts.horizon, opts.grid_step).into_iter().skip(1));
    let limit_vals: Vec<Vec<f64>> = times.iter().map(|&t| limit.value(t)).collect::<Result<_>>()?;
    members
        .par_iter()
        .map(|m| -> Result<ContinuityRow> {
            let seg = solve_checked(&m.field, &m.history, opts.horizon, &opts.solve)?;
            let mut err = 0.0f64;
            for (t, v) in times.iter().zip(&limit_vals) {
                let w = seg.value(*t)?;
                for (p, q) in w.iter().zip(v) {
                    err = err.max((p - q).abs());
                }
            }
            Ok(ContinuityRow {
                n: m.n,
                d_field: tp_distance(&m.field, f, basis)?.value,
                d_history: m.history.sup_distance(phi)?,
                sup_error: err,
            })
        })
        .collect()
}

/// CSV with header `n,d_field,d_history,sup_error`.
pub fn continuity_csv(rows: &[ContinuityRow]) -> String {
    let mut out = String::from("n,d_field,d_history,sup_error\n");
    for r in rows {
        out.push_str(&format!("{},{:.16e},{:.16e},{:.16e}\n", r.n, r.d_field, r.d_history, r.sup_error));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FnField;
    use approx::assert_abs_diff_eq;

    fn delay_field(f: impl Fn(f64, f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> VectorField {
        VectorField::new(FnField::new("test", 1, true, f))
    }

    #[test]
    fn flow_at_zero_is_identity() {
        let f = delay_field(|_, _, x, _, out| out[0] = -x[0]);
        let phi = History::constant(&[2.0], 256).unwrap();
        let (g, psi) = flow(0.0, &f, &phi, &SolveOptions::default()).unwrap();
        assert_eq!(psi, phi);
        assert_eq!(g.shift(), 0.0);
    }

    #[test]
    fn zero_field_keeps_constants() {
        let f = VectorField::new(FnField::zero(1));
        let phi = History::constant(&[3.0], 256).unwrap();
        let (g, psi) = flow(2.5, &f, &phi, &SolveOptions::default()).unwrap();
        assert_eq!(g.shift(), 2.5);
        assert!(psi.samples().iter().all(|v| *v == 3.0));
    }

    #[test]
    fn pure_delay_flow_value() {
        let f = delay_field(|_, _, _, y, out| out[0] = y[0]);
        let phi = History::constant(&[1.0], 256).unwrap();
        let (_, psi) = flow(1.0, &f, &phi, &SolveOptions::default()).unwrap();
        assert_abs_diff_eq!(psi.last()[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn anti_monotone_constant_pair_fails() {
        let f = delay_field(|_, _, _, y, out| out[0] = -y[0]);
        let pair = (History::constant(&[0.0], 256).unwrap(), History::constant(&[1.0], 256).unwrap());
        let r = monotonicity_harness_pairs(&f, "anti-monotone", &[pair], &HarnessOptions::default()).unwrap();
        assert!(!r.verdict.passed());
        assert!(r.worst_violation >= 0.5);
    }

    #[test]
    fn equal_pair_has_zero_violation() {
        let f = delay_field(|_, _, x, y, out| out[0] = -x[0] + y[0] / (1.0 + y[0]));
        let phi = History::constant(&[1.0], 256).unwrap();
        let r = monotonicity_harness_pairs(&f, "t", &[(phi.clone(), phi)], &HarnessOptions::default()).unwrap();
        assert_eq!(r.worst_violation, 0.0);
    }

    #[test]
    fn sampled_pairs_are_ordered() {
        let mut rng = trial_rng(3, 0);
        for _ in 0..50 {
            let (a, b) = ordered_pair(&mut rng, 2, 64, true).unwrap();
            assert!(a.order_leq(&b, 0.0).unwrap());
            assert!(a.last().iter().zip(b.last()).all(|(p, q)| p < q));
            assert!(a.min_value() > 0.0);
        }
    }

    #[test]
    fn semigroup_law() {
        let f = delay_field(|t, _, x, y, out| out[0] = -x[0] + 1.0 + 0.5 * t.sin() * y[0] / (1.0 + y[0]));
        let phi = History::constant(&[1.0], 256).unwrap();
        let d = semigroup_defect(&f, &phi, 1.5, 2.25, &SolveOptions::default()).unwrap();
        assert!(d < 1e-10, "{d}");
    }
}
