//! Acceptance suite: one line per criterion, with pinned tolerances and
//! runtime limits. Exits nonzero if a criterion fails that is not listed
//! in `UNATTAINABLE`.

use std::time::{Duration, Instant};

use monoflow::equilibria::{
    equilibrium_traces_from_linear, forward_attraction, limit_equilibrium, PullbackLimit, PullbackSchedule, TraceOptions,
};
use monoflow::linear::{atilde, btilde, fit_decay, fundamental_matrix_ode, fundamental_scalar_delay};
use monoflow::models::{preset, LinearDelayField, PRESETS};
use monoflow::semiflow::{
    continuity_harness, integrator_budget, monotonicity_harness, semigroup_defect, strict_order_harness, sublinearity_harness,
    HarnessOptions, SequenceMember,
};
use monoflow::topologies::SeminormBasis;
use monoflow::{CoefficientSignal, History, SolveOptions, VectorField};

/// Criteria whose pinned threshold cannot be met by any correct
/// implementation; they are still run and reported.
const UNATTAINABLE: &[(usize, &str)] =
    &[(9, "sup over [-1, T] includes |phi_k - phi| = 2^-k on [-1, 0], which is 2.44e-4 > 1e-4 at k = 12")];

const GOLDEN: f64 = 1.618_033_988_749_895;

struct Outcome {
    pass: bool,
    detail: String,
}

fn c(v: f64) -> CoefficientSignal {
    CoefficientSignal::constant(v)
}

fn field_of(name: &str) -> VectorField {
    preset(name).unwrap().field().clone()
}

fn pullback(name: &str, opts: &TraceOptions) -> PullbackLimit {
    let model = preset(name).unwrap();
    let (a, b) = equilibrium_traces_from_linear(&model, opts).unwrap();
    limit_equilibrium(model.field(), &a, &b, &PullbackSchedule::default(), &opts.solve).unwrap()
}

fn trace_opts() -> TraceOptions {
    TraceOptions::default()
}

/// Largest distance of the current values `u(f_t)(0)` from a constant.
fn distance_to_constant(lim: &PullbackLimit, value: f64) -> f64 {
    lim.u.values.iter().chain(&lim.v.values).flat_map(|h| h.samples().iter()).fold(0.0, |m, x| m.max((x - value).abs()))
}

fn criterion_1() -> Outcome {
    let opts = HarnessOptions { trials: 100, horizon: 10.0, seed: 1, ..Default::default() };
    let mut pass = true;
    let mut worst: f64 = f64::NEG_INFINITY;
    for name in PRESETS {
        let r = monotonicity_harness(&field_of(name), name, &opts).unwrap();
        pass &= r.verdict.passed() && r.worst_violation <= 1e-6 + r.budget;
        worst = worst.max(r.worst_violation);
    }
    let anti = monotonicity_harness(&field_of("anti-monotone"), "anti-monotone", &opts).unwrap();
    pass &= !anti.verdict.passed() && anti.worst_violation >= 0.5;
    Outcome {
        pass,
        detail: format!(
            "{} presets x 100 pairs: worst violation {worst:.3e}; anti-monotone violation {:.3}",
            PRESETS.len(),
            anti.worst_violation
        ),
    }
}

fn criterion_2() -> Outcome {
    let opts = HarnessOptions { trials: 20, horizon: 5.0, seed: 2, ..Default::default() };
    let mut pass = true;
    let mut worst = f64::NEG_INFINITY;
    let mut gap = f64::INFINITY;
    for name in PRESETS {
        let r = strict_order_harness(&field_of(name), name, &opts).unwrap();
        pass &= r.verdict.passed() && r.worst_violation <= 1e-6 && r.margin.unwrap() > 0.0;
        worst = worst.max(r.worst_violation);
        gap = gap.min(r.margin.unwrap());
    }
    Outcome { pass, detail: format!("worst floor shortfall {worst:.3e}, smallest gap {gap:.3e}") }
}

fn criterion_3() -> Outcome {
    let opts = HarnessOptions { trials: 50, horizon: 10.0, seed: 3, ..Default::default() };
    let mut pass = true;
    let mut worst = f64::NEG_INFINITY;
    for name in PRESETS {
        let r = sublinearity_harness(&field_of(name), name, &opts).unwrap();
        pass &= r.verdict.passed() && r.worst_violation <= 1e-6;
        worst = worst.max(r.worst_violation);
    }
    Outcome { pass, detail: format!("{} presets x 50 histories x 9 lambdas: worst violation {worst:.3e}", PRESETS.len()) }
}

fn criterion_4() -> Outcome {
    let opts = trace_opts();
    let golden = pullback("golden", &opts);
    let quarter = pullback("linear-quarter", &opts);
    let eg = distance_to_constant(&golden, GOLDEN);
    let eq = distance_to_constant(&quarter, 4.0 / 3.0);
    let mono = golden.diagnostics.monotone_violation.max(quarter.diagnostics.monotone_violation);
    let pass = eg < 1e-6 && eq < 1e-6 && mono <= 1e-8 && golden.diagnostics.converged && quarter.diagnostics.converged;
    Outcome {
        pass,
        detail: format!(
            "golden error {eg:.3e} after {} steps; 4/3 error {eq:.3e} after {} steps; worst monotonicity slip {mono:.3e}",
            golden.diagnostics.taus.len(),
            quarter.diagnostics.taus.len()
        ),
    }
}

fn criterion_5() -> Outcome {
    let opts = trace_opts();
    let mut pass = true;
    let mut details = Vec::new();
    for name in ["quasi-periodic", "cyclic-quasi-periodic"] {
        let lim = pullback(name, &opts);
        let uv = lim.u.sup_distance(&lim.v).unwrap();
        let f = field_of(name);
        let u0 = lim.u.at(0.0).unwrap();
        let s = forward_attraction(&f, &lim.u, 0.0, &u0.scale(2.0), 60.0, 0.25, &opts.solve).unwrap();
        let p_end = *s.part_metric.last().unwrap();
        let bound_ok = s.distance.iter().zip(&s.norm_bound).all(|(d, b)| *d <= *b + 1e-12);
        let p0_ok = (s.part_metric[0] - 2f64.ln()).abs() < 1e-12;
        pass &= uv < 1e-5 && s.max_increase <= 1e-8 && p_end < 1e-4 && bound_ok && p0_ok;
        details.push(format!("{name}: |u-v| {uv:.2e}, p(60) {p_end:.2e}, max increase {:.2e}, norm bound {bound_ok}", s.max_increase));
    }
    Outcome { pass, detail: details.join("; ") }
}

/// Method-of-steps closed form of the pulse solution of `x' = x(t - 1)`.
fn pure_delay_pulse(t: f64) -> f64 {
    let mut sum = 0.0;
    let mut fact = 1.0;
    for j in 0..=(t.floor() as i32) {
        if j > 0 {
            fact *= j as f64;
        }
        sum += (t - j as f64).powi(j) / fact;
    }
    sum
}

/// Real root of `l = -a + b exp(-l)` by bisection.
fn characteristic_root(a: f64, b: f64) -> f64 {
    let g = |l: f64| l + a - b * (-l).exp();
    let (mut lo, mut hi) = (-a - 1.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_6() -> Outcome {
    let opts = SolveOptions::default();
    // first interval against the exact primitive, for step and quasi-periodic alpha
    let alphas =
        [CoefficientSignal::cells(1.0, &[1.0, 1.5]).unwrap(), CoefficientSignal::quasi_periodic(1.0, 0.5, 0.5, Some(1.0 / 64.0)).unwrap()];
    let mut first = 0.0f64;
    for alpha in &alphas {
        for s in [0.0, 0.3, -2.7] {
            let u = fundamental_scalar_delay(alpha, &c(0.5), s, 2.0, &opts).unwrap();
            for i in 0..=64 {
                let tau = i as f64 / 64.0;
                let exact = (-alpha.integral(s, s + tau)).exp();
                first = first.max((u.at(tau).unwrap()[0] - exact).abs());
            }
        }
    }
    let u = fundamental_scalar_delay(&c(0.0), &c(1.0), 0.0, 4.0, &opts).unwrap();
    let mut steps = 0.0f64;
    for i in 0..=64 {
        let t = i as f64 / 16.0;
        steps = steps.max((u.at(t).unwrap()[0] - pure_delay_pulse(t)).abs());
    }
    let u = fundamental_scalar_delay(&c(1.0), &c(0.25), 0.0, 40.0, &opts).unwrap();
    let d = fit_decay(&u);
    let root = characteristic_root(1.0, 0.25);
    let rel = (d.delta + root).abs() / root.abs();
    let pass = first <= 1e-10 && steps <= 1e-8 && rel <= 0.05 && d.verdict.passed();
    Outcome {
        pass,
        detail: format!(
            "first interval {first:.2e}; method of steps {steps:.2e}; fitted rate {:.5} vs root {root:.5} ({:.2}%)",
            -d.delta,
            100.0 * rel
        ),
    }
}

fn criterion_7() -> Outcome {
    let opts = SolveOptions::default();
    let mut pass = true;
    let decay_of = |alpha: f64, beta: f64| fit_decay(&fundamental_scalar_delay(&c(alpha), &c(beta), 0.0, 40.0, &opts).unwrap());
    let b1 = btilde(&LinearDelayField { alpha: c(1.0), beta: c(0.0), gamma: c(1.0) }, 0.0, &decay_of(1.0, 0.0), 1e-10, &opts).unwrap();
    let b2 = btilde(&LinearDelayField { alpha: c(1.0), beta: c(0.25), gamma: c(1.0) }, 0.0, &decay_of(1.0, 0.25), 1e-10, &opts).unwrap();
    // long forward integration of the majorant from zero
    let maj = VectorField::new(LinearDelayField { alpha: c(1.0), beta: c(0.25), gamma: c(1.0) });
    let seg = monoflow::solve_dde(&maj, &History::constant(&[0.0], 256).unwrap(), 80.0, &opts).unwrap();
    let forward = seg.end_value()[0];
    pass &= (b1 - 1.0).abs() <= 1e-8 && (b2 - forward).abs() <= 1e-6 && (b2 - 4.0 / 3.0).abs() <= 1e-6;
    let pulses = CoefficientSignal::cells(1.0, &[0.0, 1.0]).unwrap();
    let a = atilde(&c(1.0), &pulses, 0.0, 1e-12).unwrap();
    pass &= (a - 0.731_058_6).abs() <= 1e-6;
    let mut order = f64::NEG_INFINITY;
    let mut floor = f64::INFINITY;
    for name in PRESETS {
        let model = preset(name).unwrap();
        let (a, b) = equilibrium_traces_from_linear(&model, &trace_opts()).unwrap();
        order = order.max(a.order_excess(&b).unwrap());
        floor = floor.min(a.min_value());
    }
    pass &= order <= 0.0 && floor > 0.0;
    Outcome {
        pass,
        detail: format!(
            "b~(1,0,1) = {b1:.12}; b~(1,1/4,1) = {b2:.10} vs forward {forward:.10}; a~ = {a:.9}; min a {floor:.3e}, max a-b {order:.3e}"
        ),
    }
}

fn criterion_8() -> Outcome {
    let lim = pullback("cyclic-golden", &trace_opts());
    let err = distance_to_constant(&lim, GOLDEN);
    let mut min_pos = f64::INFINITY;
    for m in [2, 3] {
        let alphas = vec![c(1.0); m];
        let z = fundamental_matrix_ode(&alphas, &c(0.0), 0.0, 10.0, &SolveOptions::default()).unwrap();
        for (i, &tau) in z.taus.iter().enumerate() {
            if tau >= 0.1 - 1e-12 {
                let mat = z.matrix(i);
                for r in 0..m {
                    min_pos = min_pos.min(mat[r * m]);
                }
            }
        }
    }
    Outcome {
        pass: err < 1e-6 && lim.diagnostics.converged && min_pos > 0.0,
        detail: format!("equilibrium error {err:.3e}; smallest entry of Z(t,0)e1 on [0.1,10]: {min_pos:.3e}"),
    }
}

fn criterion_9() -> Outcome {
    let f = field_of("quasi-periodic");
    let phi = History::constant(&[1.0], 256).unwrap();
    let opts = HarnessOptions { horizon: 10.0, grid_step: 1.0 / 64.0, ..Default::default() };
    let ones = History::constant(&[1.0], 256).unwrap();
    let members: Vec<SequenceMember> = (0..=12)
        .map(|k| {
            let e = 0.5f64.powi(k);
            SequenceMember { n: k as usize, field: f.translate(e), history: phi.add_scaled(&ones, e).unwrap() }
        })
        .collect();
    let basis = SeminormBasis::standard(1, 4, 9);
    let rows = continuity_harness(&f, &phi, &members, &basis, &opts).unwrap();
    let d_mono = rows.windows(2).all(|w| w[1].d_field <= w[0].d_field);
    let e_mono = rows.windows(2).all(|w| w[1].sup_error <= w[0].sup_error);
    let last = rows.last().unwrap();
    Outcome {
        pass: d_mono && e_mono && last.sup_error < 1e-4,
        detail: format!(
            "T_P column nonincreasing {d_mono}; sup-error column nonincreasing {e_mono}; k=12: d_field {:.3e}, sup-error {:.3e}",
            last.d_field, last.sup_error
        ),
    }
}

fn criterion_10() -> Outcome {
    let mut ratios = Vec::new();
    for name in ["golden", "linear-quarter", "cyclic-golden"] {
        let f = field_of(name);
        let dim = f.dim();
        let phi = History::constant(&vec![1.0; dim], 16).unwrap();
        let run = |h: f64| {
            let mut o = SolveOptions::with_step(h);
            o.nodes_per_unit = 16;
            monoflow::solve_dde(&f, &phi, 6.0, &o).unwrap()
        };
        let segs: Vec<_> = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0].iter().map(|&h| run(h)).collect();
        let diff = |a: usize, b: usize| {
            (0..=96).map(|i| i as f64 / 16.0).fold(0.0f64, |m, t| {
                let x = segs[a].value(t).unwrap();
                let y = segs[b].value(t).unwrap();
                x.iter().zip(&y).fold(m, |m, (p, q)| m.max((p - q).abs()))
            })
        };
        ratios.push(diff(0, 1) / diff(1, 2));
    }
    let ratio_ok = ratios.iter().all(|r| *r >= 8.0);
    let f = field_of("quasi-periodic");
    let phi = History::constant(&[1.0], 256).unwrap();
    let opts = SolveOptions::default();
    let cocycle = [(0.5, 1.25), (2.0, 3.0), (1.0 / 3.0, 0.75)]
        .iter()
        .map(|&(t, s)| semigroup_defect(&f, &phi, t, s, &opts).unwrap())
        .fold(0.0, f64::max);
    let h = HarnessOptions { trials: 20, seed: 42, ..Default::default() };
    let r1 = serde_json::to_string(&monotonicity_harness(&f, "quasi-periodic", &h).unwrap()).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let r2 = pool.install(|| serde_json::to_string(&monotonicity_harness(&f, "quasi-periodic", &h).unwrap()).unwrap());
    let budget = integrator_budget(&f, &phi, 10.0, &opts).unwrap();
    let deterministic = r1 == r2;
    Outcome {
        pass: ratio_ok && cocycle <= 10.0 * 1e-8 && deterministic,
        detail: format!(
            "halving ratios {:?}; cocycle defect {cocycle:.2e}; bitwise identical {deterministic}; budget {budget:.2e}",
            ratios.iter().map(|r| format!("{r:.1}")).collect::<Vec<_>>()
        ),
    }
}

fn main() {
    let criteria: [(usize, &str, u64, fn() -> Outcome); 10] = [
        (1, "monotonicity", 120, criterion_1),
        (2, "strict order", 60, criterion_2),
        (3, "sublinearity and cone", 120, criterion_3),
        (4, "pullback sandwich and convergence", 180, criterion_4),
        (5, "u = v and forward attraction", 300, criterion_5),
        (6, "fundamental solution", 60, criterion_6),
        (7, "equilibrium integrals", 60, criterion_7),
        (8, "cyclic feedback", 120, criterion_8),
        (9, "continuous dependence", 180, criterion_9),
        (10, "integrator self-consistency", 120, criterion_10),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut unexpected = Vec::new();
    for (n, name, limit, run) in criteria {
        if filter.is_some_and(|f| f != n) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let pass = out.pass && in_time;
        println!(
            "criterion {n:>2} [{name}] {} ({:.1}s of {limit}s): {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            out.detail
        );
        if !pass {
            match UNATTAINABLE.iter().find(|(k, _)| *k == n) {
                Some((_, why)) => println!("             known unattainable: {why}"),
                None => unexpected.push(n),
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("failed criteria: {unexpected:?}");
        std::process::exit(1);
    }
}
