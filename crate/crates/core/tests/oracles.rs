//! Closed-form and independently computed reference values.

use approx::assert_abs_diff_eq;
use monoflow::equilibria::{
    equilibrium_residual, equilibrium_traces_from_linear, limit_equilibrium, pullback_step, PullbackSchedule, TraceOptions,
};
use monoflow::fields::FnField;
use monoflow::linear::{btilde, fit_decay, fundamental_matrix_ode, fundamental_scalar_delay};
use monoflow::models::{preset, LinearDelayField, Model};
use monoflow::semiflow::{strict_order_harness_pairs, sublinearity_harness_histories, HarnessOptions};
use monoflow::topologies::{theta_d_seminorm, Modulus, ThetaDOptions};
use monoflow::{solve_dde, solve_dde_pulse, CoefficientSignal, History, SolveOptions, VectorField};

const GOLDEN: f64 = 1.618_033_988_749_895;

fn c(v: f64) -> CoefficientSignal {
    CoefficientSignal::constant(v)
}

fn small_window() -> TraceOptions {
    TraceOptions { window: (-40.0, 4.0), ..Default::default() }
}

#[test]
fn golden_trajectory_settles_on_fixed_point() {
    let f = preset("golden").unwrap().field().clone();
    let seg = solve_dde(&f, &History::constant(&[1.0], 256).unwrap(), 40.0, &SolveOptions::default()).unwrap();
    assert_abs_diff_eq!(seg.end_value()[0], GOLDEN, epsilon = 1e-4);
}

#[test]
fn linear_half_pullback_limit() {
    let model = preset("linear-half").unwrap();
    let opts = TraceOptions { window: (-70.0, 2.0), ..Default::default() };
    let (a, b) = equilibrium_traces_from_linear(&model, &opts).unwrap();
    let lim = limit_equilibrium(model.field(), &a, &b, &PullbackSchedule::default(), &opts.solve).unwrap();
    for h in lim.u.values.iter().chain(&lim.v.values) {
        for v in h.samples() {
            assert_abs_diff_eq!(*v, 2.0, epsilon = 1e-6);
        }
    }
}

#[test]
fn empty_schedule_echoes_inputs() {
    let model = preset("golden").unwrap();
    let opts = small_window();
    let (a, b) = equilibrium_traces_from_linear(&model, &opts).unwrap();
    let lim = limit_equilibrium(model.field(), &a, &b, &PullbackSchedule { max_steps: 0, ..Default::default() }, &opts.solve).unwrap();
    assert_eq!(lim.u.values, a.values);
    assert_eq!(lim.v.values, b.values);
}

#[test]
fn traces_move_inwards_under_one_pullback() {
    let model = preset("step-coefficient").unwrap();
    let opts = small_window();
    let (a, b) = equilibrium_traces_from_linear(&model, &opts).unwrap();
    let a2 = pullback_step(model.field(), &a, 2.0, &opts.solve).unwrap();
    let b2 = pullback_step(model.field(), &b, 2.0, &opts.solve).unwrap();
    assert!(a.order_excess(&a2).unwrap() <= 1e-10);
    assert!(b2.order_excess(&b).unwrap() <= 1e-10);
}

#[test]
fn residual_shrinks_from_sub_to_limit() {
    let model = preset("golden").unwrap();
    let opts = small_window();
    let (a, b) = equilibrium_traces_from_linear(&model, &opts).unwrap();
    let f = model.field();
    let ra = equilibrium_residual(&a, f, 2.0, 8, &opts.solve).unwrap();
    let lim = limit_equilibrium(f, &a, &b, &PullbackSchedule::default(), &opts.solve).unwrap();
    let ru = equilibrium_residual(&lim.u, f, 2.0, 8, &opts.solve).unwrap();
    assert!(ra > 0.1, "{ra}");
    assert!(ru <= 1e-7, "{ru}");
}

#[test]
fn bounded_solution_of_majorant_matches_forward_integration() {
    // quasi-periodic coefficients: reversed-time quadrature against a long
    // forward solve from zero (variation of constants)
    let Model::Scalar(m) = preset("quasi-periodic").unwrap() else { panic!() };
    let opts = SolveOptions::default();
    let coef = LinearDelayField { alpha: m.spec.alpha.clone(), beta: m.spec.beta.clone(), gamma: m.spec.gamma.clone() };
    let decay = fit_decay(&fundamental_scalar_delay(&coef.alpha, &coef.beta, -40.0, 40.0, &opts).unwrap());
    for t in [0.0, 3.75] {
        let b = btilde(&coef, t, &decay, 1e-10, &opts).unwrap();
        let start = t - 70.0;
        let seg = solve_dde_pulse(&m.majorant.translate(start), &[0.0], 70.0, &opts).unwrap();
        assert_abs_diff_eq!(b, seg.end_value()[0], epsilon = 1e-7);
    }
}

#[test]
fn btilde_vanishes_without_forcing() {
    let opts = SolveOptions::default();
    let coef = LinearDelayField { alpha: c(1.0), beta: c(0.25), gamma: c(0.0) };
    let decay = fit_decay(&fundamental_scalar_delay(&c(1.0), &c(0.25), 0.0, 30.0, &opts).unwrap());
    assert_eq!(btilde(&coef, 0.0, &decay, 1e-8, &opts).unwrap(), 0.0);
}

#[test]
fn two_stage_minorant_matrix_closed_form() {
    let z = fundamental_matrix_ode(&[c(1.0), c(1.0)], &c(0.0), 0.0, 5.0, &SolveOptions::default()).unwrap();
    assert_eq!(z.matrix(0), &[1.0, 0.0, 0.0, 1.0]);
    for t in [0.5, 1.0, 2.5, 5.0] {
        let m = z.at(t).unwrap();
        let e = (-t).exp();
        assert_abs_diff_eq!(m[0], e, epsilon = 1e-9);
        assert_abs_diff_eq!(m[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[2], t * e, epsilon = 1e-9);
        assert_abs_diff_eq!(m[3], e, epsilon = 1e-9);
    }
}

#[test]
fn three_stage_cycle_decay_rate_matches_companion_eigenvalue() {
    // (l + 1)^3 = beta: the rightmost eigenvalue is beta^(1/3) - 1
    let alphas = vec![c(1.0); 3];
    let opts = SolveOptions::default();
    let stable = fit_decay(&fundamental_matrix_ode(&alphas, &c(0.5), 0.0, 60.0, &opts).unwrap());
    let rate = 1.0 - 0.5f64.cbrt();
    assert!(stable.verdict.passed());
    assert!((stable.delta - rate).abs() / rate < 0.05, "{} vs {rate}", stable.delta);
    let unstable = fit_decay(&fundamental_matrix_ode(&alphas, &c(1.5), 0.0, 40.0, &opts).unwrap());
    assert!(!unstable.verdict.passed());
}

#[test]
fn minorant_matrix_below_majorant_matrix() {
    let Model::Cyclic(m) = preset("cyclic-quasi-periodic").unwrap() else { panic!() };
    let opts = SolveOptions::default();
    let z = fundamental_matrix_ode(&m.spec.alphas, &c(0.0), 1.3, 20.0, &opts).unwrap();
    let u = fundamental_matrix_ode(&m.spec.alphas, &m.spec.beta, 1.3, 20.0, &opts).unwrap();
    for i in 0..z.taus.len() {
        for (p, q) in z.matrix(i).iter().zip(u.matrix(i)) {
            assert!(p <= &(q + 1e-12));
        }
    }
}

#[test]
fn nonlinear_solution_sandwiched_by_linear_bounds() {
    for name in ["golden", "step-coefficient", "quasi-periodic"] {
        let Model::Scalar(m) = preset(name).unwrap() else { panic!() };
        let phi = History::constant(&[0.7], 256).unwrap();
        let opts = SolveOptions::default();
        let lo = solve_dde(&m.minorant, &phi, 20.0, &opts).unwrap();
        let mid = solve_dde(&m.nonlinear, &phi, 20.0, &opts).unwrap();
        let hi = solve_dde(&m.majorant, &phi, 20.0, &opts).unwrap();
        for i in 0..=320 {
            let t = i as f64 / 16.0;
            let (a, b, c) = (lo.value(t).unwrap()[0], mid.value(t).unwrap()[0], hi.value(t).unwrap()[0]);
            assert!(a <= b + 1e-9 && b <= c + 1e-9, "{name} at {t}: {a} {b} {c}");
        }
    }
}

#[test]
fn strict_order_floor_for_linear_delay() {
    // y' = -y + y(t-1): gap' >= -gap, so gap(t) >= e^-t
    let f = VectorField::new(FnField::new("linear", 1, true, |_, _, x, y, out| out[0] = -x[0] + y[0]).with_l_bounds(vec![c(1.0)]));
    let pair = (History::constant(&[1.0], 256).unwrap(), History::constant(&[2.0], 256).unwrap());
    let opts = HarnessOptions { horizon: 5.0, ..Default::default() };
    let r = strict_order_harness_pairs(&f, "linear", &[pair], &opts).unwrap();
    assert!(r.verdict.passed());
    assert!(r.worst_violation <= 1e-12);
}

#[test]
fn sublinearity_boundary_lambdas() {
    let f = preset("golden").unwrap().field().clone();
    let phi = History::constant(&[2.0], 256).unwrap();
    let one = HarnessOptions { lambdas: vec![1.0], ..Default::default() };
    let r = sublinearity_harness_histories(&f, "golden", std::slice::from_ref(&phi), &one).unwrap();
    assert!(r.worst_violation <= 0.0);
    let zero = HarnessOptions { lambdas: vec![0.0], ..Default::default() };
    let r = sublinearity_harness_histories(&f, "golden", std::slice::from_ref(&phi), &zero).unwrap();
    assert!(r.verdict.passed());
    let half = HarnessOptions { lambdas: vec![0.5], ..Default::default() };
    let r = sublinearity_harness_histories(&f, "golden", &[phi], &half).unwrap();
    assert!(r.margin.unwrap() > 0.0);
}

#[test]
fn theta_d_of_state_independent_difference() {
    let f = VectorField::new(FnField::new("t", 1, true, |t, _, _, _, out| out[0] = t));
    let g = VectorField::new(FnField::zero(1));
    let theta = Modulus::linear(1.0, 2.0);
    let r = theta_d_seminorm(&f, &g, (0.0, 2.0), &[0.0], 1.0, &theta, &ThetaDOptions::default()).unwrap();
    assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-12);
    assert!(r.lower_bound);
}
