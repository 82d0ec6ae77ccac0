//! The scalar delayed population model, the cyclic feedback system, their
//! linear majorants and minorants, a named preset catalog, and the
//! assumption validators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    check_condition, merge_breakpoints, Condition, FieldModel, FnField, Nonlinearity, Sampler, Shape, VectorField, Verdict,
};
use crate::linear::{fit_decay, fundamental_matrix_ode, fundamental_scalar_delay, DecayEstimate};
use crate::signal::CoefficientSignal;
use crate::solver::SolveOptions;

/// `x'(t) = -alpha(t) x(t) + h(t, x(t-1))`.
#[derive(Clone, Debug)]
pub struct ScalarPopulationField {
    pub alpha: CoefficientSignal,
    pub h: Nonlinearity,
}

impl FieldModel for ScalarPopulationField {
    fn dim(&self) -> usize {
        1
    }
    fn delayed(&self) -> bool {
        true
    }
    fn eval(&self, t: f64, anchor: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        out[0] = -self.alpha.value_in(t, anchor) * x[0] + self.h.eval(t, anchor, y[0]);
    }
    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        merge_breakpoints([&self.alpha, &self.h.base, &self.h.gain].into_iter(), a, b)
    }
    fn flags(&self) -> Vec<Condition> {
        let mut f = vec![Condition::Kx, Condition::Ky, Condition::Kxy, Condition::S];
        if self.h.base.floor() > 0.0 {
            f.push(Condition::StrongS);
        }
        f
    }
    fn label(&self) -> String {
        "scalar-population".into()
    }
    fn l_bound_integral(&self, _k: usize, a: f64, b: f64) -> Option<f64> {
        Some(self.alpha.integral(a, b))
    }
}

/// `y'(t) = -alpha(t) y(t) + beta(t) y(t-1) + gamma(t)`.
#[derive(Clone, Debug)]
pub struct LinearDelayField {
    pub alpha: CoefficientSignal,
    pub beta: CoefficientSignal,
    pub gamma: CoefficientSignal,
}

impl LinearDelayField {
    pub fn homogeneous(alpha: CoefficientSignal, beta: CoefficientSignal) -> Self {
        LinearDelayField { alpha, beta, gamma: CoefficientSignal::constant(0.0) }
    }
}

impl FieldModel for LinearDelayField {
    fn dim(&self) -> usize {
        1
    }
    fn delayed(&self) -> bool {
        true
    }
    fn eval(&self, t: f64, anchor: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        out[0] = -self.alpha.value_in(t, anchor) * x[0] + self.beta.value_in(t, anchor) * y[0] + self.gamma.value_in(t, anchor);
    }
    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        merge_breakpoints([&self.alpha, &self.beta, &self.gamma].into_iter(), a, b)
    }
    fn flags(&self) -> Vec<Condition> {
        vec![Condition::Kx, Condition::Ky, Condition::Kxy, Condition::S]
    }
    fn label(&self) -> String {
        "linear-delay".into()
    }
    fn l_bound_integral(&self, _k: usize, a: f64, b: f64) -> Option<f64> {
        Some(self.alpha.integral(a, b))
    }
}

/// `x1' = h(t, x_m) - alpha_1 x1`, `x_i' = x_{i-1} - alpha_i x_i`.
#[derive(Clone, Debug)]
pub struct CyclicField {
    pub alphas: Vec<CoefficientSignal>,
    pub h: Nonlinearity,
}

impl FieldModel for CyclicField {
    fn dim(&self) -> usize {
        self.alphas.len()
    }
    fn delayed(&self) -> bool {
        false
    }
    fn eval(&self, t: f64, anchor: f64, x: &[f64], _y: &[f64], out: &mut [f64]) {
        let m = self.alphas.len();
        out[0] = self.h.eval(t, anchor, x[m - 1]) - self.alphas[0].value_in(t, anchor) * x[0];
        for i in 1..m {
            out[i] = x[i - 1] - self.alphas[i].value_in(t, anchor) * x[i];
        }
    }
    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        merge_breakpoints(self.alphas.iter().chain([&self.h.base, &self.h.gain]), a, b)
    }
    fn flags(&self) -> Vec<Condition> {
        let mut f = vec![Condition::K1, Condition::Kx, Condition::S];
        if self.h.base.floor() > 0.0 {
            f.push(Condition::StrongS);
        }
        f
    }
    fn label(&self) -> String {
        format!("cyclic-feedback-{}", self.alphas.len())
    }
    fn l_bound_integral(&self, k: usize, a: f64, b: f64) -> Option<f64> {
        self.alphas.get(k).map(|s| s.integral(a, b))
    }
}

/// `z1' = beta z_m - alpha_1 z1 + gamma`, `z_i' = z_{i-1} - alpha_i z_i`.
#[derive(Clone, Debug)]
pub struct LinearCyclicField {
    pub alphas: Vec<CoefficientSignal>,
    pub beta: CoefficientSignal,
    pub gamma: CoefficientSignal,
}

impl FieldModel for LinearCyclicField {
    fn dim(&self) -> usize {
        self.alphas.len()
    }
    fn delayed(&self) -> bool {
        false
    }
    fn eval(&self, t: f64, anchor: f64, x: &[f64], _y: &[f64], out: &mut [f64]) {
        let m = self.alphas.len();
        out[0] = self.beta.value_in(t, anchor) * x[m - 1] - self.alphas[0].value_in(t, anchor) * x[0] + self.gamma.value_in(t, anchor);
        for i in 1..m {
            out[i] = x[i - 1] - self.alphas[i].value_in(t, anchor) * x[i];
        }
    }
    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        merge_breakpoints(self.alphas.iter().chain([&self.beta, &self.gamma]), a, b)
    }
    fn flags(&self) -> Vec<Condition> {
        vec![Condition::K1, Condition::Kx, Condition::S]
    }
    fn label(&self) -> String {
        format!("linear-cyclic-{}", self.alphas.len())
    }
    fn l_bound_integral(&self, k: usize, a: f64, b: f64) -> Option<f64> {
        self.alphas.get(k).map(|s| s.integral(a, b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarPopulationSpec {
    pub alpha: CoefficientSignal,
    pub beta: CoefficientSignal,
    pub gamma: CoefficientSignal,
    pub h: Nonlinearity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclicFeedbackSpec {
    pub alphas: Vec<CoefficientSignal>,
    pub beta: CoefficientSignal,
    pub gamma: CoefficientSignal,
    pub h: Nonlinearity,
}

#[derive(Clone, Debug)]
pub struct ScalarPopulationModel {
    pub spec: ScalarPopulationSpec,
    pub nonlinear: VectorField,
    pub majorant: VectorField,
    pub minorant: VectorField,
}

#[derive(Clone, Debug)]
pub struct CyclicFeedbackModel {
    pub spec: CyclicFeedbackSpec,
    pub nonlinear: VectorField,
    pub majorant: VectorField,
    pub minorant: VectorField,
}

/// Model description accepted by configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    Preset { name: String },
    ScalarPopulation(ScalarPopulationSpec),
    CyclicFeedback(CyclicFeedbackSpec),
}

#[derive(Clone, Debug)]
pub enum Model {
    Scalar(ScalarPopulationModel),
    Cyclic(CyclicFeedbackModel),
    /// A bare field without the population structure (test fixtures).
    Field(VectorField),
}

impl Model {
    pub fn field(&self) -> &VectorField {
        match self {
            Model::Scalar(m) => &m.nonlinear,
            Model::Cyclic(m) => &m.nonlinear,
            Model::Field(f) => f,
        }
    }

    pub fn dim(&self) -> usize {
        self.field().dim()
    }
}

/// Samples `h(t, y) - beta(t) y - gamma(t)` over `y >= 0`; the worst
/// positive value is a domination failure.
fn domination_excess(h: &Nonlinearity, beta: &CoefficientSignal, gamma: &CoefficientSignal, seed: u64) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ys: Vec<f64> = vec![0.0];
    ys.extend((0..=60).map(|i| 10f64.powf(-6.0 + 9.0 * i as f64 / 60.0)));
    ys.extend((1..=100).map(|i| i as f64 * 0.1));
    let lo = -20.0;
    let hi = 20.0;
    let mut ts: Vec<f64> = (0..200).map(|_| rng.gen_range(lo..hi)).collect();
    let mut bps = merge_breakpoints([&h.base, &h.gain, beta, gamma].into_iter(), lo, hi);
    bps.insert(0, lo);
    bps.push(hi);
    ts.extend(bps.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    let mut worst = (f64::NEG_INFINITY, 0.0, 0.0);
    for &t in &ts {
        for &y in &ys {
            let v = h.eval(t, t, y) - beta.value(t) * y - gamma.value(t);
            let scale = 1.0 + h.eval(t, t, y).abs();
            if v / scale > worst.0 {
                worst = (v / scale, t, y);
            }
        }
    }
    worst
}

const DOMINATION_TOL: f64 = 1e-12;

pub fn make_scalar_population(spec: ScalarPopulationSpec) -> Result<ScalarPopulationModel> {
    let (excess, t, y) = domination_excess(&spec.h, &spec.beta, &spec.gamma, 7);
    if excess > DOMINATION_TOL {
        return Err(Error::InvalidModel(format!(
            "h(t,y) <= beta(t) y + gamma(t) fails at t = {t}, y = {y} (relative excess {excess:.3e})"
        )));
    }
    let nonlinear = VectorField::new(ScalarPopulationField { alpha: spec.alpha.clone(), h: spec.h.clone() });
    let majorant = VectorField::new(LinearDelayField { alpha: spec.alpha.clone(), beta: spec.beta.clone(), gamma: spec.gamma.clone() });
    let minorant = VectorField::new(LinearDelayField {
        alpha: spec.alpha.clone(),
        beta: CoefficientSignal::constant(0.0),
        gamma: spec.h.base.clone(),
    });
    Ok(ScalarPopulationModel { spec, nonlinear, majorant, minorant })
}

pub fn make_cyclic_feedback(spec: CyclicFeedbackSpec) -> Result<CyclicFeedbackModel> {
    if spec.alphas.len() < 2 {
        return Err(Error::InvalidModel(format!("cyclic system needs m >= 2 stages, got {}", spec.alphas.len())));
    }
    let (excess, t, y) = domination_excess(&spec.h, &spec.beta, &spec.gamma, 11);
    if excess > DOMINATION_TOL {
        return Err(Error::InvalidModel(format!(
            "h(t,y) <= beta(t) y + gamma(t) fails at t = {t}, y = {y} (relative excess {excess:.3e})"
        )));
    }
    let nonlinear = VectorField::new(CyclicField { alphas: spec.alphas.clone(), h: spec.h.clone() });
    let majorant = VectorField::new(LinearCyclicField { alphas: spec.alphas.clone(), beta: spec.beta.clone(), gamma: spec.gamma.clone() });
    let minorant = VectorField::new(LinearCyclicField {
        alphas: spec.alphas.clone(),
        beta: CoefficientSignal::constant(0.0),
        gamma: spec.h.base.clone(),
    });
    Ok(CyclicFeedbackModel { spec, nonlinear, majorant, minorant })
}

pub fn build_model(spec: &ModelSpec) -> Result<Model> {
    match spec {
        ModelSpec::Preset { name } => preset(name),
        ModelSpec::ScalarPopulation(s) => Ok(Model::Scalar(make_scalar_population(s.clone())?)),
        ModelSpec::CyclicFeedback(s) => Ok(Model::Cyclic(make_cyclic_feedback(s.clone())?)),
    }
}

fn c(v: f64) -> CoefficientSignal {
    CoefficientSignal::constant(v)
}

/// Quantization cell of the quasi-periodic presets.
pub const QP_QUANTUM: f64 = 1.0 / 64.0;

fn golden_h() -> Nonlinearity {
    Nonlinearity::new(c(1.0), c(1.0), Shape::Saturating)
}

fn scalar(alpha: CoefficientSignal, beta: CoefficientSignal, gamma: CoefficientSignal, h: Nonlinearity) -> Result<Model> {
    Ok(Model::Scalar(make_scalar_population(ScalarPopulationSpec { alpha, beta, gamma, h })?))
}

fn linear(alpha: f64, beta: f64, gamma: f64) -> Result<Model> {
    scalar(c(alpha), c(beta), c(gamma), Nonlinearity::new(c(gamma), c(beta), Shape::Identity))
}

/// Names of the shipped presets that satisfy their full assumption bundle.
pub const PRESETS: &[&str] = &[
    "golden",
    "linear-quarter",
    "linear-half",
    "step-coefficient",
    "quasi-periodic",
    "cyclic-golden",
    "cyclic-3",
    "cyclic-quasi-periodic",
];

/// Shipped fixtures that are built to fail, with the assumptions or
/// properties each one violates.
pub const NEGATIVE_FIXTURES: &[(&str, &[&str])] = &[
    ("anti-monotone", &["Ky", "monotonicity"]),
    ("null-alpha", &["A1", "A4"]),
    ("no-base", &["A1", "strongS"]),
    ("unstable-linear", &["A4"]),
];

/// All catalog names, including the zero field.
pub fn catalog() -> Vec<&'static str> {
    let mut v = vec!["zero"];
    v.extend(PRESETS);
    v.extend(NEGATIVE_FIXTURES.iter().map(|(n, _)| *n));
    v
}

/// Looks up a preset or fixture by name.
pub fn preset(name: &str) -> Result<Model> {
    let qp_alpha = || CoefficientSignal::quasi_periodic(1.0, 0.5, 0.5, Some(QP_QUANTUM));
    match name {
        "zero" => Ok(Model::Field(VectorField::new(FnField::zero(1)))),
        // h(y) = 1 + y/(1+y) lies below its tangent 1.25 + y/4 at y = 1
        "golden" => scalar(c(1.0), c(0.25), c(1.25), golden_h()),
        "linear-quarter" => linear(1.0, 0.25, 1.0),
        "linear-half" => linear(1.0, 0.5, 1.0),
        "step-coefficient" => {
            scalar(CoefficientSignal::cells(1.0, &[1.0, 1.5])?, c(0.5), c(1.0), Nonlinearity::new(c(1.0), c(0.5), Shape::Saturating))
        }
        "quasi-periodic" => {
            let base = CoefficientSignal::quasi_periodic(1.0, 0.0, 0.5, Some(QP_QUANTUM))?;
            let gamma = CoefficientSignal::quasi_periodic(1.25, 0.0, 0.5, Some(QP_QUANTUM))?;
            scalar(qp_alpha()?, c(0.25), gamma, Nonlinearity::new(base, c(1.0), Shape::Saturating))
        }
        "cyclic-golden" => Ok(Model::Cyclic(make_cyclic_feedback(CyclicFeedbackSpec {
            alphas: vec![c(1.0), c(1.0)],
            beta: c(0.25),
            gamma: c(1.25),
            h: golden_h(),
        })?)),
        "cyclic-3" => Ok(Model::Cyclic(make_cyclic_feedback(CyclicFeedbackSpec {
            alphas: vec![c(1.0), c(1.0), c(1.0)],
            beta: c(0.25),
            gamma: c(1.25),
            h: golden_h(),
        })?)),
        "cyclic-quasi-periodic" => {
            let base = CoefficientSignal::quasi_periodic(1.0, 0.0, 0.5, Some(QP_QUANTUM))?;
            let gamma = CoefficientSignal::quasi_periodic(1.25, 0.0, 0.5, Some(QP_QUANTUM))?;
            Ok(Model::Cyclic(make_cyclic_feedback(CyclicFeedbackSpec {
                alphas: vec![qp_alpha()?, c(1.0)],
                beta: c(0.25),
                gamma,
                h: Nonlinearity::new(base, c(1.0), Shape::Saturating),
            })?))
        }
        "anti-monotone" => Ok(Model::Field(VectorField::new(
            FnField::new("anti-monotone", 1, true, |_, _, _, y, out| out[0] = -y[0]).with_flags(&[Condition::Kx]),
        ))),
        "null-alpha" => scalar(c(0.0), c(0.25), c(1.25), golden_h()),
        "no-base" => scalar(c(1.5), c(1.0), c(0.0), Nonlinearity::new(c(0.0), c(1.0), Shape::Saturating)),
        "unstable-linear" => linear(1.0, 2.0, 1.0),
        other => Err(Error::InvalidModel(format!("unknown preset {other:?}; known: {}", catalog().join(", ")))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bundle {
    A,
    B,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionVerdict {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub bundle: Bundle,
    pub entries: Vec<AssumptionVerdict>,
    /// Decay of the linear majorant, fitted on sampled translates. This is
    /// empirical evidence, not a proof.
    pub decay: Option<DecayEstimate>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.verdict.passed())
    }

    pub fn failed(&self) -> Vec<String> {
        self.entries.iter().filter(|e| !e.verdict.passed()).map(|e| e.name.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionVerdict> {
        self.entries.iter().find(|e| e.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationOptions {
    pub t_range: (f64, f64),
    pub translates: Vec<f64>,
    pub horizon: f64,
    pub seed: u64,
    pub solve: SolveOptions,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            t_range: (-20.0, 20.0),
            translates: vec![0.0, 0.37, 1.5, 3.1],
            horizon: 40.0,
            seed: 0,
            solve: SolveOptions::with_step(1.0 / 64.0),
        }
    }
}

/// Checks one signal for membership in the admissible coefficient class:
/// nonnegative, bounded unit-window integrals, and every window of length
/// 4 carries positive mass (so no translate limit is the null function).
fn e1_check(name: &str, s: &CoefficientSignal, range: (f64, f64)) -> (bool, String) {
    let (lo, hi) = range;
    if s.lower_bound() < 0.0 {
        return (false, format!("{name} takes negative values"));
    }
    let (_, c) = s.window_integral_range(1.0, lo, hi);
    let (mass, _) = s.window_integral_range(4.0, lo, hi);
    if !c.is_finite() {
        return (false, format!("{name} has unbounded unit-window integrals"));
    }
    if mass <= 1e-12 {
        return (false, format!("{name}: the null function is a translate limit (min mass over windows of length 4 is {mass:.3e})"));
    }
    (true, format!("{name}: unit-window bound C = {c:.6}, min 4-window mass {mass:.6}"))
}

fn nonlinearity_checks(
    h: &Nonlinearity,
    seed: u64,
    range: (f64, f64),
) -> Result<(AssumptionVerdict, AssumptionVerdict, AssumptionVerdict)> {
    let field = {
        let h = h.clone();
        let bps = vec![h.base.clone(), h.gain.clone()];
        VectorField::new(FnField::new("h", 1, false, move |t, a, x, _, out| out[0] = h.eval(t, a, x[0])).with_signals(bps))
    };
    let sampler = Sampler { seed, t_range: range, trials: 2000, ..Default::default() };
    let k2 = check_condition(&field, Condition::K2, &sampler)?;
    // flat for y <= 0
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut flat = 0.0f64;
    for _ in 0..500 {
        let t = rng.gen_range(range.0..range.1);
        let y = -rng.gen_range(0.0..10.0);
        flat = flat.max((h.eval(t, t, y) - h.eval(t, t, 0.0)).abs());
    }
    let e2 = AssumptionVerdict {
        name: String::new(),
        verdict: Verdict::from_pass(k2.verdict.passed() && flat == 0.0),
        detail: format!("h monotone in y (worst violation {:.3e}); |h(t,y) - h(t,0)| for y <= 0 at most {flat:.3e}", k2.worst_violation),
    };
    let s = check_condition(&field, Condition::S, &Sampler { seed, t_range: range, ..Default::default() })?;
    let sub = AssumptionVerdict {
        name: String::new(),
        verdict: s.verdict,
        detail: format!("h(t, l y) >= l h(t, y) on y >= 0 (worst violation {:.3e})", s.worst_violation),
    };
    let strong = check_condition(&field, Condition::StrongS, &Sampler { seed, t_range: (0.0, 8.0), ..Default::default() })?;
    let st = AssumptionVerdict {
        name: "strongS".into(),
        verdict: strong.verdict,
        detail: format!("worst shortfall below the strictness threshold {:.3e}", strong.worst_violation),
    };
    Ok((e2, sub, st))
}

/// Runs the assumption bundle for a model. Failures are verdicts, not errors.
pub fn validate_assumptions(model: &Model, bundle: Bundle, opts: &ValidationOptions) -> Result<AssumptionReport> {
    let (p, names): (&str, [&str; 5]) = match bundle {
        Bundle::A => ("A", ["A1", "A2", "A3", "A4", "A5"]),
        Bundle::B => ("B", ["B1", "B2", "B3", "B4", "B5"]),
    };
    let (signals, h, beta, gamma): (Vec<(String, CoefficientSignal)>, &Nonlinearity, &CoefficientSignal, &CoefficientSignal) =
        match (model, bundle) {
            (Model::Scalar(m), Bundle::A) => (
                vec![
                    ("alpha".into(), m.spec.alpha.clone()),
                    ("beta".into(), m.spec.beta.clone()),
                    ("gamma".into(), m.spec.gamma.clone()),
                    ("h0".into(), m.spec.h.base.clone()),
                ],
                &m.spec.h,
                &m.spec.beta,
                &m.spec.gamma,
            ),
            (Model::Cyclic(m), Bundle::B) => {
                let mut v: Vec<(String, CoefficientSignal)> =
                    m.spec.alphas.iter().enumerate().map(|(i, a)| (format!("alpha{}", i + 1), a.clone())).collect();
                v.push(("beta".into(), m.spec.beta.clone()));
                v.push(("gamma".into(), m.spec.gamma.clone()));
                v.push(("h0".into(), m.spec.h.base.clone()));
                (v, &m.spec.h, &m.spec.beta, &m.spec.gamma)
            }
            _ => {
                return Err(Error::Assumption(format!("bundle {p} does not apply to this model")));
            }
        };

    let mut entries = Vec::new();
    let mut ok1 = true;
    let mut detail1 = Vec::new();
    for (name, s) in &signals {
        let (ok, d) = e1_check(name, s, opts.t_range);
        ok1 &= ok;
        detail1.push(d);
    }
    entries.push(AssumptionVerdict { name: names[0].into(), verdict: Verdict::from_pass(ok1), detail: detail1.join("; ") });

    let (mut e2, mut sub, strong) = nonlinearity_checks(h, opts.seed, opts.t_range)?;
    e2.name = names[1].into();
    entries.push(e2);

    let (excess, t, y) = domination_excess(h, beta, gamma, opts.seed);
    entries.push(AssumptionVerdict {
        name: names[2].into(),
        verdict: Verdict::from_pass(excess <= DOMINATION_TOL),
        detail: format!("max relative excess of h over beta y + gamma on y >= 0: {excess:.3e} (at t = {t:.4}, y = {y:.4})"),
    });

    let mut worst: Option<DecayEstimate> = None;
    let mut decay_ok = true;
    let mut decay_detail = String::new();
    for &s in &opts.translates {
        let fs = match model {
            Model::Scalar(m) => fundamental_scalar_delay(&m.spec.alpha, &m.spec.beta, s, opts.horizon, &opts.solve),
            Model::Cyclic(m) => fundamental_matrix_ode(&m.spec.alphas, &m.spec.beta, s, opts.horizon, &opts.solve),
            Model::Field(_) => unreachable!(),
        };
        let est = match fs {
            Ok(f) => fit_decay(&f),
            Err(Error::BlowUp { at }) => {
                decay_ok = false;
                decay_detail = format!("fundamental solution from s = {s} blew up at {at}");
                break;
            }
            Err(e) => return Err(e),
        };
        if !est.verdict.passed() {
            decay_ok = false;
            decay_detail = format!("no exponential decay from s = {s} (log-envelope slope {:.4})", -est.delta);
        }
        worst = Some(match worst {
            None => est,
            Some(w) => DecayEstimate { k: w.k.max(est.k), delta: w.delta.min(est.delta), ..w },
        });
        if !decay_ok {
            break;
        }
    }
    if decay_ok {
        if let Some(w) = &worst {
            decay_detail = format!("empirically validated on {} translates: K = {:.4}, delta = {:.4}", opts.translates.len(), w.k, w.delta);
        }
    }
    entries.push(AssumptionVerdict { name: names[3].into(), verdict: Verdict::from_pass(decay_ok), detail: decay_detail });

    sub.name = names[4].into();
    entries.push(sub);
    entries.push(strong);
    Ok(AssumptionReport { bundle, entries, decay: worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_builds() {
        for name in catalog() {
            preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn domination_rejects_steeper_h() {
        let spec =
            ScalarPopulationSpec { alpha: c(1.0), beta: c(0.5), gamma: c(1.0), h: Nonlinearity::new(c(1.0), c(1.0), Shape::Identity) };
        let err = make_scalar_population(spec).unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn cyclic_needs_two_stages() {
        let spec = CyclicFeedbackSpec { alphas: vec![c(1.0)], beta: c(0.25), gamma: c(1.25), h: golden_h() };
        assert!(make_cyclic_feedback(spec).is_err());
    }

    #[test]
    fn step_coefficient_breakpoints_at_integers() {
        let m = preset("step-coefficient").unwrap();
        assert_eq!(m.field().breakpoints(-0.5, 2.5), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = ModelSpec::ScalarPopulation(ScalarPopulationSpec { alpha: c(1.0), beta: c(0.25), gamma: c(1.25), h: golden_h() });
        let j = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(spec, back);
        let p: ModelSpec = serde_json::from_str(r#"{"type":"preset","name":"golden"}"#).unwrap();
        assert!(build_model(&p).is_ok());
    }

    #[test]
    fn assumption_verdicts_match_catalog() {
        let opts = ValidationOptions::default();
        for name in ["golden", "linear-quarter", "step-coefficient", "quasi-periodic"] {
            let r = validate_assumptions(&preset(name).unwrap(), Bundle::A, &opts).unwrap();
            assert!(r.passed(), "{name}: {:?}", r.entries);
        }
        for name in ["cyclic-golden", "cyclic-3", "cyclic-quasi-periodic"] {
            let r = validate_assumptions(&preset(name).unwrap(), Bundle::B, &opts).unwrap();
            assert!(r.passed(), "{name}: {:?}", r.entries);
        }
        for (name, fails) in NEGATIVE_FIXTURES {
            let m = preset(name).unwrap();
            if let Model::Field(_) = m {
                continue;
            }
            let r = validate_assumptions(&m, Bundle::A, &opts).unwrap();
            assert_eq!(r.failed(), fails.to_vec(), "{name}: {:?}", r.entries);
        }
    }
}
