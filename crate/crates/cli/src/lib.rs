//! Experiment runner behind the `monoflow` binary: JSON configs in, CSV
//! series and JSON reports out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};

use monoflow::equilibria::{equilibrium_residual, equilibrium_traces_from_linear, limit_equilibrium, PullbackSchedule, TraceOptions};
use monoflow::fields::{check_condition, Condition, ConditionReport, Sampler};
use monoflow::linear::{fit_decay, fundamental_matrix_ode, fundamental_scalar_delay, DecayEstimate, FundamentalSolution};
use monoflow::models::{build_model, validate_assumptions, AssumptionReport, Bundle, Model, ModelSpec, ValidationOptions};
use monoflow::semiflow::{monotonicity_harness, strict_order_harness, sublinearity_harness, HarnessOptions, HarnessResult};
use monoflow::topologies::{distance, Metric, SeminormBasis};
use monoflow::{solve_dde, solve_ode, History, SolveOptions, Status};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

/// Environment variable that overrides `--out`.
pub const OUT_ENV: &str = "MONOFLOW_OUT";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERIFY_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_EQUILIBRIUM: i32 = 4;
pub const EXIT_DECAY: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] monoflow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use monoflow::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_VERIFY_FAIL,
            CliError::Model(e) => match e {
                E::InvalidSignal(_) | E::InvalidModel(_) | E::InvalidOptions(_) | E::DimensionMismatch { .. } | E::GridMismatch { .. } => {
                    EXIT_CONFIG
                }
                E::BlowUp { .. } | E::NonFinite { .. } => EXIT_BLOWUP,
                E::SemiEquilibriumViolated(_) | E::WindowUnderflow { .. } => EXIT_EQUILIBRIUM,
                E::DecayFailure(_) => EXIT_DECAY,
                _ => EXIT_VERIFY_FAIL,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Suite {
    /// Quasi-monotonicity in the current and the delayed state.
    #[serde(rename = "kamke")]
    Kamke,
    /// Every structural condition the field claims.
    #[serde(rename = "conditions")]
    Conditions,
    #[serde(rename = "assumptions-A")]
    AssumptionsA,
    #[serde(rename = "assumptions-B")]
    AssumptionsB,
    #[serde(rename = "monotonicity")]
    Monotonicity,
    #[serde(rename = "strict-order")]
    StrictOrder,
    #[serde(rename = "sublinearity")]
    Sublinearity,
}

/// Initial history for `simulate`; defaults to the constant one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub constant: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceConfig {
    /// Second field; the model is compared against it when set.
    pub other: Option<ModelSpec>,
    /// Translation amounts `s` for a series `d(f_s, f)`.
    pub shifts: Vec<f64>,
    /// Adds the shifts `2^-k` for `k = 0..=dyadic_levels`.
    pub dyadic_levels: Option<u32>,
    pub metric: Metric,
    pub basis: Option<SeminormBasis>,
    /// Points per interval of the seeded standard basis.
    pub points_per_interval: usize,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig { other: None, shifts: Vec::new(), dyadic_levels: None, metric: Metric::Tp, basis: None, points_per_interval: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    /// Initial time of the fundamental solution.
    pub s: f64,
    pub horizon: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig { s: 0.0, horizon: 40.0 }
    }
}

/// One experiment. Sections that a command does not read are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub horizon: f64,
    pub initial: Option<InitialData>,
    pub solver: SolveOptions,
    pub traces: TraceOptions,
    pub schedule: PullbackSchedule,
    /// Spacing, in trace samples, of the flow-invariance residual check.
    pub residual_stride: usize,
    pub suite: Option<Suite>,
    pub sampler: Sampler,
    pub harness: HarnessOptions,
    pub validation: ValidationOptions,
    pub distance: DistanceConfig,
    pub decay: DecayConfig,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelSpec::Preset { name: "golden".into() },
            horizon: 40.0,
            initial: None,
            solver: SolveOptions::default(),
            traces: TraceOptions::default(),
            schedule: PullbackSchedule::default(),
            residual_stride: 8,
            suite: None,
            sampler: Sampler::default(),
            harness: HarnessOptions::default(),
            validation: ValidationOptions::default(),
            distance: DistanceConfig::default(),
            decay: DecayConfig::default(),
            tolerance: None,
            seed: None,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        for opts in [&self.solver, &self.traces.solve, &self.harness.solve, &self.validation.solve] {
            opts.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if !(self.schedule.step > 0.0) {
            return bad("pullback step must be positive".into());
        }
        if self.residual_stride == 0 {
            return bad("residual_stride must be at least 1".into());
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                return bad(format!("tolerance must be positive, got {t}"));
            }
        }
        if self.decay.horizon <= 0.0 {
            return bad("decay horizon must be positive".into());
        }
        Ok(())
    }

    /// Applies command-line overrides of seed and tolerance.
    pub fn apply_overrides(&mut self, seed: Option<u64>, tolerance: Option<f64>) {
        if let Some(s) = seed {
            self.seed = Some(s);
        }
        if let Some(t) = tolerance {
            self.tolerance = Some(t);
        }
        if let Some(s) = self.seed {
            self.sampler.seed = s;
            self.harness.seed = s;
            self.validation.seed = s;
        }
        if let Some(t) = self.tolerance {
            self.sampler.tolerance = t;
            self.harness.tolerance = t;
            self.schedule.tolerance = t;
        }
    }
}

/// Result of a command: files written, a JSON summary and the exit code.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

/// Resolves the output directory: the environment variable wins over the
/// flag, which wins over the config.
pub fn resolve_out(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(env) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    flag.map(Path::to_path_buf).or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Writer { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn text(&mut self, name: &str, body: &str) -> CliResult<()> {
        let p = self.dir.join(name);
        std::fs::write(&p, body)?;
        self.files.push(p);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Config(e.to_string()))?;
        s.push('\n');
        self.text(name, &s)
    }

    fn finish(self, exit_code: i32, summary: Value) -> Outcome {
        Outcome { exit_code, files: self.files, summary }
    }
}

fn model_of(cfg: &ExperimentConfig) -> CliResult<Model> {
    build_model(&cfg.model).map_err(|e| CliError::Config(e.to_string()))
}

/// Integrates the model from a constant history (ODE models from the
/// constant state) up to the horizon.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> CliResult<Outcome> {
    let model = model_of(cfg)?;
    let f = model.field();
    let x0 = match &cfg.initial {
        Some(init) => init.constant.clone(),
        None => vec![1.0; f.dim()],
    };
    if x0.len() != f.dim() {
        return Err(CliError::Config(format!("initial value has dimension {}, model has {}", x0.len(), f.dim())));
    }
    let seg = if f.delayed() {
        let phi = History::constant(&x0, cfg.solver.nodes_per_unit)?;
        solve_dde(f, &phi, cfg.horizon, &cfg.solver)?
    } else {
        solve_ode(f, 0.0, &x0, cfg.horizon, &cfg.solver)?
    };
    let (status, blow_up_at) = match seg.status() {
        Status::BlewUp { at } => ("blew_up", Some(at)),
        _ => ("completed", None),
    };
    let summary = json!({
        "command": "simulate",
        "model": f.label(),
        "horizon": cfg.horizon,
        "status": status,
        "blow_up_at": blow_up_at,
        "t_end": seg.t1(),
        "end_value": seg.end_value(),
    });
    let mut w = Writer::new(out)?;
    w.text("trajectory.csv", &seg.to_csv())?;
    w.json("summary.json", &summary)?;
    let code = if blow_up_at.is_some() { EXIT_BLOWUP } else { EXIT_PASS };
    Ok(w.finish(code, summary))
}

/// Sub- and super-equilibrium traces from the linear bounds, their pullback
/// limits, and the convergence diagnostics.
pub fn cmd_pullback(cfg: &ExperimentConfig, out: &Path) -> CliResult<Outcome> {
    let model = model_of(cfg)?;
    let f = model.field();
    let (a, b) = equilibrium_traces_from_linear(&model, &cfg.traces)?;
    let mut w = Writer::new(out)?;
    w.text("sub.csv", &a.to_csv())?;
    w.text("super.csv", &b.to_csv())?;
    let lim = match limit_equilibrium(f, &a, &b, &cfg.schedule, &cfg.traces.solve) {
        Ok(l) => l,
        Err(e @ monoflow::Error::SemiEquilibriumViolated(_)) => {
            let summary = json!({ "command": "pullback", "model": f.label(), "error": e.to_string() });
            w.json("diagnostics.json", &summary)?;
            return Ok(w.finish(EXIT_EQUILIBRIUM, summary));
        }
        Err(e) => return Err(e.into()),
    };
    w.text("u.csv", &lim.u.to_csv())?;
    w.text("v.csv", &lim.v.to_csv())?;
    let d = &lim.diagnostics;
    let residual = if cfg.schedule.max_steps > 0 {
        Some(equilibrium_residual(&lim.u, f, cfg.schedule.step, cfg.residual_stride, &cfg.traces.solve)?)
    } else {
        None
    };
    let gap = lim.u.sup_distance(&lim.v)?;
    let violated = d.monotone_violation > cfg.schedule.budget || d.sandwich_residual > cfg.schedule.budget;
    let summary = json!({
        "command": "pullback",
        "model": f.label(),
        "window": [lim.u.t_min, lim.u.t_max()],
        "steps": d.taus.len(),
        "converged": d.converged,
        "monotone_violation": d.monotone_violation,
        "sandwich_residual": d.sandwich_residual,
        "sup_gap_u_v": gap,
        "min_u": lim.u.min_value(),
        "equilibrium_residual": residual,
        "diagnostics": d,
    });
    w.json("diagnostics.json", &summary)?;
    Ok(w.finish(if violated { EXIT_EQUILIBRIUM } else { EXIT_PASS }, summary))
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
enum SuiteReport {
    Conditions(Vec<ConditionReport>),
    Assumptions(AssumptionReport),
    Harness(HarnessResult),
}

impl SuiteReport {
    fn passed(&self) -> bool {
        match self {
            SuiteReport::Conditions(v) => v.iter().all(|r| r.verdict.passed()),
            SuiteReport::Assumptions(r) => r.passed(),
            SuiteReport::Harness(r) => r.verdict.passed(),
        }
    }
}

fn conditions(model: &Model, list: &[Condition], sampler: &Sampler) -> CliResult<SuiteReport> {
    let reports = list.iter().map(|&c| check_condition(model.field(), c, sampler)).collect::<monoflow::Result<Vec<_>>>()?;
    Ok(SuiteReport::Conditions(reports))
}

/// Runs the named suite; exit code 0 iff every verdict passes.
pub fn cmd_verify(cfg: &ExperimentConfig, out: &Path) -> CliResult<Outcome> {
    let suite = cfg.suite.ok_or_else(|| CliError::Config("verify needs a \"suite\"".into()))?;
    let model = model_of(cfg)?;
    let f = model.field();
    let label = f.label();
    let report = match suite {
        Suite::Kamke => conditions(&model, &[Condition::Kx, Condition::Ky], &cfg.sampler)?,
        Suite::Conditions => conditions(&model, &f.flags(), &cfg.sampler)?,
        Suite::AssumptionsA => SuiteReport::Assumptions(validate_assumptions(&model, Bundle::A, &cfg.validation)?),
        Suite::AssumptionsB => SuiteReport::Assumptions(validate_assumptions(&model, Bundle::B, &cfg.validation)?),
        Suite::Monotonicity => SuiteReport::Harness(monotonicity_harness(f, &label, &cfg.harness)?),
        Suite::StrictOrder => SuiteReport::Harness(strict_order_harness(f, &label, &cfg.harness)?),
        Suite::Sublinearity => SuiteReport::Harness(sublinearity_harness(f, &label, &cfg.harness)?),
    };
    let passed = report.passed();
    let summary = json!({ "command": "verify", "suite": suite, "model": label, "passed": passed, "report": report });
    let mut w = Writer::new(out)?;
    w.json("report.json", &summary)?;
    Ok(w.finish(if passed { EXIT_PASS } else { EXIT_VERIFY_FAIL }, summary))
}

/// Distance to a second field, or a series of distances to translates.
pub fn cmd_distance(cfg: &ExperimentConfig, out: &Path) -> CliResult<Outcome> {
    let model = model_of(cfg)?;
    let f = model.field();
    let dc = &cfg.distance;
    let basis = match &dc.basis {
        Some(b) => b.clone(),
        None => SeminormBasis::standard(f.dim(), dc.points_per_interval, cfg.seed.unwrap_or(0)),
    };
    basis.validate(f.dim()).map_err(|e| CliError::Config(e.to_string()))?;
    let mut shifts = dc.shifts.clone();
    if let Some(n) = dc.dyadic_levels {
        shifts.extend((0..=n).map(|k| 0.5f64.powi(k as i32)));
    }
    if dc.other.is_none() && shifts.is_empty() {
        return Err(CliError::Config("distance needs \"other\", \"shifts\" or \"dyadic_levels\"".into()));
    }
    let mut w = Writer::new(out)?;
    let mut summary = json!({ "command": "distance", "model": f.label(), "metric": dc.metric });
    if let Some(spec) = &dc.other {
        let g = build_model(spec).map_err(|e| CliError::Config(e.to_string()))?;
        let r = distance(f, g.field(), &basis, dc.metric)?;
        summary["other"] = json!(g.field().label());
        summary["value"] = json!(r.value);
        summary["terms"] = json!(r.terms);
    }
    if !shifts.is_empty() {
        let values = rayon_map(&shifts, |&s| distance(&f.translate(s), f, &basis, dc.metric).map(|r| r.value))?;
        let mut csv = String::from("shift,distance\n");
        for (s, v) in shifts.iter().zip(&values) {
            csv.push_str(&format!("{s},{v}\n"));
        }
        w.text("distance_series.csv", &csv)?;
        summary["series"] = json!(shifts.iter().zip(&values).map(|(s, v)| json!({ "shift": s, "distance": v })).collect::<Vec<_>>());
    }
    w.json("distance.json", &summary)?;
    Ok(w.finish(EXIT_PASS, summary))
}

fn rayon_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> monoflow::Result<R> + Sync + Send) -> monoflow::Result<Vec<R>> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

fn fundamental_of(model: &Model, dc: &DecayConfig, opts: &SolveOptions) -> CliResult<FundamentalSolution> {
    match model {
        Model::Scalar(m) => Ok(fundamental_scalar_delay(&m.spec.alpha, &m.spec.beta, dc.s, dc.horizon, opts)?),
        Model::Cyclic(m) => Ok(fundamental_matrix_ode(&m.spec.alphas, &m.spec.beta, dc.s, dc.horizon, opts)?),
        Model::Field(_) => Err(CliError::Config("decay needs a scalar population or cyclic feedback model".into())),
    }
}

fn fundamental_csv(u: &FundamentalSolution) -> String {
    let mut s = String::from("tau,norm");
    for i in 0..u.dim {
        for j in 0..u.dim {
            s.push_str(&format!(",u{}{}", i + 1, j + 1));
        }
    }
    s.push('\n');
    for (i, tau) in u.taus.iter().enumerate() {
        s.push_str(&format!("{tau},{}", u.norm(i)));
        for v in u.matrix(i) {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}

/// Fits `|U(s + tau, s)| <= K exp(-delta tau)` to the fundamental solution
/// of the model's linear part; exit code 5 if no decay is found.
pub fn cmd_decay(cfg: &ExperimentConfig, out: &Path) -> CliResult<Outcome> {
    let model = model_of(cfg)?;
    let u = fundamental_of(&model, &cfg.decay, &cfg.solver)?;
    let est: DecayEstimate = fit_decay(&u);
    let passed = est.verdict.passed();
    let summary = json!({
        "command": "decay",
        "model": model.field().label(),
        "s": cfg.decay.s,
        "horizon": cfg.decay.horizon,
        "passed": passed,
        "estimate": est,
    });
    let mut w = Writer::new(out)?;
    w.text("fundamental.csv", &fundamental_csv(&u))?;
    w.json("decay.json", &summary)?;
    Ok(w.finish(if passed { EXIT_PASS } else { EXIT_DECAY }, summary))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Pullback,
    Verify,
    Distance,
    Decay,
}

/// Runs a command on a worker pool of `jobs` threads (all cores if `None`).
pub fn run(cmd: Command, cfg: &ExperimentConfig, out: &Path, jobs: Option<usize>) -> CliResult<Outcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| match cmd {
        Command::Simulate => cmd_simulate(cfg, out),
        Command::Pullback => cmd_pullback(cfg, out),
        Command::Verify => cmd_verify(cfg, out),
        Command::Distance => cmd_distance(cfg, out),
        Command::Decay => cmd_decay(cfg, out),
    })
}
