//! Python bindings: models, histories, simulation, pullback equilibria,
//! decay fits, verification and distances. Structured results are returned
//! as plain dicts.

use monoflow::equilibria::{equilibrium_traces_from_linear, limit_equilibrium, PullbackSchedule, TraceOptions};
use monoflow::fields::{check_condition, Condition, Sampler};
use monoflow::linear::{fit_decay, fundamental_matrix_ode, fundamental_scalar_delay};
use monoflow::models::{build_model, catalog as model_catalog, validate_assumptions, Bundle, ModelSpec, ValidationOptions};
use monoflow::semiflow::{monotonicity_harness, strict_order_harness, sublinearity_harness, HarnessOptions};
use monoflow::topologies::{distance as field_distance, Metric, SeminormBasis};
use monoflow::{solve_dde, solve_ode, SolveOptions, Status};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;
use serde_json::json;

create_exception!(monoflow_py, MonoflowError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    MonoflowError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn solve_options(step: Option<f64>) -> PyResult<SolveOptions> {
    let opts = step.map(SolveOptions::with_step).unwrap_or_default();
    opts.validate().map_err(err)?;
    Ok(opts)
}

/// A segment of initial data on `[-1, 0]` sampled on a uniform grid.
#[pyclass(name = "History", module = "monoflow_py", from_py_object)]
#[derive(Clone)]
struct PyHistory {
    inner: monoflow::History,
}

#[pymethods]
impl PyHistory {
    /// Constant history with the given value per component.
    #[new]
    #[pyo3(signature = (value, per_unit = 256))]
    fn new(value: Vec<f64>, per_unit: usize) -> PyResult<Self> {
        Ok(PyHistory { inner: monoflow::History::constant(&value, per_unit).map_err(err)? })
    }

    /// History from node values, node-major (`samples[i * dim + k]`).
    #[staticmethod]
    fn from_samples(dim: usize, per_unit: usize, samples: Vec<f64>) -> PyResult<Self> {
        Ok(PyHistory { inner: monoflow::History::from_samples(dim, per_unit, samples).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn per_unit(&self) -> usize {
        self.inner.per_unit()
    }

    fn samples(&self) -> Vec<f64> {
        self.inner.samples().to_vec()
    }

    /// Value at `s` in `[-1, 0]`.
    fn value(&self, s: f64) -> Vec<f64> {
        self.inner.value(s)
    }

    fn scale(&self, factor: f64) -> Self {
        PyHistory { inner: self.inner.scale(factor) }
    }

    fn part_metric(&self, other: &PyHistory) -> PyResult<f64> {
        self.inner.part_metric(&other.inner).map_err(err)
    }

    fn sup_distance(&self, other: &PyHistory) -> PyResult<f64> {
        self.inner.sup_distance(&other.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("History(dim={}, per_unit={})", self.inner.dim(), self.inner.per_unit())
    }
}

/// A scalar population model, a cyclic feedback system, or a bare test field.
#[pyclass(name = "Model", module = "monoflow_py", skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: monoflow::Model,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        Ok(PyModel { inner: monoflow::preset(name).map_err(err)? })
    }

    /// Builds a model from its JSON description.
    #[staticmethod]
    fn from_json(spec: &str) -> PyResult<Self> {
        let spec: ModelSpec = serde_json::from_str(spec).map_err(err)?;
        Ok(PyModel { inner: build_model(&spec).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.field().label()
    }

    #[getter]
    fn delayed(&self) -> bool {
        self.inner.field().delayed()
    }

    /// Names of the structural conditions the field claims.
    fn flags(&self) -> Vec<String> {
        self.inner.field().flags().iter().map(|c| c.name().to_string()).collect()
    }

    /// The time translate `f_s` as a bare field.
    fn translated(&self, s: f64) -> Self {
        PyModel { inner: monoflow::Model::Field(self.inner.field().translate(s)) }
    }

    /// Right-hand side at time `t` with current state `x` and delayed state `y`.
    fn eval(&self, t: f64, x: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<f64>> {
        let n = self.inner.dim();
        if x.len() != n || y.len() != n {
            return Err(err(format!("states must have dimension {n}")));
        }
        Ok(self.inner.field().eval_at(t, &x, &y))
    }

    /// Integrates from a constant history (or a given `History`) up to
    /// `horizon`; returns knot times, values and the blow-up time, if any.
    #[pyo3(signature = (horizon, initial = None, history = None, step = None))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        horizon: f64,
        initial: Option<Vec<f64>>,
        history: Option<PyHistory>,
        step: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let f = self.inner.field().clone();
        let opts = solve_options(step)?;
        let x0 = initial.unwrap_or_else(|| vec![1.0; f.dim()]);
        let seg = py
            .detach(|| match (&history, f.delayed()) {
                (Some(h), _) => solve_dde(&f, &h.inner, horizon, &opts),
                (None, true) => monoflow::History::constant(&x0, opts.nodes_per_unit).and_then(|phi| solve_dde(&f, &phi, horizon, &opts)),
                (None, false) => solve_ode(&f, 0.0, &x0, horizon, &opts),
            })
            .map_err(err)?;
        let blow_up_at = match seg.status() {
            Status::BlewUp { at } => Some(at),
            _ => None,
        };
        let values: Vec<&[f64]> = (0..seg.knots().len()).map(|i| seg.knot_value(i)).collect();
        to_py(py, &json!({ "times": seg.knots(), "values": values, "blow_up_at": blow_up_at }))
    }

    /// Sub-/super-equilibria from the linear bounds and their pullback
    /// limits `u <= v` on the trace window.
    #[pyo3(signature = (window = (-80.0, 10.0), trace_step = 0.125, max_steps = 30, tolerance = 1e-8))]
    fn pullback<'py>(
        &self,
        py: Python<'py>,
        window: (f64, f64),
        trace_step: f64,
        max_steps: usize,
        tolerance: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let model = self.inner.clone();
        let opts = TraceOptions { window, step: trace_step, ..Default::default() };
        let schedule = PullbackSchedule { max_steps, tolerance, ..Default::default() };
        let (a, b, lim) = py
            .detach(|| {
                let (a, b) = equilibrium_traces_from_linear(&model, &opts)?;
                let lim = limit_equilibrium(model.field(), &a, &b, &schedule, &opts.solve)?;
                Ok::<_, monoflow::Error>((a, b, lim))
            })
            .map_err(err)?;
        let at_zero = |tr: &monoflow::EquilibriumTrace| -> Vec<Vec<f64>> { tr.values.iter().map(|h| h.last().to_vec()).collect() };
        let times: Vec<f64> = (0..lim.u.values.len()).map(|i| lim.u.time(i)).collect();
        let sub_times: Vec<f64> = (0..a.values.len()).map(|i| a.time(i)).collect();
        to_py(
            py,
            &json!({
                "times": times,
                "u": at_zero(&lim.u),
                "v": at_zero(&lim.v),
                "sub_times": sub_times,
                "sub": at_zero(&a),
                "super": at_zero(&b),
                "diagnostics": lim.diagnostics,
            }),
        )
    }

    /// Exponential decay fit `|U(s + tau, s)| <= K exp(-delta tau)` of the
    /// linear part.
    #[pyo3(signature = (s = 0.0, horizon = 40.0))]
    fn decay<'py>(&self, py: Python<'py>, s: f64, horizon: f64) -> PyResult<Bound<'py, PyAny>> {
        let opts = SolveOptions::default();
        let u = match &self.inner {
            monoflow::Model::Scalar(m) => fundamental_scalar_delay(&m.spec.alpha, &m.spec.beta, s, horizon, &opts),
            monoflow::Model::Cyclic(m) => fundamental_matrix_ode(&m.spec.alphas, &m.spec.beta, s, horizon, &opts),
            monoflow::Model::Field(_) => return Err(err("bare fields have no linear part")),
        }
        .map_err(err)?;
        to_py(py, &fit_decay(&u))
    }

    /// Validates assumption bundle "A" (scalar) or "B" (cyclic).
    #[pyo3(signature = (bundle = "A", seed = 0))]
    fn assumptions<'py>(&self, py: Python<'py>, bundle: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let bundle = match bundle {
            "A" => Bundle::A,
            "B" => Bundle::B,
            other => return Err(err(format!("unknown bundle {other:?}"))),
        };
        let opts = ValidationOptions { seed, ..Default::default() };
        let model = self.inner.clone();
        let report = py.detach(|| validate_assumptions(&model, bundle, &opts)).map_err(err)?;
        to_py(py, &report)
    }

    /// Samples one structural condition ("Kx", "Ky", "S", ...).
    #[pyo3(signature = (condition, trials = 2000, seed = 0))]
    fn check<'py>(&self, py: Python<'py>, condition: &str, trials: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let cond: Condition = serde_json::from_value(json!(condition)).map_err(err)?;
        let sampler = Sampler { trials, seed, ..Default::default() };
        let report = check_condition(self.inner.field(), cond, &sampler).map_err(err)?;
        to_py(py, &report)
    }

    /// Runs a randomized trajectory harness: "monotonicity",
    /// "strict-order" or "sublinearity".
    #[pyo3(signature = (property, trials = 100, horizon = 10.0, seed = 0))]
    fn harness<'py>(&self, py: Python<'py>, property: &str, trials: usize, horizon: f64, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let opts = HarnessOptions { trials, horizon, seed, ..Default::default() };
        let f = self.inner.field().clone();
        let label = f.label();
        let run = match property {
            "monotonicity" => monotonicity_harness,
            "strict-order" => strict_order_harness,
            "sublinearity" => sublinearity_harness,
            other => return Err(err(format!("unknown harness {other:?}"))),
        };
        let result = py.detach(|| run(&f, &label, &opts)).map_err(err)?;
        to_py(py, &result)
    }

    fn __repr__(&self) -> String {
        format!("Model({}, dim={})", self.inner.field().label(), self.inner.dim())
    }
}

/// Names of all shipped presets and fixtures.
#[pyfunction]
fn catalog() -> Vec<&'static str> {
    model_catalog()
}

/// Distance between two fields in the weighted integral metric ("tp") or
/// its weak counterpart ("sigma_p"), on the seeded standard basis.
#[pyfunction]
#[pyo3(signature = (f, g, metric = "tp", points_per_interval = 4, seed = 0))]
fn distance(f: &PyModel, g: &PyModel, metric: &str, points_per_interval: usize, seed: u64) -> PyResult<f64> {
    let metric: Metric = serde_json::from_value(json!(metric)).map_err(err)?;
    let basis = SeminormBasis::standard(f.inner.dim(), points_per_interval, seed);
    Ok(field_distance(f.inner.field(), g.inner.field(), &basis, metric).map_err(err)?.value)
}

#[pymodule]
pub fn monoflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHistory>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(catalog, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add("MonoflowError", m.py().get_type::<MonoflowError>())?;
    Ok(())
}
