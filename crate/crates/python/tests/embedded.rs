use pyo3::ffi::c_str;
use pyo3::prelude::*;
use pyo3::wrap_pymodule;

#[test]
fn module_runs_inside_an_embedded_interpreter() {
    Python::initialize();
    Python::attach(|py| -> PyResult<()> {
        let module = wrap_pymodule!(monoflow_py::monoflow_py)(py);
        py.import("sys")?.getattr("modules")?.set_item("monoflow_py", module)?;
        py.run(
            c_str!(
                r#"
import math
import monoflow_py as mf

m = mf.Model.preset("linear-half")
run = m.simulate(40.0)
assert abs(run["values"][-1][0] - 2.0) < 1e-4, run["values"][-1]
assert m.decay(horizon=30.0)["verdict"] == "pass"
h = mf.History([2.0, 3.0])
assert h.dim == 2
assert abs(h.part_metric(h.scale(0.5)) - math.log(2.0)) < 1e-12
z = mf.Model.preset("cyclic-golden")
assert z.dim == 2 and not z.delayed
assert mf.distance(z, z, metric="sigma_p") == 0.0
"#
            ),
            None,
            None,
        )
    })
    .unwrap();
}
