use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module(code: &str) {
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(idlesched_py::idlesched_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("s", module).unwrap();
        let code = std::ffi::CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn table1_through_python() {
    with_module(
        r#"
inst = s.Instance([(0, 20, 10), (15, 40, 15), (45, 70, 5), (80, 100, 10)])
starts, energy = s.solve(inst, s.EnergyFunction.identity())
assert energy == 40.0 and starts == [10.0, 20.0, 45.0, 80.0]
assert s.brute_force_solve(inst, s.EnergyFunction.identity())[1] == 40.0
assert s.min_switches_solve(inst)[1] == 2
assert abs(s.average_idle_power(inst, 40.0) - 40.0 / 60.0) < 1e-12
assert s.normalize_to_block_form(inst, [5.0, 20.0, 50.0, 80.0], s.EnergyFunction.identity()) == starts
"#,
    );
}

#[test]
fn furnace_and_errors_through_python() {
    with_module(
        r#"
m = s.FurnaceModel()
assert abs(m.trim_power(960.0) - 40.2206) < 1e-3
assert 0.0 < m.switching_time_derivative(m.switching_time(100.0)) < 1.0
g = s.TransitionGraph.derive(m, [600.0])
assert g.mode_names() == ["on", "standby_600"]
try:
    s.EnergyFunction.piecewise([(0.0, 0.0), (1.0, 1.0), (2.0, 4.0)])
    raise AssertionError("convex function accepted")
except s.SchedulingError:
    pass
try:
    s.EnergyFunction.from_transition_graph(g)
    raise AssertionError("jumping graph function accepted")
except ValueError:
    pass
"#,
    );
}
