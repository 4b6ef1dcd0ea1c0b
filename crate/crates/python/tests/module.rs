use pyo3::prelude::*;
use pyo3::types::PyDict;

const PENDULUM: &str = include_str!("../../../data/pendulum.json");

fn run(code: &str) {
    Python::with_gil(|py| {
        let m = pyo3::wrap_pymodule!(lyasco_py::lyasco_module)(py);
        let globals = PyDict::new_bound(py);
        globals.set_item("lyasco", m).unwrap();
        globals.set_item("PENDULUM", PENDULUM).unwrap();
        py.run_bound(code, Some(&globals), None).unwrap();
    });
}

#[test]
fn quadratic_vmin_on_box() {
    run(r#"
box = lyasco.Polytope.from_box([-1.0, -1.0], [1.0, 1.0])
cert = lyasco.QuadraticCertificate([[2.0, 0.0], [0.0, 1.0]], [0.0, 0.0])
r = cert.v_min(box)
assert abs(r["v_min"] - 1.0) < 1e-9, r
assert abs(cert.value([1.0, 1.0]) - 3.0) < 1e-12
"#);
}

#[test]
fn pendulum_round_trip() {
    run(r#"
p = lyasco.Problem.from_json(PENDULUM)
assert p.kind == "pendulum"
s = p.solve()
assert s.status == "Optimal", s
t, x, label = lyasco.simulate(p, s)
assert label == "Stable" and len(t) == len(x)
assert lyasco.Solution.from_json(s.to_json()).objective == s.objective
"#);
}

#[test]
fn errors_raise_lyasco_error() {
    run(r#"
try:
    lyasco.QuadraticCertificate([[1.0, 0.0], [0.0, -1.0]], [0.0, 0.0])
    raise AssertionError("indefinite matrix accepted")
except lyasco.LyascoError:
    pass
try:
    lyasco.Problem.from_json("{}")
    raise AssertionError("empty problem accepted")
except lyasco.LyascoError:
    pass
"#);
}
