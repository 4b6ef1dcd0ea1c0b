//! Python module `lyasco`: problem files, certificates, stability-constrained
//! solves, simulation and soundness sweeps.

// pyo3 0.22 method wrappers trip this lint.
#![allow(clippy::useless_conversion)]

use lyasco::error::Error;
use lyasco::poly::Polynomial;
use lyasco::polytope::Polytope;
use lyasco::problem::{self, ProblemFile, SolutionFile};
use lyasco::quadratic::{LyapunovFunction, QuadraticCertificate};
use lyasco::sos;
use lyasco::vmin;
use nalgebra::{DMatrix, DVector};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(lyasco, LyascoError, PyException);

fn py_err(e: Error) -> PyErr {
    LyascoError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, value: &impl Serialize) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(|e| LyascoError::new_err(e.to_string()))?;
    Ok(py
        .import_bound("json")?
        .call_method1("loads", (text,))?
        .unbind())
}

fn check_len(expected: usize, found: usize) -> PyResult<()> {
    if expected == found {
        Ok(())
    } else {
        Err(py_err(Error::DimensionMismatch { expected, found }))
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    lyasco::linalg::to_dmatrix(rows).map_err(py_err)
}

fn label(v: &impl Serialize) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// A parsed problem file.
#[pyclass(name = "Problem", module = "lyasco")]
#[derive(Clone)]
struct PyProblem(ProblemFile);

#[pymethods]
impl PyProblem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ProblemFile::from_json(text).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| LyascoError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.0).map_err(|e| LyascoError::new_err(e.to_string()))
    }

    /// Certificate report as a dict.
    fn certify(&self, py: Python<'_>) -> PyResult<PyObject> {
        let r = py
            .allow_threads(|| problem::certify(&self.0))
            .map_err(py_err)?;
        to_py(py, &r)
    }

    fn solve(&self, py: Python<'_>) -> PyResult<PySolution> {
        py.allow_threads(|| problem::solve(&self.0))
            .map(PySolution)
            .map_err(py_err)
    }

    /// Soundness sweep summary as a dict.
    #[pyo3(signature = (cases = 100, seed = 42))]
    fn verify(&self, py: Python<'_>, cases: usize, seed: u64) -> PyResult<PyObject> {
        let r = py
            .allow_threads(|| problem::verify(&self.0, cases, seed))
            .map_err(py_err)?;
        to_py(py, &r)
    }

    fn __repr__(&self) -> String {
        format!("Problem(kind={:?})", self.0.kind())
    }
}

/// Result of a stability-constrained solve.
#[pyclass(name = "Solution", module = "lyasco")]
#[derive(Clone)]
struct PySolution(SolutionFile);

#[pymethods]
impl PySolution {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text)
            .map(Self)
            .map_err(|e| LyascoError::new_err(e.to_string()))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.0).map_err(|e| LyascoError::new_err(e.to_string()))
    }

    #[getter]
    fn kind(&self) -> String {
        self.0.kind.clone()
    }

    #[getter]
    fn decision(&self) -> Vec<f64> {
        self.0.decision.clone()
    }

    #[getter]
    fn parameters(&self) -> Vec<f64> {
        self.0.parameters.clone()
    }

    #[getter]
    fn equilibrium(&self) -> Vec<f64> {
        self.0.equilibrium.clone()
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.0.objective
    }

    #[getter]
    fn v_min(&self) -> f64 {
        self.0.v_min
    }

    #[getter]
    fn v_cleared(&self) -> f64 {
        self.0.v_cleared
    }

    #[getter]
    fn tightness_gap(&self) -> f64 {
        self.0.tightness_gap
    }

    #[getter]
    fn status(&self) -> String {
        label(&self.0.status)
    }

    #[getter]
    fn stability_label(&self) -> String {
        label(&self.0.stability_label)
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(kind={:?}, objective={}, status={}, label={})",
            self.0.kind,
            self.0.objective,
            self.status(),
            self.stability_label()
        )
    }
}

/// Convex polytope `{x : a x ≤ b}`.
#[pyclass(name = "Polytope", module = "lyasco")]
#[derive(Clone)]
struct PyPolytope(Polytope);

#[pymethods]
impl PyPolytope {
    #[new]
    fn new(normals: Vec<Vec<f64>>, offsets: Vec<f64>) -> PyResult<Self> {
        Polytope::new(matrix(&normals)?, DVector::from_vec(offsets))
            .map(Self)
            .map_err(py_err)
    }

    #[staticmethod]
    fn from_box(lo: Vec<f64>, hi: Vec<f64>) -> PyResult<Self> {
        Polytope::from_box(&lo, &hi).map(Self).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn n_facets(&self) -> usize {
        self.0.n_facets()
    }

    #[pyo3(signature = (x, tol = 1e-9))]
    fn contains(&self, x: Vec<f64>, tol: f64) -> PyResult<bool> {
        self.0.contains(&x, tol).map_err(py_err)
    }
}

/// `V(x) = (x − x°)ᵀ P (x − x°)`.
#[pyclass(name = "QuadraticCertificate", module = "lyasco")]
#[derive(Clone)]
struct PyQuadratic(QuadraticCertificate);

#[pymethods]
impl PyQuadratic {
    #[new]
    fn new(p: Vec<Vec<f64>>, equilibrium: Vec<f64>) -> PyResult<Self> {
        QuadraticCertificate::new(matrix(&p)?, DVector::from_vec(equilibrium))
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        check_len(self.0.dim(), x.len())?;
        Ok(self.0.value(&x))
    }

    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        check_len(self.0.dim(), x.len())?;
        Ok(self.0.gradient(&x))
    }

    /// Smallest value of `V` on the boundary of `polytope`, with per-facet
    /// minima, as a dict.
    fn v_min(&self, py: Python<'_>, polytope: &PyPolytope) -> PyResult<PyObject> {
        let x0: Vec<f64> = self.0.equilibrium().iter().copied().collect();
        let r = vmin::v_min(&self.0, &polytope.0, &x0).map_err(py_err)?;
        to_py(py, &r)
    }
}

/// Simulates the problem's disturbance from a solution; returns
/// `(times, states, label)`.
#[pyfunction]
fn simulate(
    py: Python<'_>,
    problem: &PyProblem,
    solution: &PySolution,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, String)> {
    let (traj, l) = py
        .allow_threads(|| problem::simulate(&problem.0, &solution.0))
        .map_err(py_err)?;
    Ok((traj.times().to_vec(), traj.states().to_vec(), label(&l)))
}

/// Gram decomposition of a polynomial given as `[(exponents, coeff), ...]`.
#[pyfunction]
fn sos_decompose(py: Python<'_>, nvars: usize, terms: Vec<(Vec<u32>, f64)>) -> PyResult<PyObject> {
    let mut p = Polynomial::zero(nvars);
    for (m, c) in terms {
        check_len(nvars, m.len())?;
        p.add_term(m, c);
    }
    let d = sos::sos_decompose(&p).map_err(py_err)?;
    to_py(py, &d)
}

#[pymodule]
#[pyo3(name = "lyasco")]
pub fn lyasco_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LyascoError", m.py().get_type_bound::<LyascoError>())?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyPolytope>()?;
    m.add_class::<PyQuadratic>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sos_decompose, m)?)?;
    Ok(())
}
