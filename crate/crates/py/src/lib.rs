//! Python bindings: `import dpo_sim`.
//!
//! Plain data (normal-mode tables, sweep rows, observables, summaries) comes
//! back as dicts; models, states and Wigner grids are classes.

use dpo_core::lindblad::{self, Displacement, SolveMethod, SteadyStateOptions, TruncationOptions};
use dpo_core::normal_modes::{self, Bath, PhysicalParams};
use dpo_core::semiclassical::{self, Drive, SolverOptions, SweepAxis};
use dpo_core::wigner::{self as wig, GridSpec};
use dpo_core::{Error, C64};
use pyo3::exceptions::{PyMemoryError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyList, PyString};
use serde_json::Value;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidDimension(_)
        | Error::Shape(_)
        | Error::InvalidParameter { .. }
        | Error::Domain(_)
        | Error::DegenerateModel(_)
        | Error::Undefined(_) => PyValueError::new_err(e.to_string()),
        Error::Capacity(_) => PyMemoryError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// JSON-shaped data to Python objects; complex numbers stay `[re, im]`.
fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => PyFloat::new(py, n.as_f64().unwrap_or(f64::NAN)).into_any(),
        },
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_dict<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &v)
}

fn drive_from(omega_minus: Option<f64>, alpha0: Option<f64>, omega_tilde: Option<f64>) -> PyResult<Option<Drive>> {
    match (omega_minus, alpha0, omega_tilde) {
        (None, None, None) => Ok(None),
        (Some(v), None, None) => Ok(Some(Drive::OmegaMinus(v))),
        (None, Some(v), None) => Ok(Some(Drive::Alpha0(v))),
        (None, None, Some(v)) => Ok(Some(Drive::OmegaTilde(v))),
        _ => Err(PyValueError::new_err("give at most one of omega_minus, alpha0, omega_tilde")),
    }
}

/// Reduced two-mode model in the probe frame.
#[pyclass(name = "DpoModel", module = "dpo_sim", from_py_object)]
#[derive(Clone)]
struct PyDpoModel {
    inner: semiclassical::DpoModel,
}

#[pymethods]
impl PyDpoModel {
    #[new]
    #[pyo3(signature = (kappa_minus, gamma1, gtilde_minus, nth_minus=0.0, nth_1=0.0, delta_p=0.0, *, omega_minus=None, alpha0=None, omega_tilde=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        kappa_minus: f64,
        gamma1: f64,
        gtilde_minus: f64,
        nth_minus: f64,
        nth_1: f64,
        delta_p: f64,
        omega_minus: Option<f64>,
        alpha0: Option<f64>,
        omega_tilde: Option<f64>,
    ) -> PyResult<Self> {
        let drive = drive_from(omega_minus, alpha0, omega_tilde)?.unwrap_or(Drive::OmegaMinus(0.0));
        let inner = semiclassical::DpoModel::new(kappa_minus, gamma1, gtilde_minus, nth_minus, nth_1, delta_p, drive)
            .map_err(py_err)?;
        Ok(PyDpoModel { inner })
    }

    /// Model given by `beta_crit` and `C_-` instead of the raw rates.
    #[staticmethod]
    #[pyo3(signature = (kappa_minus, beta_crit, c_minus, nth_minus=0.0, nth_1=0.0, delta_p=0.0, *, omega_minus=None, alpha0=None, omega_tilde=None))]
    #[allow(clippy::too_many_arguments)]
    fn from_critical(
        kappa_minus: f64,
        beta_crit: f64,
        c_minus: f64,
        nth_minus: f64,
        nth_1: f64,
        delta_p: f64,
        omega_minus: Option<f64>,
        alpha0: Option<f64>,
        omega_tilde: Option<f64>,
    ) -> PyResult<Self> {
        let drive = drive_from(omega_minus, alpha0, omega_tilde)?.unwrap_or(Drive::OmegaMinus(0.0));
        let inner =
            semiclassical::DpoModel::from_critical(kappa_minus, beta_crit, c_minus, nth_minus, nth_1, delta_p, drive)
                .map_err(py_err)?;
        Ok(PyDpoModel { inner })
    }

    #[pyo3(signature = (*, omega_minus=None, alpha0=None, omega_tilde=None))]
    fn with_drive(&self, omega_minus: Option<f64>, alpha0: Option<f64>, omega_tilde: Option<f64>) -> PyResult<Self> {
        let drive = drive_from(omega_minus, alpha0, omega_tilde)?
            .ok_or_else(|| PyValueError::new_err("no drive given"))?;
        Ok(PyDpoModel { inner: self.inner.with_drive(drive).map_err(py_err)? })
    }

    fn with_delta_p(&self, delta_p: f64) -> Self {
        PyDpoModel { inner: self.inner.with_delta_p(delta_p) }
    }

    #[getter]
    fn kappa_minus(&self) -> f64 {
        self.inner.kappa_minus
    }
    #[getter]
    fn gamma1(&self) -> f64 {
        self.inner.gamma1
    }
    #[getter]
    fn gtilde_minus(&self) -> f64 {
        self.inner.gtilde_minus
    }
    #[getter]
    fn nth_minus(&self) -> f64 {
        self.inner.nth_minus
    }
    #[getter]
    fn nth_1(&self) -> f64 {
        self.inner.nth_1
    }
    #[getter]
    fn delta_p(&self) -> f64 {
        self.inner.delta_p
    }
    #[getter]
    fn omega_minus(&self) -> f64 {
        self.inner.omega_minus
    }
    #[getter]
    fn alpha0(&self) -> f64 {
        self.inner.alpha0
    }
    #[getter]
    fn omega_tilde(&self) -> f64 {
        self.inner.omega_tilde
    }
    #[getter]
    fn beta_crit(&self) -> f64 {
        self.inner.beta_crit
    }
    #[getter]
    fn c_minus(&self) -> f64 {
        self.inner.c_minus
    }

    fn __repr__(&self) -> String {
        let m = &self.inner;
        format!(
            "DpoModel(kappa_minus={}, beta_crit={}, c_minus={}, nth_minus={}, nth_1={}, delta_p={}, omega_tilde={})",
            m.kappa_minus, m.beta_crit, m.c_minus, m.nth_minus, m.nth_1, m.delta_p, m.omega_tilde
        )
    }
}

/// Normal-mode data of the physical three-mode system, as a dict.
#[pyfunction]
#[pyo3(signature = (g0, coupling, delta, omega_m1, omega_m2, kappa, gamma1, gamma2, *, temperature=None, n_b1=0.0, n_b2=0.0))]
#[allow(clippy::too_many_arguments)]
fn derive_normal_modes<'py>(
    py: Python<'py>,
    g0: f64,
    coupling: f64,
    delta: f64,
    omega_m1: f64,
    omega_m2: f64,
    kappa: f64,
    gamma1: f64,
    gamma2: f64,
    temperature: Option<f64>,
    n_b1: f64,
    n_b2: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let bath = match temperature {
        Some(t) => Bath::Temperature(t),
        None => Bath::Occupations { n_b1, n_b2 },
    };
    let params = PhysicalParams { g0, coupling, delta, omega_m1, omega_m2, kappa, gamma1, gamma2, bath };
    let data = normal_modes::derive_normal_modes(&params).map_err(py_err)?;
    to_dict(py, &data)
}

/// Gaussian self-consistent solution of the probe response.
#[pyclass(name = "SemiclassicalSolution", module = "dpo_sim", frozen)]
struct PySolution {
    inner: semiclassical::SemiclassicalSolution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn b(&self) -> C64 {
        self.inner.b
    }
    #[getter]
    fn alpha(&self) -> C64 {
        self.inner.alpha
    }
    #[getter]
    fn beta(&self) -> C64 {
        self.inner.beta
    }
    #[getter]
    fn n(&self) -> f64 {
        self.inner.n
    }
    #[getter]
    fn sigma(&self) -> C64 {
        self.inner.sigma
    }
    #[getter]
    fn n_inc(&self) -> f64 {
        self.inner.n_inc
    }
    #[getter]
    fn g2(&self) -> Option<f64> {
        self.inner.g2
    }
    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }
    #[getter]
    fn alpha_ratio(&self) -> f64 {
        self.inner.alpha_ratio()
    }

    fn __repr__(&self) -> String {
        format!("SemiclassicalSolution(b={}, alpha={}, n={}, g2={:?})", self.inner.b, self.inner.alpha, self.inner.n, self.inner.g2)
    }
}

fn solver_options(tol: Option<f64>) -> SolverOptions {
    let mut o = SolverOptions::default();
    if let Some(t) = tol {
        o.tol = t;
    }
    o
}

#[pyfunction]
#[pyo3(signature = (model, tol=None))]
fn solve_self_consistency(model: &PyDpoModel, tol: Option<f64>) -> PyResult<PySolution> {
    let inner = semiclassical::solve_self_consistency(&model.inner, &solver_options(tol)).map_err(py_err)?;
    Ok(PySolution { inner })
}

/// Roots of the classical cubic as `(alpha, beta, preferred)` tuples.
#[pyfunction]
fn classical_response(model: &PyDpoModel) -> Vec<(C64, C64, bool)> {
    semiclassical::classical_response(&model.inner)
        .into_iter()
        .map(|r| (r.alpha, r.beta, r.preferred))
        .collect()
}

#[pyfunction]
fn analytic_b(model: &PyDpoModel) -> PyResult<f64> {
    semiclassical::analytic_b(&model.inner).map_err(py_err)
}

/// Sweep rows as dicts with keys `axis_value, B_abs, alpha_ratio, n_inc_scaled, g2, converged`.
#[pyfunction]
#[pyo3(signature = (model, axis, grid, workers=1, tol=None))]
fn sweep<'py>(
    py: Python<'py>,
    model: &PyDpoModel,
    axis: &str,
    grid: Vec<f64>,
    workers: usize,
    tol: Option<f64>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let axis = match axis {
        "drive" => SweepAxis::Drive,
        "detuning" => SweepAxis::Detuning,
        other => return Err(PyValueError::new_err(format!("axis must be 'drive' or 'detuning', got '{other}'"))),
    };
    let opts = solver_options(tol);
    let rows = py
        .detach(|| semiclassical::sweep_parallel(&model.inner, axis, &grid, &opts, workers))
        .map_err(py_err)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("axis_value", r.axis_value)?;
            d.set_item("B_abs", r.b_abs)?;
            d.set_item("alpha_ratio", r.alpha_ratio)?;
            d.set_item("n_inc_scaled", r.n_inc_scaled)?;
            d.set_item("g2", r.g2)?;
            d.set_item("converged", r.converged)?;
            Ok(d)
        })
        .collect()
}

/// Density matrix on a truncated Fock space, with its displacement record.
#[pyclass(name = "DensityMatrix", module = "dpo_sim", frozen)]
struct PyDensityMatrix {
    inner: dpo_core::fock::DensityMatrix,
}

#[pymethods]
impl PyDensityMatrix {
    #[staticmethod]
    fn fock(dim: usize, n: usize) -> PyResult<Self> {
        Ok(PyDensityMatrix { inner: dpo_core::fock::DensityMatrix::fock(dim, n).map_err(py_err)? })
    }

    #[staticmethod]
    fn coherent(dim: usize, alpha: C64) -> PyResult<Self> {
        Ok(PyDensityMatrix { inner: dpo_core::fock::DensityMatrix::coherent(dim, alpha).map_err(py_err)? })
    }

    #[staticmethod]
    fn thermal(dim: usize, n: f64) -> PyResult<Self> {
        Ok(PyDensityMatrix { inner: dpo_core::fock::DensityMatrix::thermal(dim, n).map_err(py_err)? })
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims().to_vec()
    }

    #[getter]
    fn displacement(&self) -> Vec<C64> {
        self.inner.displacement().to_vec()
    }

    fn trace(&self) -> C64 {
        self.inner.trace()
    }

    fn purity(&self) -> f64 {
        self.inner.purity()
    }

    fn populations(&self) -> Vec<f64> {
        self.inner.populations()
    }

    /// Dense matrix as a list of rows.
    fn matrix(&self) -> Vec<Vec<C64>> {
        let m = self.inner.matrix();
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
    }

    /// Reduced states `(c, b)` of a two-mode state.
    fn reduced(&self) -> PyResult<(PyDensityMatrix, PyDensityMatrix)> {
        let (c, b) = lindblad::reduced_states(&self.inner).map_err(py_err)?;
        Ok((PyDensityMatrix { inner: c }, PyDensityMatrix { inner: b }))
    }

    /// Displacement-corrected moments of a two-mode state, as a dict.
    fn observables<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &lindblad::observables(&self.inner).map_err(py_err)?)
    }

    fn trace_distance(&self, other: &PyDensityMatrix) -> PyResult<f64> {
        self.inner.trace_distance(&other.inner).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix(dims={:?}, displacement={:?})", self.inner.dims(), self.inner.displacement())
    }
}

/// Steady state with solver diagnostics.
#[pyclass(name = "SteadyState", module = "dpo_sim", frozen)]
struct PySteadyState {
    #[pyo3(get)]
    rho: Py<PyDensityMatrix>,
    #[pyo3(get)]
    method: String,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    residual: f64,
    #[pyo3(get)]
    clipped_mass: f64,
    #[pyo3(get)]
    dims: (usize, usize),
    #[pyo3(get)]
    warnings: Vec<String>,
}

fn wrap_state(py: Python<'_>, s: lindblad::SteadyState, dims: (usize, usize)) -> PyResult<PySteadyState> {
    let method = match s.method {
        lindblad::SolvedBy::Direct => "direct",
        lindblad::SolvedBy::InverseIteration => "inverse_iteration",
        lindblad::SolvedBy::Gmres => "gmres",
    };
    Ok(PySteadyState {
        rho: Py::new(py, PyDensityMatrix { inner: s.rho })?,
        method: method.to_string(),
        iterations: s.iterations,
        residual: s.residual,
        clipped_mass: s.clipped_mass,
        dims,
        warnings: s.warnings,
    })
}

fn displacement_for(model: &semiclassical::DpoModel, displace: bool) -> PyResult<Displacement> {
    if displace && model.gtilde_minus != 0.0 {
        Displacement::semiclassical(model, &SolverOptions::default()).map_err(py_err)
    } else {
        Ok(Displacement::zero())
    }
}

fn steady_options(method: &str, tol: Option<f64>) -> PyResult<SteadyStateOptions> {
    let method = match method {
        "auto" => SolveMethod::Auto,
        "direct" => SolveMethod::Direct,
        "iterative" => SolveMethod::Iterative,
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    };
    let mut o = SteadyStateOptions { method, ..Default::default() };
    if let Some(t) = tol {
        o.tol = t;
    }
    Ok(o)
}

/// Lindblad steady state at fixed truncation `dims = (Nc, Nb)`.
#[pyfunction]
#[pyo3(signature = (model, dims, displace=true, method="auto", tol=None))]
fn steady_state(
    py: Python<'_>,
    model: &PyDpoModel,
    dims: (usize, usize),
    displace: bool,
    method: &str,
    tol: Option<f64>,
) -> PyResult<PySteadyState> {
    let d = displacement_for(&model.inner, displace)?;
    let opts = steady_options(method, tol)?;
    let s = py
        .detach(|| lindblad::solve_at(&model.inner, dims, d, &opts, None))
        .map_err(py_err)?;
    wrap_state(py, s, dims)
}

/// Grows the truncation from `start` until tails and successive states agree
/// within `tol`; returns the steady state and the step report.
#[pyfunction]
#[pyo3(signature = (model, start=(4, 4), tol=1e-4, max_state_dim=600, displace=true))]
fn converge_truncation<'py>(
    py: Python<'py>,
    model: &PyDpoModel,
    start: (usize, usize),
    tol: f64,
    max_state_dim: usize,
    displace: bool,
) -> PyResult<(PySteadyState, Bound<'py, PyAny>)> {
    let d = displacement_for(&model.inner, displace)?;
    let opts = TruncationOptions { tol, max_state_dim, ..Default::default() };
    let r = py
        .detach(|| lindblad::converge_truncation(&model.inner, d, start, &opts))
        .map_err(py_err)?;
    let steps = to_dict(py, &r.steps)?;
    Ok((wrap_state(py, r.state, r.dims)?, steps))
}

/// Wigner function on a grid.
#[pyclass(name = "WignerGrid", module = "dpo_sim", frozen)]
struct PyWignerGrid {
    inner: wig::WignerGrid,
}

#[pymethods]
impl PyWignerGrid {
    #[getter]
    fn re_axis(&self) -> Vec<f64> {
        self.inner.re_axis.clone()
    }
    #[getter]
    fn im_axis(&self) -> Vec<f64> {
        self.inner.im_axis.clone()
    }
    /// `values[i][j]` at `re_axis[j] + 1j * im_axis[i]`.
    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        self.inner.values.clone()
    }
    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass
    }
    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &wig::summarize(&self.inner))
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut out = Vec::new();
        self.inner.write_csv(&mut out).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        String::from_utf8(out).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

/// Wigner function of a single-mode state. `bounds = (re_min, re_max,
/// im_min, im_max)` with `points` per axis; without bounds the grid is sized
/// from the state's moments.
#[pyfunction]
#[pyo3(signature = (rho, points=121, bounds=None))]
fn wigner(py: Python<'_>, rho: &PyDensityMatrix, points: usize, bounds: Option<(f64, f64, f64, f64)>) -> PyResult<PyWignerGrid> {
    let spec = match bounds {
        Some((re_min, re_max, im_min, im_max)) => GridSpec::Explicit { re_min, re_max, im_min, im_max, n_re: points, n_im: points },
        None => GridSpec::Auto { points },
    };
    let inner = py.detach(|| wig::wigner(&rho.inner, &spec)).map_err(py_err)?;
    Ok(PyWignerGrid { inner })
}

/// Adiabatic cooling prediction `(gamma1_eff, nth1_eff)`.
#[pyfunction]
fn dpo_cooling(gamma1: f64, c_minus: f64, nth_minus: f64, nth_1: f64) -> (f64, f64) {
    normal_modes::dpo_cooling(gamma1, c_minus, nth_minus, nth_1)
}

#[pymodule]
fn dpo_sim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDpoModel>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyDensityMatrix>()?;
    m.add_class::<PySteadyState>()?;
    m.add_class::<PyWignerGrid>()?;
    m.add_function(wrap_pyfunction!(derive_normal_modes, m)?)?;
    m.add_function(wrap_pyfunction!(solve_self_consistency, m)?)?;
    m.add_function(wrap_pyfunction!(classical_response, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_b, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(converge_truncation, m)?)?;
    m.add_function(wrap_pyfunction!(wigner, m)?)?;
    m.add_function(wrap_pyfunction!(dpo_cooling, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
