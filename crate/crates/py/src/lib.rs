//! Python module `bfloat`: parameters, grids, initial data, the vector field,
//! time stepping, runs and the compatibility checkers.

use bfloat_core::compat::{
    check_approx, check_exact, default_m, exact_ladder, generate, taylor_ladder, ScenarioSpec, DEFAULT_ORDER,
};
use bfloat_core::diagnostics::{blowup_monitor, energy_exterior, energy_interior};
use bfloat_core::dynamics::Dynamics;
use bfloat_core::timestepper::{run as run_core, step_rk4, RunConfig};
use bfloat_core::{ExteriorField, GridSpec, ObstacleProfile, Parameters, Side, State};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: bfloat_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Left segment then right, by increasing `x`.
fn concat(f: &ExteriorField) -> Vec<f64> {
    f.left.iter().chain(&f.right).copied().collect()
}

fn split(grid: GridSpec, v: Vec<f64>) -> PyResult<ExteriorField> {
    let n = grid.n_per_side;
    if v.len() != 2 * n {
        return Err(PyValueError::new_err(format!("expected {} values, got {}", 2 * n, v.len())));
    }
    let right = v[n..].to_vec();
    let mut left = v;
    left.truncate(n);
    ExteriorField::from_values(grid, left, right).map_err(err)
}

#[pyclass(name = "Params", module = "bfloat", skip_from_py_object)]
#[derive(Clone)]
struct PyParams(Parameters);

#[pymethods]
impl PyParams {
    /// Flat obstacle at `zeta_w = obstacle_level` on `[-r, r]`.
    #[new]
    #[pyo3(signature = (epsilon, delta, r = 1.0, obstacle_level = 0.0))]
    fn new(epsilon: f64, delta: f64, r: f64, obstacle_level: f64) -> PyResult<Self> {
        let obstacle = ObstacleProfile::Flat { value: obstacle_level };
        Parameters::with_delta(epsilon, delta, r, obstacle).map(PyParams).map_err(err)
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.0.epsilon
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta
    }
    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu
    }
    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    fn __repr__(&self) -> String {
        format!("Params(epsilon={}, delta={}, alpha={})", self.0.epsilon, self.0.delta, self.0.alpha)
    }
}

#[pyclass(name = "Grid", module = "bfloat", skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(GridSpec);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (l, dx, r = 1.0))]
    fn new(l: f64, dx: f64, r: f64) -> PyResult<Self> {
        GridSpec::with_spacing(r, l, dx).map(PyGrid).map_err(err)
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.0.dx
    }
    #[getter]
    fn n_per_side(&self) -> usize {
        self.0.n_per_side
    }

    /// Node abscissae, left segment then right.
    fn x(&self) -> Vec<f64> {
        let g = self.0;
        Side::BOTH.iter().flat_map(|&s| (0..g.n_per_side).map(move |i| g.x(s, i))).collect()
    }
}

#[pyclass(name = "State", module = "bfloat", skip_from_py_object)]
#[derive(Clone)]
struct PyState(State);

#[pymethods]
impl PyState {
    /// From `theta` and `q` sampled on `grid` (left then right).
    #[new]
    fn new(grid: &PyGrid, theta: Vec<f64>, q: Vec<f64>) -> PyResult<Self> {
        Ok(PyState(State { t: 0.0, theta: split(grid.0, theta)?, q: split(grid.0, q)? }))
    }

    #[getter]
    fn t(&self) -> f64 {
        self.0.t
    }
    #[getter]
    fn theta(&self) -> Vec<f64> {
        concat(&self.0.theta)
    }
    #[getter]
    fn q(&self) -> Vec<f64> {
        concat(&self.0.q)
    }

    fn zeta(&self, epsilon: f64) -> PyResult<Vec<f64>> {
        self.0.zeta(epsilon).map(|z| concat(&z)).map_err(err)
    }

    fn q_jump(&self) -> f64 {
        self.0.q.jump()
    }
}

/// Initial data of a named family.
#[pyfunction]
#[pyo3(signature = (kind, params, grid, amplitude = None, center = None, width = None, margin = None))]
fn scenario(
    kind: &str,
    params: &PyParams,
    grid: &PyGrid,
    amplitude: Option<f64>,
    center: Option<f64>,
    width: Option<f64>,
    margin: Option<f64>,
) -> PyResult<PyState> {
    let mut spec = ScenarioSpec::new(kind);
    spec.amplitude = amplitude.unwrap_or(spec.amplitude);
    spec.center = center.unwrap_or(spec.center);
    spec.width = width.unwrap_or(spec.width);
    spec.margin = margin.unwrap_or(spec.margin);
    generate(&spec, &params.0, grid.0).map(PyState).map_err(err)
}

/// `(d_t theta, d_t q, d_t <q>)`.
#[pyfunction]
fn rhs(state: &PyState, params: &PyParams) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let d = Dynamics::new(&params.0, state.0.grid()).map_err(err)?;
    let ev = d.rhs(&state.0).map_err(err)?;
    Ok((concat(&ev.dtheta), concat(&ev.dq), ev.d_avg_q))
}

/// One classical RK4 step.
#[pyfunction]
fn step(state: &PyState, dt: f64, params: &PyParams) -> PyResult<PyState> {
    step_rk4(&state.0, dt, &params.0).map(PyState).map_err(err)
}

#[pyfunction]
fn monitor(state: &PyState, epsilon: f64) -> f64 {
    blowup_monitor(&state.0, epsilon)
}

/// Total energy `E_ext + E_int`.
#[pyfunction]
fn energy(state: &PyState, params: &PyParams) -> PyResult<f64> {
    let d = Dynamics::new(&params.0, state.0.grid()).map_err(err)?;
    let ev = d.rhs(&state.0).map_err(err)?;
    let zeta = state.0.zeta(params.0.epsilon).map_err(err)?;
    let ext = energy_exterior(&zeta, &state.0.q, &ev.dq, &params.0);
    Ok(ext.energy + energy_interior(state.0.q.average(), &params.0))
}

/// Runs to `t_final`. Returns a dict with `status`, `message`, `blowup`,
/// `t`, `e_tot`, `m0` (per recorded step) and `final` (a `State`).
#[pyfunction]
#[pyo3(signature = (state, params, t_final, dt = None, cfl = 1.0))]
fn run<'py>(
    py: Python<'py>,
    state: &PyState,
    params: &PyParams,
    t_final: f64,
    dt: Option<f64>,
    cfl: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let grid = state.0.grid();
    let mut cfg = RunConfig::new(params.0.clone(), grid);
    cfg.t_final = t_final;
    cfg.cfl = cfl;
    if let Some(dt) = dt {
        cfg.dt = dt;
    }
    let out = run_core(&cfg, &state.0).map_err(err)?;
    let d = PyDict::new(py);
    let status = serde_json::to_value(&out.status).expect("serializable");
    d.set_item("status", status["status"].as_str().unwrap_or_default())?;
    d.set_item("message", out.status.message())?;
    d.set_item("blowup", out.status.is_blowup())?;
    d.set_item("t", out.energies.iter().map(|r| r.t).collect::<Vec<_>>())?;
    d.set_item("e_tot", out.energies.iter().map(|r| r.e_tot).collect::<Vec<_>>())?;
    d.set_item("m0", out.energies.iter().map(|r| r.m0).collect::<Vec<_>>())?;
    d.set_item("final", PyState(out.final_state))?;
    Ok(d)
}

/// Compatibility check of order `n`. `mode` is `"exact"` or `"approx"`;
/// returns `(pass, rows)` with rows `(j, r1, r2, threshold, pass)`.
#[pyfunction]
#[pyo3(signature = (state, params, mode = "approx", n = DEFAULT_ORDER, m = None))]
fn check_compat(
    state: &PyState,
    params: &PyParams,
    mode: &str,
    n: usize,
    m: Option<f64>,
) -> PyResult<(bool, Vec<(usize, f64, f64, f64, bool)>)> {
    let m = m.unwrap_or_else(|| default_m(&state.0, n));
    let report = match mode {
        "exact" => {
            let ladder = exact_ladder(&state.0, n, &params.0).map_err(err)?;
            check_exact(&ladder, m, n, &params.0).map_err(err)?
        }
        "approx" => {
            let ladder = taylor_ladder(&state.0, n, &params.0).map_err(err)?;
            check_approx(&ladder, m, n, &params.0).map_err(err)?
        }
        other => return Err(PyValueError::new_err(format!("unknown mode `{other}`"))),
    };
    let rows = report.rows.iter().map(|r| (r.j, r.r1, r.r2, r.threshold, r.pass)).collect();
    Ok((report.pass, rows))
}

#[pymodule]
fn bfloat(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyState>()?;
    m.add_function(wrap_pyfunction!(scenario, m)?)?;
    m.add_function(wrap_pyfunction!(rhs, m)?)?;
    m.add_function(wrap_pyfunction!(step, m)?)?;
    m.add_function(wrap_pyfunction!(monitor, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(check_compat, m)?)?;
    Ok(())
}
