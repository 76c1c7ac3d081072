//! Python bindings: spaces and grids, flows, recurrence runs, the Lyapunov
//! construction, field checks and the oracle suite.

use std::str::FromStr;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use strongchain_core::config::RunConfig;
use strongchain_core::export;
use strongchain_core::flow::{FlowMap, VectorFieldSpec, DEFAULT_DT};
use strongchain_core::oracle::run_oracle_suite;
use strongchain_core::pipeline::{self, FieldVerdict};
use strongchain_core::space::{build_grid, SampleGrid, SpaceDescriptor};
use strongchain_core::systems::SystemId;
use strongchain_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Input(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Build a run configuration from `system` and keyword overrides.
fn make_config(py: Python<'_>, system: Option<&str>, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<RunConfig> {
    let dict = PyDict::new(py);
    if let Some(o) = overrides {
        dict.update(o.as_mapping())?;
    }
    if let Some(s) = system {
        dict.set_item("system", s)?;
    }
    let text: String = py.import("json")?.call_method1("dumps", (dict,))?.extract()?;
    RunConfig::from_json(&text).map_err(py_err)
}

fn system_id(name: &str) -> PyResult<SystemId> {
    SystemId::from_str(name).map_err(py_err)
}

/// Circle, flat 2-torus or box with its quotient metric.
#[pyclass(name = "Space", frozen)]
struct PySpace {
    inner: SpaceDescriptor,
}

#[pymethods]
impl PySpace {
    #[staticmethod]
    #[pyo3(signature = (length=1.0))]
    fn circle(length: f64) -> PyResult<Self> {
        Ok(PySpace { inner: SpaceDescriptor::circle(length).map_err(py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (ex=1.0, ey=1.0))]
    fn torus(ex: f64, ey: f64) -> PyResult<Self> {
        Ok(PySpace { inner: SpaceDescriptor::torus2(ex, ey).map_err(py_err)? })
    }

    #[staticmethod]
    fn cuboid(extents: Vec<f64>) -> PyResult<Self> {
        Ok(PySpace { inner: SpaceDescriptor::cuboid(extents).map_err(py_err)? })
    }

    /// Space of a builtin system.
    #[staticmethod]
    fn of_system(name: &str) -> PyResult<Self> {
        Ok(PySpace { inner: system_id(name)?.space() })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn diameter(&self) -> f64 {
        self.inner.diameter()
    }

    fn distance(&self, p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
        let p = self.inner.point(&p).map_err(py_err)?;
        let q = self.inner.point(&q).map_err(py_err)?;
        Ok(self.inner.dist(&p, &q))
    }

    fn grid(&self, resolution: Vec<usize>) -> PyResult<PyGrid> {
        Ok(PyGrid { inner: build_grid(&self.inner, &resolution).map_err(py_err)? })
    }

    fn __repr__(&self) -> String {
        format!("Space({:?}, extents={:?})", self.inner.kind, self.inner.extents)
    }
}

/// Regular sample grid on a space.
#[pyclass(name = "Grid", frozen)]
struct PyGrid {
    inner: SampleGrid,
}

#[pymethods]
impl PyGrid {
    #[getter]
    fn mesh(&self) -> f64 {
        self.inner.mesh()
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points().iter().map(|p| p.coords().to_vec()).collect()
    }

    fn nearest_sample(&self, p: Vec<f64>) -> PyResult<usize> {
        let p = self.inner.space().point(&p).map_err(py_err)?;
        Ok(self.inner.nearest_sample(&p))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Names of the builtin systems.
#[pyfunction]
fn systems() -> Vec<&'static str> {
    SystemId::ALL.iter().map(|s| s.name()).collect()
}

/// Flow a point of a builtin system for time `t`.
#[pyfunction]
#[pyo3(signature = (system, point, t, dt=DEFAULT_DT))]
fn flow(system: &str, point: Vec<f64>, t: f64, dt: f64) -> PyResult<Vec<f64>> {
    let id = system_id(system)?;
    let map = FlowMap::new(id.space(), VectorFieldSpec::Builtin { system: id }, dt).map_err(py_err)?;
    let p = id.space().point(&point).map_err(py_err)?;
    Ok(map.flow(&p, t).map_err(py_err)?.coords().to_vec())
}

/// Resolved configuration as a JSON string.
#[pyfunction]
#[pyo3(signature = (system=None, **overrides))]
fn config_json(py: Python<'_>, system: Option<&str>, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<String> {
    Ok(make_config(py, system, overrides)?.resolved().map_err(py_err)?.to_json())
}

/// Recurrence sets of one run.
#[pyclass(name = "Recurrence", frozen, get_all)]
struct PyRecurrence {
    points: Vec<Vec<f64>>,
    mesh: f64,
    epsilon: f64,
    t_values: Vec<f64>,
    recurrence: Vec<Vec<f64>>,
    scr: Vec<bool>,
    cr: Vec<bool>,
    /// Component label per sample, -1 outside SCR.
    components: Vec<i64>,
    component_count: usize,
    /// `(scr, cr)` mismatches against the builtin ground truth.
    ground_truth_mismatches: Option<(usize, usize)>,
    warnings: Vec<String>,
    summary_json: String,
}

#[pymethods]
impl PyRecurrence {
    fn __repr__(&self) -> String {
        format!(
            "Recurrence(samples={}, scr={}, cr={}, components={})",
            self.scr.len(),
            self.scr.iter().filter(|&&b| b).count(),
            self.cr.iter().filter(|&&b| b).count(),
            self.component_count
        )
    }
}

fn recurrence_result(run: &pipeline::RecurrenceRun) -> PyResult<PyRecurrence> {
    let r = &run.report;
    let grid = &run.prepared.grid;
    Ok(PyRecurrence {
        points: grid.points().iter().map(|p| p.coords().to_vec()).collect(),
        mesh: grid.mesh(),
        epsilon: r.epsilon,
        t_values: r.t_values.clone(),
        recurrence: r.recurrence.clone(),
        scr: r.scr.clone(),
        cr: r.cr.clone(),
        components: r.components.clone(),
        component_count: r.component_count(),
        ground_truth_mismatches: run.ground_truth.as_ref().map(|g| (g.scr_mismatches, g.cr_mismatches)),
        warnings: r.warnings.clone(),
        summary_json: export::recurrence_json(run).map_err(py_err)?.to_string(),
    })
}

/// Estimate A_T, SCR, CR and the strong chain transitive components.
#[pyfunction]
#[pyo3(signature = (system=None, **overrides))]
fn recur(py: Python<'_>, system: Option<&str>, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<PyRecurrence> {
    let c = make_config(py, system, overrides)?;
    let run = py.detach(|| pipeline::run_recurrence(&c)).map_err(py_err)?;
    recurrence_result(&run)
}

/// The constructed Lyapunov function and its verification.
#[pyclass(name = "Lyapunov", frozen, get_all)]
struct PyLyapunov {
    recurrence: Py<PyRecurrence>,
    u: Vec<f64>,
    eta: f64,
    lipschitz: f64,
    violation: f64,
    margin: Option<f64>,
    neutral: Vec<bool>,
    symmetric_difference: usize,
    verify_json: String,
}

#[pymethods]
impl PyLyapunov {
    fn __repr__(&self) -> String {
        format!("Lyapunov(violation={:e}, eta={:e}, margin={:?})", self.violation, self.eta, self.margin)
    }
}

/// Build the Lyapunov function `u` and verify it.
#[pyfunction]
#[pyo3(signature = (system=None, **overrides))]
fn lyap(py: Python<'_>, system: Option<&str>, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<PyLyapunov> {
    let c = make_config(py, system, overrides)?;
    let run = py.detach(|| pipeline::run_lyapunov(&c)).map_err(py_err)?;
    let v = &run.verification;
    Ok(PyLyapunov {
        recurrence: Py::new(py, recurrence_result(&run.recurrence)?)?,
        u: run.u.values.clone(),
        eta: run.eta,
        lipschitz: run.lipschitz_u,
        violation: v.violation,
        margin: v.margin,
        neutral: v.neutral.clone(),
        symmetric_difference: v.symmetric_difference,
        verify_json: export::verify_json(&run).map_err(py_err)?.to_string(),
    })
}

/// Classify a tabulated function on the run's grid. Returns the verdict
/// (`"first_integral"`, `"lyapunov"` or `"not_lyapunov"`) and the JSON report.
#[pyfunction]
#[pyo3(signature = (values, system=None, **overrides))]
fn check_field(
    py: Python<'_>,
    values: Vec<f64>,
    system: Option<&str>,
    overrides: Option<&Bound<'_, PyDict>>,
) -> PyResult<(String, String)> {
    let c = make_config(py, system, overrides)?;
    let run = py.detach(|| pipeline::check_field(&c, values)).map_err(py_err)?;
    let verdict = match run.check.verdict {
        FieldVerdict::FirstIntegral => "first_integral",
        FieldVerdict::Lyapunov => "lyapunov",
        FieldVerdict::NotLyapunov => "not_lyapunov",
    };
    Ok((verdict.to_string(), export::check_json(&run).map_err(py_err)?.to_string()))
}

/// Compare budgeted Dijkstra with brute force; returns `(passed, instances)`.
#[pyfunction]
#[pyo3(signature = (count=100, seed=0, inject_corruption=false))]
fn verify_oracle(py: Python<'_>, count: usize, seed: u64, inject_corruption: bool) -> PyResult<(usize, usize)> {
    let s = py.detach(|| run_oracle_suite(count, seed, inject_corruption)).map_err(py_err)?;
    Ok((s.passed, s.instances))
}

#[pymodule]
fn strongchain(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpace>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyRecurrence>()?;
    m.add_class::<PyLyapunov>()?;
    m.add_function(wrap_pyfunction!(systems, m)?)?;
    m.add_function(wrap_pyfunction!(flow, m)?)?;
    m.add_function(wrap_pyfunction!(config_json, m)?)?;
    m.add_function(wrap_pyfunction!(recur, m)?)?;
    m.add_function(wrap_pyfunction!(lyap, m)?)?;
    m.add_function(wrap_pyfunction!(check_field, m)?)?;
    m.add_function(wrap_pyfunction!(verify_oracle, m)?)?;
    Ok(())
}
