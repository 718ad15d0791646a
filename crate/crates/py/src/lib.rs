//! Python bindings. Structured results cross the boundary as plain
//! dicts/lists (via JSON), so nothing on the Python side depends on Rust
//! types beyond `Scenario`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use ecomsim::config::{ConfigFile, Resolved};
use ecomsim::planner::{self, Critical};
use ecomsim::reference::REFERENCE;

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn config_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A resolved configuration: scenario, arrival rate, run options and sweep grid.
#[pyclass(module = "pyecomsim", skip_from_py_object)]
#[derive(Clone)]
struct Scenario {
    inner: Resolved,
}

#[pymethods]
impl Scenario {
    /// Built-in mix "S1", "S2" or "S3" with every other setting at its default.
    #[staticmethod]
    #[pyo3(signature = (name, lam = 10.0))]
    fn preset(name: &str, lam: f64) -> PyResult<Self> {
        let inner = ConfigFile::preset(name, lam)
            .resolve()
            .map_err(config_err)?;
        Ok(Scenario { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = ConfigFile::parse(text)
            .and_then(|c| c.resolve())
            .map_err(config_err)?;
        Ok(Scenario { inner })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let inner = ConfigFile::load(path)
            .and_then(|c| c.resolve())
            .map_err(config_err)?;
        Ok(Scenario { inner })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.scenario.name.clone()
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    #[getter]
    fn classes(&self) -> Vec<String> {
        self.inner.scenario.mix.classes.clone()
    }

    #[getter]
    fn pmf(&self) -> Vec<f64> {
        self.inner.scenario.mix.pmf.clone()
    }

    /// Analytic session metrics of the mix.
    fn oracle<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let sc = self.inner.scenario.compile().map_err(runtime_err)?;
        to_py(py, &sc.analytic().map_err(runtime_err)?)
    }

    /// Per-server demand, bottleneck and saturation rate.
    fn service_demand<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let sc = self.inner.scenario.compile().map_err(runtime_err)?;
        to_py(py, &sc.service_demand().map_err(runtime_err)?)
    }

    /// One replication; returns the run summary as a dict.
    #[pyo3(signature = (lam = None, seed = 1, window = None))]
    fn run<'py>(
        &self,
        py: Python<'py>,
        lam: Option<f64>,
        seed: u64,
        window: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let mut r = self.inner.clone();
        if let Some(l) = lam {
            r.lambda = l;
        }
        if let Some(w) = window {
            r.options.window = w;
        }
        r.options.record_requests = false;
        r.options.queue_sample_interval = None;
        let (summary, _) = py.detach(|| r.run(seed)).map_err(runtime_err)?;
        to_py(py, &summary)
    }

    /// Replicated sweep; returns the curve with its critical rate.
    #[pyo3(signature = (lambda_from = 0.0, lambda_to = 30.0, step = 0.5, replications = 5, seed = 1, window = None, threshold = 4.0))]
    #[allow(clippy::too_many_arguments)]
    fn sweep<'py>(
        &self,
        py: Python<'py>,
        lambda_from: f64,
        lambda_to: f64,
        step: f64,
        replications: u32,
        seed: u64,
        window: Option<f64>,
        threshold: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let mut r = self.inner.clone();
        r.sweep = planner::SweepSpec {
            lambda_from,
            lambda_to,
            lambda_step: step,
            replications,
            seed,
            threshold,
        };
        if let Some(w) = window {
            r.options.window = w;
        }
        let curve = py.detach(|| r.sweep()).map_err(runtime_err)?;
        #[derive(Serialize)]
        struct Out<'a> {
            critical: Critical,
            curve: &'a planner::SweepCurve,
        }
        to_py(
            py,
            &Out {
                critical: curve.critical(),
                curve: &curve,
            },
        )
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario({:?}, lam={})",
            self.inner.scenario.name, self.inner.lambda
        )
    }
}

/// Interpolated rate at which `(lambda, rt)` points first exceed `threshold`;
/// None when not crossed or already above at the first point.
#[pyfunction]
#[pyo3(signature = (points, threshold = 4.0))]
fn critical_lambda(points: Vec<(f64, f64)>, threshold: f64) -> Option<f64> {
    planner::critical_lambda(&points, threshold).lambda()
}

/// Published reference values for the built-in scenarios.
#[pyfunction]
fn reference(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &REFERENCE)
}

/// Validates a TOML config; returns the list of problems (empty when clean).
#[pyfunction]
fn validate(text: &str) -> Vec<String> {
    match ConfigFile::parse(text).and_then(|c| c.resolve()) {
        Ok(_) => Vec::new(),
        Err(ecomsim::config::ConfigError::Invalid(v)) => v,
        Err(e) => vec![e.to_string()],
    }
}

#[pymodule]
fn pyecomsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_function(wrap_pyfunction!(critical_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(reference, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
