//! Python bindings. Structured results cross the boundary as plain dicts.

use std::path::PathBuf;

use aerocapture::guidance::Algorithm;
use aerocapture::harness::{self, RunConfig};
use aerocapture::orbit::{self, TargetOrbit};
use aerocapture::profiles::{oracle_optimize, OracleConfig};
use aerocapture::vehicle::{fit_linear, AeroModel};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

fn to_py(e: aerocapture::Error) -> PyErr {
    use aerocapture::Error as E;
    match e {
        E::InvalidConfig(_) | E::Json(_) | E::Csv(_) => PyValueError::new_err(e.to_string()),
        E::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_object<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import_bound("json")?.call_method1("loads", (text,))?.unbind())
}

/// Run configuration. Build one with `default()`, `desk()`, `load()` or
/// `from_json()`; every field is reachable through `to_json()`.
#[pyclass(name = "RunConfig", module = "aerocapture")]
#[derive(Clone)]
struct PyRunConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyRunConfig {
    /// Uranus aerocapture, baseline dispersions.
    #[staticmethod]
    fn default() -> Self {
        Self { inner: RunConfig::uranus_default() }
    }

    /// Non-rotating planet, linear aero, no dispersions.
    #[staticmethod]
    fn desk() -> PyResult<Self> {
        Ok(Self { inner: RunConfig::desk().map_err(to_py)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: RunConfig::load(&path).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: RunConfig = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    /// "abamguid" or "fnpag".
    #[getter]
    fn algorithm(&self) -> &'static str {
        self.inner.guidance.algorithm.as_str()
    }

    #[setter]
    fn set_algorithm(&mut self, name: &str) -> PyResult<()> {
        self.inner.guidance.algorithm = name.parse::<Algorithm>().map_err(to_py)?;
        Ok(())
    }

    /// Nominal entry flight-path angle, deg.
    #[getter]
    fn efpa(&self) -> f64 {
        self.inner.entry.efpa_deg
    }

    #[setter]
    fn set_efpa(&mut self, deg: f64) {
        self.inner.entry.efpa_deg = deg;
    }

    /// 1-sigma EFPA dispersion, deg.
    #[getter]
    fn efpa_sigma(&self) -> f64 {
        self.inner.dispersions.efpa_sigma
    }

    #[setter]
    fn set_efpa_sigma(&mut self, deg: f64) {
        self.inner.dispersions.efpa_sigma = deg;
    }

    /// "none", "baseline" or "conservative".
    fn set_dispersions(&mut self, preset: &str) -> PyResult<()> {
        self.inner.dispersions = match preset {
            "none" => harness::DispersionSpec::none(),
            "baseline" => harness::DispersionSpec::baseline(),
            "conservative" => harness::DispersionSpec::conservative(),
            other => return Err(PyValueError::new_err(format!("unknown dispersion preset {other:?}"))),
        };
        Ok(())
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn n_runs(&self) -> usize {
        self.inner.n_runs
    }

    #[setter]
    fn set_n_runs(&mut self, n: usize) {
        self.inner.n_runs = n;
    }

    #[getter]
    fn workers(&self) -> usize {
        self.inner.workers
    }

    #[setter]
    fn set_workers(&mut self, n: usize) {
        self.inner.workers = n;
    }

    fn __repr__(&self) -> String {
        format!(
            "RunConfig(algorithm={:?}, efpa={}, n_runs={}, seed={})",
            self.algorithm(),
            self.inner.entry.efpa_deg,
            self.inner.n_runs,
            self.inner.seed
        )
    }
}

/// One closed-loop pass. Returns the run record; with `telemetry=True` the
/// guidance telemetry rows are included under "telemetry_rows".
#[pyfunction]
#[pyo3(signature = (config, seed=None, telemetry=false))]
fn simulate(py: Python<'_>, config: &PyRunConfig, seed: Option<u64>, telemetry: bool) -> PyResult<PyObject> {
    let cfg = &config.inner;
    let flight = py.allow_threads(|| harness::fly(cfg, 0, seed.unwrap_or(cfg.seed))).map_err(to_py)?;
    let out = to_object(py, &flight.result)?;
    if telemetry {
        out.downcast_bound::<PyDict>(py)?.set_item("telemetry_rows", to_object(py, &flight.telemetry)?)?;
    }
    Ok(out)
}

/// Dispersed campaign. Returns `(report, results)`.
#[pyfunction]
#[pyo3(signature = (config, n_runs=None, seed=None, workers=None))]
fn monte_carlo(
    py: Python<'_>,
    config: &PyRunConfig,
    n_runs: Option<usize>,
    seed: Option<u64>,
    workers: Option<usize>,
) -> PyResult<(PyObject, PyObject)> {
    let cfg = &config.inner;
    let (n, s, w) = (n_runs.unwrap_or(cfg.n_runs), seed.unwrap_or(cfg.seed), workers.unwrap_or(cfg.workers));
    let campaign = py.allow_threads(|| harness::run_monte_carlo(cfg, n, s, w)).map_err(to_py)?;
    Ok((to_object(py, &campaign.report)?, to_object(py, &campaign.results)?))
}

/// Success rate against nominal EFPA over `[efpa_from, efpa_to]`.
#[pyfunction]
#[pyo3(signature = (config, efpa_from, efpa_to, points, runs_per_point, seed=None, workers=None))]
fn corridor_sweep(
    py: Python<'_>,
    config: &PyRunConfig,
    efpa_from: f64,
    efpa_to: f64,
    points: usize,
    runs_per_point: usize,
    seed: Option<u64>,
    workers: Option<usize>,
) -> PyResult<PyObject> {
    let cfg = &config.inner;
    let (s, w) = (seed.unwrap_or(cfg.seed), workers.unwrap_or(cfg.workers));
    let table = py
        .allow_threads(|| harness::corridor_sweep(cfg, (efpa_from, efpa_to), points, runs_per_point, s, w))
        .map_err(to_py)?;
    to_object(py, &table)
}

/// Minimum-ΔV bang-bang schedule for the configured entry on the
/// longitudinal model with the on-board aero.
#[pyfunction]
#[pyo3(signature = (config, efpa=None))]
fn oracle(py: Python<'_>, config: &PyRunConfig, efpa: Option<f64>) -> PyResult<PyObject> {
    let mut cfg = config.inner.clone();
    if let Some(e) = efpa {
        cfg.entry.efpa_deg = e;
    }
    let sol = py
        .allow_threads(|| {
            let veh = cfg.vehicle.with_aero(cfg.onboard_aero()?);
            oracle_optimize(&cfg.oracle_entry(), &cfg.planet, &cfg.atmosphere, &veh, &cfg.target, &OracleConfig::default())
        })
        .map_err(to_py)?;
    to_object(py, &sol)
}

/// Least-squares linear fit of a tabulated aero model (the built-in table
/// when `path` is omitted) over `[alpha_min, alpha_max]` deg.
#[pyfunction]
#[pyo3(signature = (path=None, alpha_min=-25.0, alpha_max=-10.0))]
fn fit_aero(py: Python<'_>, path: Option<PathBuf>, alpha_min: f64, alpha_max: f64) -> PyResult<PyObject> {
    let table = match path {
        Some(p) => AeroModel::load_csv(&p).map_err(to_py)?,
        None => AeroModel::default_tabulated(),
    };
    let fit = fit_linear(&table, (alpha_min, alpha_max)).map_err(to_py)?;
    let d = PyDict::new_bound(py);
    d.set_item("model", to_object(py, &fit.model)?)?;
    d.set_item("max_ld_error", fit.max_ld_error)?;
    d.set_item("warning", fit.warning)?;
    Ok(d.into_any().unbind())
}

/// Periapsis-raise ΔV (m/s) for an exit orbit with apoapsis radius `r_a`
/// and semi-major axis `a`, against the configured target.
#[pyfunction]
fn periapsis_raise_dv(config: &PyRunConfig, r_a: f64, a: f64) -> PyResult<f64> {
    let cfg = &config.inner;
    orbit::single_burn_dv(r_a, a, &cfg.target, cfg.planet.mu).map_err(to_py)
}

/// Target orbit for apoapsis and periapsis altitudes (m) about the configured planet.
#[pyfunction]
fn target_orbit(py: Python<'_>, config: &PyRunConfig, apo_alt: f64, peri_alt: f64) -> PyResult<PyObject> {
    to_object(py, &TargetOrbit::from_altitudes(&config.inner.planet, apo_alt, peri_alt))
}

/// Nominal atmospheric density at altitude `h` (m), kg/m^3.
#[pyfunction]
fn density(config: &PyRunConfig, h: f64) -> PyResult<f64> {
    config.inner.atmosphere.density(h).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "aerocapture")]
fn aerocapture_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRunConfig>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(corridor_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(fit_aero, m)?)?;
    m.add_function(wrap_pyfunction!(periapsis_raise_dv, m)?)?;
    m.add_function(wrap_pyfunction!(target_orbit, m)?)?;
    m.add_function(wrap_pyfunction!(density, m)?)?;
    Ok(())
}
