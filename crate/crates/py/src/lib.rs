//! Python bindings: system configuration, the reflection model and both
//! beamforming designs, plus the experiment runner.

use std::path::Path;

use irs_core::harness::config::parse_config;
use irs_core::harness::experiment::{preset, run_experiment as run_exp, write_output};
use irs_core::harness::validate::run_validation;
use irs_core::power_min::{run_algorithm1, Algorithm1Options};
use irs_core::reflection::{partition_capacitance, reflection_coefficient as refl, CircuitParams};
use irs_core::scenario::{sub_stream, trial_channels, SystemConfig};
use irs_core::sum_rate::{random_init, run_algorithm2, Algorithm2Options};
use irs_core::{Error, C64};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_)
        | Error::Domain(_)
        | Error::Dimension(_)
        | Error::UnknownScheme(_)
        | Error::UnknownExperiment(_)
        | Error::Parse { .. }
        | Error::PartitionOverlap { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Scenario parameters in SI units.
#[pyclass(name = "SystemConfig", skip_from_py_object)]
struct PySystemConfig {
    inner: SystemConfig,
}

#[pymethods]
impl PySystemConfig {
    /// Desk-scale defaults, optionally overridden by keyword arguments
    /// (any `[system]` key of a config file, e.g. `m=32, gamma_db=10`).
    #[new]
    #[pyo3(signature = (paper_scale = false, **overrides))]
    fn new(paper_scale: bool, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let base = if paper_scale { SystemConfig::paper_scale() } else { SystemConfig::default() };
        let Some(kw) = overrides else {
            return Ok(Self { inner: base });
        };
        let mut toml = String::from("[system]\n");
        for (key, value) in kw.iter() {
            let key: String = key.extract()?;
            let value = if let Ok(b) = value.extract::<bool>() {
                b.to_string()
            } else if let Ok(i) = value.extract::<i64>() {
                i.to_string()
            } else if let Ok(f) = value.extract::<f64>() {
                format!("{f:e}")
            } else if let Ok(v) = value.extract::<Vec<f64>>() {
                format!("[{}]", v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(", "))
            } else {
                return Err(PyValueError::new_err(format!("unsupported value for `{key}`")));
            };
            toml.push_str(&format!("{key} = {value}\n"));
        }
        let file = parse_config(&toml, Path::new("kwargs.toml")).map_err(to_py)?;
        Ok(Self { inner: file.system.apply(&base).map_err(to_py)? })
    }

    /// Parses the `[system]` section of a TOML (or JSON, `fmt="json"`) document.
    #[staticmethod]
    #[pyo3(signature = (text, fmt = "toml", paper_scale = false))]
    fn parse(text: &str, fmt: &str, paper_scale: bool) -> PyResult<Self> {
        let name = if fmt.eq_ignore_ascii_case("json") { "c.json" } else { "c.toml" };
        let file = parse_config(text, Path::new(name)).map_err(to_py)?;
        let base = if paper_scale { SystemConfig::paper_scale() } else { SystemConfig::default() };
        Ok(Self { inner: file.system.apply(&base).map_err(to_py)? })
    }

    #[getter]
    fn s(&self) -> usize {
        self.inner.s
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn nt(&self) -> usize {
        self.inner.nt
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.inner.sigma2
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn power(&self) -> f64 {
        self.inner.power
    }

    #[getter]
    fn l(&self) -> f64 {
        self.inner.l
    }

    #[getter]
    fn d(&self) -> f64 {
        self.inner.d
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn frequencies(&self) -> Vec<f64> {
        self.inner.frequencies.as_slice().to_vec()
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "SystemConfig(s={}, k={}, nt={}, m={}, gamma={:.4}, power={:.4e}, sigma2={:.3e}, seed={})",
            c.s, c.k, c.nt, c.m, c.gamma, c.power, c.sigma2, c.seed
        )
    }
}

/// Reflection coefficient of one element at capacitance `c` (F) and frequency `f` (Hz).
#[pyfunction]
#[pyo3(signature = (c, f, l1 = 2.5e-9, l2 = 0.7e-9, r = 1.0, z0 = 377.0))]
fn reflection_coefficient(c: f64, f: f64, l1: f64, l2: f64, r: f64, z0: f64) -> PyResult<C64> {
    let p = CircuitParams::new(l1, l2, r, z0).map_err(to_py)?;
    refl(&p, c, f).map_err(to_py)
}

/// Capacitance window `(frequency, c_lo, c_hi)` of every band.
#[pyfunction]
fn partition(cfg: PyRef<'_, PySystemConfig>) -> PyResult<Vec<(f64, f64, f64)>> {
    let c = &cfg.inner;
    let part = partition_capacitance(&c.circuit, &c.band_plan(), &c.sweep).map_err(to_py)?;
    Ok(part.frequencies.iter().zip(&part.intervals).map(|(&f, iv)| (f, iv.lo, iv.hi)).collect())
}

/// Power minimisation on the channels of Monte-Carlo trial `trial`.
#[pyfunction]
#[pyo3(signature = (cfg, trial = 0))]
fn power_min<'py>(py: Python<'py>, cfg: PyRef<'_, PySystemConfig>, trial: u64) -> PyResult<Bound<'py, PyDict>> {
    let c = cfg.inner.clone();
    let out = py
        .detach(move || {
            let (_, ch) = trial_channels(&c, trial)?;
            run_algorithm1(&ch, &c, &Algorithm1Options::default())
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("total_power", out.report.total_power)?;
    d.set_item("per_bs_power", out.report.per_bs_power.clone())?;
    d.set_item("selection", out.state.selection().to_vec())?;
    d.set_item("iterations", out.report.iterations.clone())?;
    d.set_item("converged", out.report.converged.clone())?;
    Ok(d)
}

/// Sum-rate maximisation on trial `trial`, from a random start.
#[pyfunction]
#[pyo3(signature = (cfg, trial = 0))]
fn sum_rate<'py>(py: Python<'py>, cfg: PyRef<'_, PySystemConfig>, trial: u64) -> PyResult<Bound<'py, PyDict>> {
    let c = cfg.inner.clone();
    let out = py
        .detach(move || {
            let (_, ch) = trial_channels(&c, trial)?;
            let init = random_init(c.s, c.m, &mut sub_stream(c.seed, 2 * trial + 1));
            run_algorithm2(&ch, &c, &init, &Algorithm2Options::default())
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("sum_rate", out.sum_rate())?;
    d.set_item("trace", out.trace.iter().map(|r| r.sum_rate).collect::<Vec<_>>())?;
    d.set_item("selection", out.state.selection().to_vec())?;
    d.set_item("converged", out.converged)?;
    Ok(d)
}

/// Runs a built-in experiment and returns its CSV text.
#[pyfunction]
#[pyo3(signature = (cfg, name, trials = None))]
fn run_experiment(py: Python<'_>, cfg: PyRef<'_, PySystemConfig>, name: &str, trials: Option<usize>) -> PyResult<String> {
    let c = cfg.inner.clone();
    let mut spec = preset(name).map_err(to_py)?;
    if let Some(t) = trials {
        spec.trials = t;
    }
    let bytes = py
        .detach(move || {
            let out = run_exp(&spec, &c)?;
            let mut buf = Vec::new();
            write_output(&out, c.seed, &mut buf)?;
            Ok::<_, Error>(buf)
        })
        .map_err(to_py)?;
    String::from_utf8(bytes).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Invariant checks as `(name, passed, detail)`.
#[pyfunction]
fn validate(py: Python<'_>, cfg: PyRef<'_, PySystemConfig>) -> Vec<(String, bool, String)> {
    let c = cfg.inner.clone();
    py.detach(move || run_validation(&c))
        .into_iter()
        .map(|k| (k.name.to_string(), k.pass, k.detail))
        .collect()
}

#[pymodule]
fn irs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemConfig>()?;
    m.add_function(wrap_pyfunction!(reflection_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(partition, m)?)?;
    m.add_function(wrap_pyfunction!(power_min, m)?)?;
    m.add_function(wrap_pyfunction!(sum_rate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
