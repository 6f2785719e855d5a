//! Python bindings for the storage policy toolkit.
//!
//! Every entry point takes an optional TOML config string; missing keys fall
//! back to the defaults. Validation problems raise `ValueError`, numerical
//! failures `RuntimeError` and file problems `OSError`.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cfa::exp::ExperimentConfig;
use cfa::grad::trajectory_gradient;
use cfa::model::simulate as run_policy;
use cfa::policy::{Theta, Variant};
use cfa::search::{self, SearchSettings};

fn to_py(e: cfa::Error) -> PyErr {
    match e.exit_code() {
        3 => PyRuntimeError::new_err(e.to_string()),
        2 => PyValueError::new_err(e.to_string()),
        _ => PyOSError::new_err(e.to_string()),
    }
}

fn config(text: Option<&str>) -> PyResult<ExperimentConfig> {
    match text {
        Some(t) => ExperimentConfig::from_toml_str(t).map_err(to_py),
        None => Ok(ExperimentConfig::default()),
    }
}

fn theta(variant: &str, values: Vec<f64>, h: usize) -> PyResult<Theta> {
    let variant: Variant = variant.parse().map_err(to_py)?;
    let theta = Theta::from_flat(variant, &values).map_err(to_py)?;
    theta.validate(h).map_err(to_py)?;
    Ok(theta)
}

/// Default configuration as TOML text.
#[pyfunction]
fn default_config() -> String {
    ExperimentConfig::default().to_toml()
}

/// Identity parameters of `variant`, i.e. the values that reproduce the benchmark.
#[pyfunction]
#[pyo3(signature = (variant, config_toml=None))]
fn identity(variant: &str, config_toml: Option<&str>) -> PyResult<Vec<f64>> {
    let cfg = config(config_toml)?;
    let v: Variant = variant.parse().map_err(to_py)?;
    Ok(v.identity(cfg.h).flat())
}

/// Realized series and rolling forecasts of one sample path.
#[pyfunction]
#[pyo3(signature = (sigma_f, seed, config_toml=None))]
fn sample_path<'py>(py: Python<'py>, sigma_f: f64, seed: u64, config_toml: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(config_toml)?;
    let scenario = cfg.scenario(sigma_f).map_err(to_py)?;
    scenario.validate().map_err(to_py)?;
    let path = scenario.sample(seed);
    let out = PyDict::new(py);
    out.set_item("E", path.e.clone())?;
    out.set_item("P", path.p.clone())?;
    out.set_item("D", path.d.clone())?;
    out.set_item("G", path.g.clone())?;
    let rows = |m: &cfa::energy::ForecastMatrix| (0..m.origins()).map(|o| m.origin(o).to_vec()).collect::<Vec<_>>();
    out.set_item("F_E", rows(&path.f_e))?;
    out.set_item("F_P", rows(&path.f_p))?;
    out.set_item("seed", seed)?;
    Ok(out)
}

/// Runs a policy along one sample path.
#[pyfunction]
#[pyo3(signature = (variant, theta_values, sigma_f, seed, config_toml=None))]
fn simulate<'py>(
    py: Python<'py>,
    variant: &str,
    theta_values: Vec<f64>,
    sigma_f: f64,
    seed: u64,
    config_toml: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(config_toml)?;
    let th = theta(variant, theta_values, cfg.h)?;
    let path = cfg.scenario(sigma_f).map_err(to_py)?.sample(seed);
    let traj = run_policy(&th, &path, cfg.horizon(), &cfg.storage_params()).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("reward", traj.cumulative_reward)?;
    out.set_item("storage", traj.storage_series.clone())?;
    out.set_item("cumulative_profit", traj.cumulative_profit())?;
    Ok(out)
}

/// Sample reward and its exact gradient with respect to the parameters.
#[pyfunction]
#[pyo3(signature = (variant, theta_values, sigma_f, seed, config_toml=None))]
fn gradient(
    variant: &str,
    theta_values: Vec<f64>,
    sigma_f: f64,
    seed: u64,
    config_toml: Option<&str>,
) -> PyResult<(f64, Vec<f64>)> {
    let cfg = config(config_toml)?;
    let th = theta(variant, theta_values, cfg.h)?;
    let path = cfg.scenario(sigma_f).map_err(to_py)?.sample(seed);
    let (g, traj) = trajectory_gradient(&th, &path, cfg.horizon(), &cfg.storage_params()).map_err(to_py)?;
    Ok((traj.cumulative_reward, g.g))
}

/// Paired comparison with the benchmark on the first `n_paths` evaluation paths.
#[pyfunction]
#[pyo3(signature = (variant, theta_values, sigma_f, n_paths, config_toml=None))]
fn evaluate<'py>(
    py: Python<'py>,
    variant: &str,
    theta_values: Vec<f64>,
    sigma_f: f64,
    n_paths: usize,
    config_toml: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(config_toml)?;
    let th = theta(variant, theta_values, cfg.h)?;
    let scenario = cfg.scenario(sigma_f).map_err(to_py)?;
    let e = search::evaluate(&th, &scenario, &cfg.storage_params(), &cfg.eval_seeds(n_paths)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("mean", e.mean)?;
    out.set_item("benchmark_mean", e.benchmark_mean)?;
    out.set_item("delta", e.delta)?;
    out.set_item("delta_std_error", e.delta_std_error)?;
    Ok(out)
}

/// Tunes `variant` from its identity and returns the final parameters.
#[pyfunction]
#[pyo3(signature = (variant, sigma_f, iterations=None, batch_size=None, config_toml=None))]
fn tune(
    variant: &str,
    sigma_f: f64,
    iterations: Option<usize>,
    batch_size: Option<usize>,
    config_toml: Option<&str>,
) -> PyResult<Vec<f64>> {
    let cfg = config(config_toml)?;
    let v: Variant = variant.parse().map_err(to_py)?;
    let scenario = cfg.scenario(sigma_f).map_err(to_py)?;
    let defaults = cfg.settings(sigma_f);
    let settings = SearchSettings {
        iterations: iterations.unwrap_or(defaults.iterations),
        batch_size: batch_size.unwrap_or(defaults.batch_size),
        ..defaults
    };
    let (th, _) = search::tune(&v.identity(cfg.h), &scenario, &cfg.storage_params(), &settings).map_err(to_py)?;
    Ok(th.flat())
}

#[pymodule]
fn cfa_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(identity, m)?)?;
    m.add_function(wrap_pyfunction!(sample_path, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(tune, m)?)?;
    Ok(())
}
