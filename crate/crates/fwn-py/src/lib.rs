//! Python bindings. Every function takes a config path or `preset:<name>`.

use fwn::analyzer::scenario_report;
use fwn::config::{RunConfig, PRESETS};
use fwn::oneparticle::{
    gauge_matrix_element, gauge_matrix_element_quadrature, Block, ModeIndex, Momentum, OneParticleModel, Sign,
};
use fwn::suites::{run_suite, Suite};
use fwn::{FwnError, C64};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: FwnError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn load(config: &str) -> PyResult<RunConfig> {
    RunConfig::load(config).map_err(err)
}

fn sign(s: &str) -> PyResult<Sign> {
    Sign::parse(s).ok_or_else(|| PyValueError::new_err(format!("internal label must be '+' or '-', got {s:?}")))
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    PRESETS.to_vec()
}

/// Lowest positive modes as `(momentum, s, sqrt_e, eigenvalue)`.
type SpectrumRow = (Vec<i32>, String, f64, f64);

#[pyfunction]
fn spectrum(config: &str, count: usize) -> PyResult<Vec<SpectrumRow>> {
    let cfg = load(config)?;
    let m = OneParticleModel::build(&cfg.scenario).map_err(err)?;
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by(|&a, &b| m.eigenvalue(a).total_cmp(&m.eigenvalue(b)));
    Ok(order
        .into_iter()
        .take(count)
        .map(|k| {
            let md = m.mode(k);
            (md.momentum.components(m.dim()), md.internal.to_string(), m.dirac_energy(k), m.eigenvalue(k))
        })
        .collect())
}

/// `(closed_form, quadrature)` for one gauge matrix element.
#[pyfunction]
#[pyo3(signature = (config, alpha_out, alpha_in, s, t, block = "plus_minus_gamma"))]
fn matrix_element(
    config: &str,
    alpha_out: Vec<i32>,
    alpha_in: Vec<i32>,
    s: &str,
    t: &str,
    block: &str,
) -> PyResult<(C64, C64)> {
    let cfg = load(config)?;
    let dim = cfg.scenario.dim();
    if alpha_out.len() != dim || alpha_in.len() != dim {
        return Err(PyValueError::new_err(format!("momenta need {dim} components")));
    }
    let block = match block {
        "plus_plus" => Block::PlusPlus,
        "plus_minus_gamma" => Block::PlusMinusGamma,
        other => return Err(PyValueError::new_err(format!("unknown block {other:?}"))),
    };
    let m = OneParticleModel::build(&cfg.scenario).map_err(err)?;
    let g = cfg.gauge_function().map_err(err)?;
    let out = ModeIndex::positive(Momentum::from_slice(&alpha_out).map_err(err)?, sign(s)?);
    let inp = ModeIndex::positive(Momentum::from_slice(&alpha_in).map_err(err)?, sign(t)?);
    let cf = gauge_matrix_element(&m, &g, &out, &inp, block).map_err(err)?;
    let qu = gauge_matrix_element_quadrature(&m, &g, &out, &inp, block).map_err(err)?;
    Ok((cf, qu))
}

/// Analysis report as a JSON string.
#[pyfunction]
fn analyze(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg = load(config)?;
    let rep = py
        .detach(|| {
            let a = &cfg.analysis;
            scenario_report(&cfg.scenario, &cfg.gauge_function()?, &a.p_values, &a.ladder, a.rel_tol)
        })
        .map_err(err)?;
    serde_json::to_string(&rep).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Suite report as a JSON string.
#[pyfunction]
#[pyo3(signature = (config, suite, seed = None, tol = None))]
fn verify(py: Python<'_>, config: &str, suite: &str, seed: Option<u64>, tol: Option<f64>) -> PyResult<String> {
    let cfg = load(config)?;
    let suite = Suite::parse(suite).ok_or_else(|| PyValueError::new_err(format!("unknown suite {suite:?}")))?;
    let seed = seed.unwrap_or(cfg.verify.seed);
    let tol = tol.or(cfg.verify.tol);
    let rep = py.detach(|| run_suite(suite, &cfg, seed, tol)).map_err(err)?;
    serde_json::to_string(&rep).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn fwn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(matrix_element, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
