//! Python bindings: sequences, exact coefficients, trajectories, the effective
//! Fibonacci Hamiltonian and regime analysis.

use kickrotor::analysis;
use kickrotor::bchcoeff;
use kickrotor::effham::{self, FibonacciOptions, SpectralSummary};
use kickrotor::evolve::{auto_window, run_trajectory, EvolutionConfig, LogPolicy, TraceSample};
use kickrotor::hilbert::{BasisWindow, RotorState};
use kickrotor::kickseq::{self, Kick, KickSequenceSpec, SequenceKind};
use kickrotor::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Usage(_) | Error::WindowMismatch(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn spec_of(sequence: &str, k1: f64, k2: f64, seed: u64) -> PyResult<KickSequenceSpec> {
    match parse::<SequenceKind>(sequence)? {
        SequenceKind::Constant => KickSequenceSpec::constant(k1),
        kind => KickSequenceSpec::new(kind, k1, k2, seed),
    }
    .map_err(to_py)
}

/// Kick labels 1 (K1) and 2 (K2) for steps 1..=n.
#[pyfunction]
#[pyo3(signature = (n, sequence = "fibonacci", seed = 0))]
fn kick_labels(n: u64, sequence: &str, seed: u64) -> PyResult<Vec<u32>> {
    let spec = spec_of(sequence, 1.0, 2.0, seed)?;
    spec.stream()
        .take(n as usize)
        .map(|k| k.map(|k| if k == Kick::K1 { 1 } else { 2 }))
        .collect::<Result<_, _>>()
        .map_err(to_py)
}

/// Fibonacci instant F(m), with F(1) = 1, F(2) = 2.
#[pyfunction]
fn fibonacci_instant(m: u32) -> PyResult<u64> {
    kickseq::fibonacci_instant(m).map_err(to_py)
}

/// Exact coefficients after n kicks of the Fibonacci word: fractions as strings,
/// plus the normalized values.
#[pyfunction]
fn coefficients<'py>(py: Python<'py>, n: u64) -> PyResult<Bound<'py, PyDict>> {
    let c = py.detach(|| bchcoeff::coefficients_recursion(n)).map_err(to_py)?;
    let necs = c.necs().map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("n", c.n)?;
    for (name, v) in c.fields() {
        d.set_item(name, v.to_string())?;
    }
    let nec = PyDict::new(py);
    nec.set_item("alpha", necs.alpha)?;
    nec.set_item("beta", necs.beta)?;
    nec.set_item("delta", necs.delta)?;
    nec.set_item("eta1", necs.eta1)?;
    nec.set_item("eta2", necs.eta2)?;
    d.set_item("nec", nec)?;
    Ok(d)
}

#[pyfunction]
fn saturated_necs(py: Python<'_>) -> PyResult<Bound<'_, PyDict>> {
    let s = bchcoeff::saturated_necs();
    let d = PyDict::new(py);
    d.set_item("alpha", s.alpha)?;
    d.set_item("beta", s.beta)?;
    d.set_item("delta", s.delta)?;
    d.set_item("delta_recursion", s.delta_recursion)?;
    d.set_item("eta1_even", s.eta1_even)?;
    d.set_item("eta1_odd", s.eta1_odd)?;
    d.set_item("eta2_even", s.eta2_even)?;
    d.set_item("eta2_odd", s.eta2_odd)?;
    d.set_item("eta1_mean", s.eta1_mean)?;
    d.set_item("eta2_mean", s.eta2_mean)?;
    Ok(d)
}

/// `(m_deloc, F(m_deloc))`.
#[pyfunction]
fn delocalization_time(tau: f64) -> PyResult<(u32, u64)> {
    let d = bchcoeff::delocalization_time(tau).map_err(to_py)?;
    Ok((d.m_deloc, d.n_deloc))
}

/// Runs a trajectory and returns `(N, <l^2>)` at the logged steps.
/// `basis = 0` sizes the window automatically.
#[pyfunction]
#[pyo3(signature = (tau, steps, sequence = "fibonacci", k1 = 10.0, k2 = 12.0, seed = 0,
                    basis = 0, l0 = 0, initial = "eigenstate", log_policy = "log_spaced:24"))]
#[allow(clippy::too_many_arguments)]
fn evolve(
    py: Python<'_>,
    tau: f64,
    steps: u64,
    sequence: &str,
    k1: f64,
    k2: f64,
    seed: u64,
    basis: usize,
    l0: i64,
    initial: &str,
    log_policy: &str,
) -> PyResult<(Vec<u64>, Vec<f64>)> {
    let spec = spec_of(sequence, k1, k2, seed)?;
    let policy: LogPolicy = parse(log_policy)?;
    let window = if basis == 0 {
        auto_window(&spec, tau, steps, l0)
    } else {
        BasisWindow::new(l0, basis)
    }
    .map_err(to_py)?;
    let psi = match initial {
        "gaussian" => RotorState::gaussian(window, l0),
        "eigenstate" => RotorState::momentum_eigenstate(window, l0),
        other => return Err(PyValueError::new_err(format!("unknown initial state '{other}'"))),
    }
    .map_err(to_py)?;
    let cfg = EvolutionConfig::new(tau, spec, window, steps, policy).map_err(to_py)?;
    let trace = py
        .detach(|| run_trajectory(&cfg, &psi))
        .map_err(|a| to_py(a.error))?;
    Ok((trace.ns(), trace.energies()))
}

fn samples(ns: &[u64], energies: &[f64]) -> PyResult<Vec<TraceSample>> {
    if ns.len() != energies.len() {
        return Err(PyValueError::new_err("ns and energies differ in length"));
    }
    Ok(ns
        .iter()
        .zip(energies)
        .map(|(&n, &energy)| TraceSample { n, energy })
        .collect())
}

/// Log-log growth exponent `(slope, stderr)` over `n_min <= N <= n_max`.
#[pyfunction]
fn fit_growth(ns: Vec<u64>, energies: Vec<f64>, n_min: u64, n_max: u64) -> PyResult<(f64, f64)> {
    let f = analysis::fit_growth(&samples(&ns, &energies)?, n_min, n_max).map_err(to_py)?;
    Ok((f.slope, f.stderr))
}

/// Step where the trace leaves a plateau of height `plateau_ref`, or None.
#[pyfunction]
fn detect_crossover(ns: Vec<u64>, energies: Vec<f64>, plateau_ref: f64) -> PyResult<Option<u64>> {
    analysis::detect_crossover(
        &samples(&ns, &energies)?,
        plateau_ref,
        &analysis::CrossoverParams::default(),
    )
    .map_err(to_py)
}

/// Spectral report of the effective Fibonacci Hamiltonian.
#[pyfunction]
#[pyo3(signature = (tau, k1 = 10.0, k2 = 12.0, basis = 1024, l0 = 0, eta_branch = "mean", delta_source = "recursion"))]
#[allow(clippy::too_many_arguments)]
fn effective_spectrum<'py>(
    py: Python<'py>,
    tau: f64,
    k1: f64,
    k2: f64,
    basis: usize,
    l0: i64,
    eta_branch: &str,
    delta_source: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let options = FibonacciOptions {
        eta_branch: parse(eta_branch)?,
        delta_source: parse(delta_source)?,
        ..FibonacciOptions::default()
    };
    let window = BasisWindow::new(0, basis).map_err(to_py)?;
    let summary = py
        .detach(|| {
            let prop = effham::fibonacci_propagator(k1, k2, tau, window, options)?;
            SpectralSummary::new(k1, k2, tau, l0, &prop)
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("plateau_estimate", summary.plateau_estimate)?;
    d.set_item("median_ipr", summary.median_ipr)?;
    d.set_item("eigenphases", summary.eigenphases)?;
    d.set_item(
        "energies",
        summary.eigenvectors.iter().map(|m| m.energy).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "ipr",
        summary.eigenvectors.iter().map(|m| m.ipr).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "peak_l",
        summary.eigenvectors.iter().map(|m| m.peak_l).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "tail_slope",
        summary
            .eigenvectors
            .iter()
            .map(|m| m.tail_slope)
            .collect::<Vec<_>>(),
    )?;
    Ok(d)
}

#[pymodule]
fn kickrotor_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(kick_labels, m)?)?;
    m.add_function(wrap_pyfunction!(fibonacci_instant, m)?)?;
    m.add_function(wrap_pyfunction!(coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(saturated_necs, m)?)?;
    m.add_function(wrap_pyfunction!(delocalization_time, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(fit_growth, m)?)?;
    m.add_function(wrap_pyfunction!(detect_crossover, m)?)?;
    m.add_function(wrap_pyfunction!(effective_spectrum, m)?)?;
    Ok(())
}
