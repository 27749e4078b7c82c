use std::path::{Path, PathBuf};
use std::time::Instant;

use kickrotor::analysis::{classify, summary_csv, ClassifyParams, CrossoverParams, RegimeReport, SummaryRow};
use kickrotor::bchcoeff::{csv_row, CoefficientState, Sampling, CSV_HEADER};
use kickrotor::effham::{fibonacci_propagator, FibonacciOptions, SpectralSummary};
use kickrotor::evolve::{auto_window, run_trajectory, EnergyTrace, EvolutionConfig};
use kickrotor::hilbert::{BasisWindow, RotorState};
use kickrotor::io::{
    read_trace_csv, with_manifest_line, write_atomic, write_json_atomic, write_trace_csv, Manifest,
};
use kickrotor::kickseq::{fibonacci_index, KickSequenceSpec, SequenceKind};
use kickrotor::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{InitialState, RunConfig};
use crate::presets::{self, Task};

fn sequence_spec(cfg: &RunConfig) -> Result<KickSequenceSpec> {
    match cfg.sequence {
        SequenceKind::Constant => KickSequenceSpec::constant(cfg.k1),
        kind => KickSequenceSpec::new(kind, cfg.k1, cfg.k2, cfg.seed),
    }
}

fn manifest(command: &str, cfg: &RunConfig, overrides: &[String]) -> Result<Manifest> {
    let seed = (cfg.sequence == SequenceKind::Random).then_some(cfg.seed);
    Manifest::new(command, serde_json::to_value(cfg)?, overrides.to_vec(), seed)
}

fn finish_manifest(dir: &Path, mut m: Manifest, started: Instant) -> Result<()> {
    m.wall_time_s = Some(started.elapsed().as_secs_f64());
    write_json_atomic(&dir.join("manifest.json"), &m)
}

fn classify_params(cfg: &RunConfig) -> ClassifyParams {
    ClassifyParams {
        crossover: CrossoverParams {
            factor: cfg.crossover_factor,
            min_slope: cfg.crossover_min_slope,
            window: cfg.crossover_window,
            ..CrossoverParams::default()
        },
        ..ClassifyParams::default()
    }
}

#[derive(Serialize)]
struct EvolveReport<'a> {
    manifest: &'a str,
    label: &'a str,
    window: BasisWindow,
    sequence_checksum: &'a str,
    max_norm_drift: f64,
    max_edge_probability: f64,
    samples: usize,
    failure: Option<&'a str>,
    regime: Option<RegimeReport>,
    regime_error: Option<String>,
}

/// Runs one trajectory into `dir`. On a truncation abort the partial trace and
/// the report are still written before the error is returned.
pub fn evolve(cfg: &RunConfig, overrides: &[String], dir: &Path) -> Result<Option<RegimeReport>> {
    let started = Instant::now();
    let spec = sequence_spec(cfg)?;
    let center = cfg.window_center();
    let window = if cfg.basis == 0 {
        auto_window(&spec, cfg.tau, cfg.steps, center)?
    } else {
        BasisWindow::new(center, cfg.basis)?
    };
    let initial = match cfg.initial {
        InitialState::Gaussian => RotorState::gaussian(window, cfg.l0)?,
        InitialState::Eigenstate => RotorState::momentum_eigenstate(window, cfg.l0)?,
    };
    let evo = EvolutionConfig::new(cfg.tau, spec, window, cfg.steps, cfg.log_policy)?;
    let m = manifest("evolve", cfg, overrides)?;

    let (trace, error): (EnergyTrace, Option<Error>) = match run_trajectory(&evo, &initial) {
        Ok(t) => (t, None),
        Err(abort) => (abort.partial, Some(abort.error)),
    };
    write_trace_csv(&dir.join("trace.csv"), &trace, &m.hash)?;

    let (n_min, n_max) = cfg.fit_window();
    let (regime, regime_error) = if error.is_some() {
        (None, None)
    } else {
        match classify(
            &trace.samples,
            n_min,
            n_max,
            cfg.plateau_ref,
            &classify_params(cfg),
        ) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    let report = EvolveReport {
        manifest: &m.hash,
        label: &cfg.label,
        window,
        sequence_checksum: &trace.sequence_checksum,
        max_norm_drift: trace.max_norm_drift,
        max_edge_probability: trace.max_edge_probability,
        samples: trace.samples.len(),
        failure: trace.failure.as_deref(),
        regime,
        regime_error,
    };
    write_json_atomic(&dir.join("report.json"), &report)?;
    finish_manifest(dir, m, started)?;
    match error {
        Some(e) => Err(e),
        None => Ok(regime),
    }
}

/// Coefficient table along the configured sequence.
pub fn coeffs(cfg: &RunConfig, overrides: &[String], dir: &Path) -> Result<u64> {
    let started = Instant::now();
    if cfg.coeff_n_max == 0 {
        return Err(Error::Usage("key 'coeff_n_max': must be at least 1".into()));
    }
    let spec = sequence_spec(cfg)?;
    let m = manifest("coeffs", cfg, overrides)?;
    let mut body = String::from(CSV_HEADER);
    body.push('\n');
    let mut state = CoefficientState::zero();
    let mut rows = 0;
    for kick in spec.stream().take(cfg.coeff_n_max as usize) {
        state = state.recursion_step(kick?)?;
        if cfg.coeff_sampling == Sampling::Stroboscopic || fibonacci_index(state.n).is_some() {
            body.push_str(&csv_row(&state)?);
            body.push('\n');
            rows += 1;
        }
    }
    write_atomic(
        &dir.join("coeffs.csv"),
        with_manifest_line(&body, &m.hash).as_bytes(),
    )?;
    finish_manifest(dir, m, started)?;
    Ok(rows)
}

#[derive(Serialize)]
struct SpectralReport<'a> {
    manifest: &'a str,
    label: &'a str,
    #[serde(flatten)]
    summary: SpectralSummary,
}

/// Effective Fibonacci Hamiltonian: spectrum, localization and plateau.
pub fn effective(cfg: &RunConfig, overrides: &[String], dir: &Path) -> Result<f64> {
    let started = Instant::now();
    if cfg.sequence != SequenceKind::Fibonacci {
        return Err(Error::Usage(format!(
            "key 'sequence': the effective Hamiltonian needs 'fibonacci', got '{}'",
            cfg.sequence.name()
        )));
    }
    let mut cfg = cfg.clone();
    if cfg.basis == 0 {
        cfg.basis = 1024;
    }
    let window = BasisWindow::new(cfg.window_center(), cfg.basis)?;
    let options = FibonacciOptions {
        eta_branch: cfg.eta_branch,
        delta_source: cfg.delta_source,
        ..FibonacciOptions::default()
    };
    let m = manifest("effective", &cfg, overrides)?;
    let prop = fibonacci_propagator(cfg.k1, cfg.k2, cfg.tau, window, options)?;
    let summary = SpectralSummary::new(cfg.k1, cfg.k2, cfg.tau, cfg.l0, &prop)?;
    let plateau = summary.plateau_estimate;
    write_json_atomic(
        &dir.join("spectral.json"),
        &SpectralReport {
            manifest: &m.hash,
            label: &cfg.label,
            summary,
        },
    )?;
    finish_manifest(dir, m, started)?;
    Ok(plateau)
}

#[derive(Serialize)]
struct AnalysisEntry {
    trace: String,
    manifest: String,
    label: String,
    report: Option<RegimeReport>,
    error: Option<String>,
}

/// Trace files named on the command line; directories are searched for `trace.csv`.
fn collect_traces(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.path());
        for e in entries {
            let p = e.path();
            if p.is_dir() {
                walk(&p, out)?;
            } else if p.file_name().is_some_and(|n| n == "trace.csv") {
                out.push(p);
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            walk(p, &mut out)?;
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::Usage("no trace files found".into()));
    }
    Ok(out)
}

/// The run config recorded next to a trace, when its hash matches.
fn sibling_config(trace: &Path, hash: &str) -> Option<RunConfig> {
    let text = std::fs::read_to_string(trace.with_file_name("manifest.json")).ok()?;
    let m: Manifest = serde_json::from_str(&text).ok()?;
    if m.hash != hash || m.verify().is_err() {
        return None;
    }
    serde_json::from_value(m.config).ok()
}

/// Regime reports for existing traces. A trace without a manifest line is an
/// integrity error and stops the command.
pub fn analyze(
    base: &RunConfig,
    pairs: &[(String, String)],
    overrides: &[String],
    inputs: &[PathBuf],
    dir: &Path,
) -> Result<Vec<SummaryRow>> {
    let started = Instant::now();
    let traces = collect_traces(inputs)?;
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    let mut hashes = Vec::new();
    for path in &traces {
        let file = read_trace_csv(path).map_err(|e| match e {
            Error::Integrity(msg) => Error::Integrity(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let mut cfg = sibling_config(path, &file.manifest_hash).unwrap_or_else(|| base.clone());
        cfg.apply(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        if cfg.fit_n_max == 0 {
            cfg.steps = file.samples.last().map_or(cfg.steps, |s| s.n);
        }
        let (n_min, n_max) = cfg.fit_window();
        let result = classify(
            &file.samples,
            n_min,
            n_max,
            cfg.plateau_ref,
            &classify_params(&cfg),
        );
        if let Ok(r) = &result {
            rows.push(SummaryRow {
                label: cfg.label.clone(),
                sequence: cfg.sequence.name().into(),
                tau: cfg.tau,
                k1: cfg.k1,
                k2: cfg.k2,
                report: *r,
            });
        }
        hashes.push(file.manifest_hash.clone());
        entries.push(AnalysisEntry {
            trace: path.display().to_string(),
            manifest: file.manifest_hash,
            label: cfg.label,
            report: result.as_ref().ok().copied(),
            error: result.err().map(|e| e.to_string()),
        });
    }
    let m = Manifest::new(
        "analyze",
        serde_json::json!({ "config": base, "inputs": hashes }),
        overrides.to_vec(),
        None,
    )?;
    write_json_atomic(
        &dir.join("analysis.json"),
        &serde_json::json!({ "manifest": m.hash, "traces": entries }),
    )?;
    write_atomic(
        &dir.join("summary.csv"),
        with_manifest_line(&summary_csv(&rows), &m.hash).as_bytes(),
    )?;
    finish_manifest(dir, m, started)?;
    Ok(rows)
}

/// Runs every point of a preset concurrently into `<root>/<preset>/<label>/`.
/// Points that fail are reported and the remaining ones still run.
pub fn preset(name: &str, pairs: &[(String, String)], overrides: &[String], root: &Path) -> Result<()> {
    let mut pts = presets::points(name)?;
    for p in &mut pts {
        p.config
            .apply(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    }
    let base = root.join(name);
    let outcomes: Vec<(String, Result<Option<RegimeReport>>)> = pts
        .par_iter()
        .map(|p| {
            let dir = base.join(&p.config.label);
            let r = match p.task {
                Task::Evolve => evolve(&p.config, overrides, &dir),
                Task::Coeffs => coeffs(&p.config, overrides, &dir).map(|_| None),
                Task::Effective => effective(&p.config, overrides, &dir).map(|_| None),
            };
            (p.config.label.clone(), r)
        })
        .collect();

    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for (p, (label, r)) in pts.iter().zip(outcomes) {
        match r {
            Ok(report) => {
                println!("{name}/{label}: ok");
                if let Some(report) = report {
                    rows.push(SummaryRow {
                        label: label.clone(),
                        sequence: p.config.sequence.name().into(),
                        tau: p.config.tau,
                        k1: p.config.k1,
                        k2: p.config.k2,
                        report,
                    });
                }
            }
            Err(e) => {
                eprintln!("{name}/{label}: {e}");
                failed.push(label);
            }
        }
    }
    if !rows.is_empty() {
        let configs: Vec<&RunConfig> = pts.iter().map(|p| &p.config).collect();
        let m = Manifest::new(
            &format!("preset {name}"),
            serde_json::to_value(configs)?,
            overrides.to_vec(),
            None,
        )?;
        write_atomic(
            &base.join("summary.csv"),
            with_manifest_line(&summary_csv(&rows), &m.hash).as_bytes(),
        )?;
        write_json_atomic(&base.join("manifest.json"), &m)?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "{} of {} points failed: {}",
            failed.len(),
            pts.len(),
            failed.join(", ")
        )))
    }
}
