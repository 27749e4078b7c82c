use kickrotor::analysis::{classify, ClassifyParams, Verdict};
use kickrotor::evolve::{auto_window, run_trajectory, EvolutionConfig, LogPolicy};
use kickrotor::hilbert::{BasisWindow, RotorState};
use kickrotor::io::{parse_trace_csv, trace_csv, Manifest};
use kickrotor::kickseq::KickSequenceSpec;

#[test]
fn trace_survives_csv_and_classifies() {
    let spec = KickSequenceSpec::fibonacci(10.0, 12.0).unwrap();
    let window = auto_window(&spec, 1.0, 3000, 0).unwrap();
    let cfg = EvolutionConfig::new(1.0, spec, window, 3000, LogPolicy::default()).unwrap();
    let psi = RotorState::momentum_eigenstate(window, 0).unwrap();
    let trace = run_trajectory(&cfg, &psi).unwrap();
    let manifest = Manifest::new("evolve", serde_json::to_value(cfg).unwrap(), vec![], None).unwrap();
    let back = parse_trace_csv(&trace_csv(&trace.samples, &manifest.hash)).unwrap();
    assert_eq!(back.manifest_hash, manifest.hash);
    assert_eq!(back.samples, trace.samples);
    let r = classify(&back.samples, 30, 3000, None, &ClassifyParams::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Diffusive, "slope {}", r.slope);
}

#[test]
fn high_frequency_run_is_localized() {
    let spec = KickSequenceSpec::fibonacci(10.0, 12.0).unwrap();
    let window = BasisWindow::new(0, 1024).unwrap();
    let cfg = EvolutionConfig::new(0.01, spec, window, 20_000, LogPolicy::default()).unwrap();
    let psi = RotorState::momentum_eigenstate(window, 0).unwrap();
    let trace = run_trajectory(&cfg, &psi).unwrap();
    let r = classify(&trace.samples, 1000, 20_000, None, &ClassifyParams::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Localized, "slope {}", r.slope);
    assert!(trace.max_norm_drift < 1e-10);
}
