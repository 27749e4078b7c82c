//! Named parameter sweeps matching the published figures.

use kickrotor::bchcoeff::Sampling;
use kickrotor::evolve::LogPolicy;
use kickrotor::kickseq::{fibonacci_instant, SequenceKind};
use kickrotor::{Error, Result};

use crate::config::{InitialState, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Evolve,
    Coeffs,
    Effective,
}

pub const NAMES: &[&str] = &[
    "fig1a", "fig1b", "fig2a", "fig2b", "fig3", "figA3", "figB4", "figC5",
];

#[derive(Debug, Clone)]
pub struct Point {
    pub task: Task,
    pub config: RunConfig,
}

fn base() -> RunConfig {
    RunConfig {
        k1: 10.0,
        k2: 12.0,
        ..RunConfig::default()
    }
}

fn tau_label(prefix: &str, tau: f64) -> String {
    format!("{prefix}tau{tau}")
}

fn evolve(config: RunConfig) -> Point {
    Point {
        task: Task::Evolve,
        config,
    }
}

pub fn points(name: &str) -> Result<Vec<Point>> {
    let pts = match name {
        "fig1a" => [0.01, 0.05, 0.5, 1.0, 5.0]
            .iter()
            .map(|&tau| {
                evolve(RunConfig {
                    label: tau_label("", tau),
                    tau,
                    steps: 10_000,
                    initial: InitialState::Eigenstate,
                    ..base()
                })
            })
            .collect(),
        "fig1b" => [0.01, 0.03, 0.05, 0.07]
            .iter()
            .map(|&tau| {
                evolve(RunConfig {
                    label: tau_label("", tau),
                    tau,
                    steps: 200_000,
                    basis: 8192,
                    initial: InitialState::Eigenstate,
                    ..base()
                })
            })
            .collect(),
        "fig2a" => vec![Point {
            task: Task::Coeffs,
            config: RunConfig {
                label: "stroboscopic".into(),
                coeff_n_max: fibonacci_instant(20)?,
                coeff_sampling: Sampling::Stroboscopic,
                ..base()
            },
        }],
        "fig2b" => vec![Point {
            task: Task::Coeffs,
            config: RunConfig {
                label: "fibonacci".into(),
                coeff_n_max: fibonacci_instant(30)?,
                coeff_sampling: Sampling::Fibonacci,
                ..base()
            },
        }],
        "fig3" => vec![Point {
            task: Task::Effective,
            config: RunConfig {
                label: "tau0.01".into(),
                tau: 0.01,
                basis: 1024,
                ..base()
            },
        }],
        "figA3" => [0.1, 0.5, 1.0]
            .iter()
            .map(|&tau| {
                evolve(RunConfig {
                    label: tau_label("", tau),
                    sequence: SequenceKind::Constant,
                    k1: 15.0,
                    k2: 15.0,
                    tau,
                    basis: 4096,
                    initial: InitialState::Eigenstate,
                    ..base()
                })
            })
            .collect(),
        "figB4" => {
            let bi = [0.01, 1.0, 5.0].iter().map(|&tau| {
                evolve(RunConfig {
                    label: tau_label("biperiodic_", tau),
                    sequence: SequenceKind::Biperiodic,
                    tau,
                    initial: InitialState::Eigenstate,
                    ..base()
                })
            });
            let rnd = [0.01, 1.0].iter().map(|&tau| {
                evolve(RunConfig {
                    label: tau_label("random_", tau),
                    sequence: SequenceKind::Random,
                    tau,
                    initial: InitialState::Eigenstate,
                    ..base()
                })
            });
            bi.chain(rnd).collect()
        }
        "figC5" => [0, 200]
            .iter()
            .map(|&l0| {
                evolve(RunConfig {
                    label: format!("l0_{l0}"),
                    tau: 0.01,
                    steps: 100_000,
                    basis: 2048,
                    l0,
                    center: Some(l0),
                    initial: InitialState::Gaussian,
                    log_policy: LogPolicy::default(),
                    ..base()
                })
            })
            .collect(),
        other => {
            return Err(Error::Usage(format!(
                "unknown preset '{other}'; known: {}",
                NAMES.join(", ")
            )))
        }
    };
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves_with_unique_labels() {
        for name in NAMES {
            let pts = points(name).unwrap();
            assert!(!pts.is_empty(), "{name}");
            let mut labels: Vec<_> = pts.iter().map(|p| p.config.label.clone()).collect();
            labels.sort();
            labels.dedup();
            assert_eq!(labels.len(), pts.len(), "{name}");
        }
        assert!(points("fig9").is_err());
    }

    #[test]
    fn caption_parameters() {
        for p in points("fig1a").unwrap() {
            assert_eq!((p.config.k1, p.config.k2), (10.0, 12.0));
            assert_eq!(p.config.initial, InitialState::Eigenstate);
            assert_eq!(p.config.sequence, SequenceKind::Fibonacci);
        }
        assert_eq!(points("fig2b").unwrap()[0].config.coeff_n_max, 1_346_269);
    }
}
