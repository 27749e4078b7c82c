//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::Path;

use kickrotor::bchcoeff::{DeltaSource, EtaBranch, Sampling};
use kickrotor::evolve::LogPolicy;
use kickrotor::kickseq::SequenceKind;
use kickrotor::{Error, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Gaussian,
    Eigenstate,
}

/// Every key accepted in config files and `--set`. Subcommands read the subset
/// they need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub label: String,
    pub sequence: SequenceKind,
    pub k1: f64,
    pub k2: f64,
    pub seed: u64,
    pub tau: f64,
    pub steps: u64,
    /// 0 selects the basis automatically.
    pub basis: usize,
    /// `None` centers the window on `l0`.
    pub center: Option<i64>,
    pub initial: InitialState,
    pub l0: i64,
    #[serde(serialize_with = "policy_to_str", deserialize_with = "policy_from_str")]
    pub log_policy: LogPolicy,
    /// 0 means `max(1, steps / 100)`.
    pub fit_n_min: u64,
    /// 0 means `steps`.
    pub fit_n_max: u64,
    pub plateau_ref: Option<f64>,
    pub crossover_factor: f64,
    pub crossover_min_slope: f64,
    pub crossover_window: usize,
    pub eta_branch: EtaBranch,
    pub delta_source: DeltaSource,
    pub coeff_n_max: u64,
    pub coeff_sampling: Sampling,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            label: "run".into(),
            sequence: SequenceKind::Fibonacci,
            k1: 10.0,
            k2: 12.0,
            seed: 0,
            tau: 1.0,
            steps: 10_000,
            basis: 0,
            center: None,
            initial: InitialState::Gaussian,
            l0: 0,
            log_policy: LogPolicy::default(),
            fit_n_min: 0,
            fit_n_max: 0,
            plateau_ref: None,
            crossover_factor: 3.0,
            crossover_min_slope: 0.5,
            crossover_window: 9,
            eta_branch: EtaBranch::Mean,
            delta_source: DeltaSource::Recursion,
            coeff_n_max: 10_946,
            coeff_sampling: Sampling::Stroboscopic,
        }
    }
}

fn policy_to_str<S: Serializer>(p: &LogPolicy, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(p)
}

fn policy_from_str<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<LogPolicy, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

pub struct KeyDoc {
    pub key: &'static str,
    pub kind: &'static str,
    pub description: &'static str,
}

pub const KEYS: &[KeyDoc] = &[
    KeyDoc {
        key: "label",
        kind: "string",
        description: "Run name; outputs go to `<out>/<label>/`.",
    },
    KeyDoc {
        key: "sequence",
        kind: "fibonacci | biperiodic | random | constant",
        description: "Kick sequence. `constant` uses k1 only.",
    },
    KeyDoc {
        key: "k1",
        kind: "float",
        description: "Kick strength K1.",
    },
    KeyDoc {
        key: "k2",
        kind: "float",
        description: "Kick strength K2.",
    },
    KeyDoc {
        key: "seed",
        kind: "integer",
        description: "Seed of the random sequence (ChaCha8).",
    },
    KeyDoc {
        key: "tau",
        kind: "float > 0",
        description: "Drive period.",
    },
    KeyDoc {
        key: "steps",
        kind: "integer >= 1",
        description: "Number of kicks N.",
    },
    KeyDoc {
        key: "basis",
        kind: "even integer, 0 = auto",
        description: "Momentum basis size R.",
    },
    KeyDoc {
        key: "center",
        kind: "integer | auto",
        description: "Window center; `auto` centers on l0.",
    },
    KeyDoc {
        key: "initial",
        kind: "gaussian | eigenstate",
        description: "Initial state: Gaussian exp(-(l-l0)^2) or |l0>.",
    },
    KeyDoc {
        key: "l0",
        kind: "integer",
        description: "Initial momentum.",
    },
    KeyDoc {
        key: "log_policy",
        kind: "every_step | fibonacci_instants | log_spaced:<ppd>",
        description: "Which steps are written to the trace.",
    },
    KeyDoc {
        key: "fit_n_min",
        kind: "integer, 0 = steps/100",
        description: "Start of the growth-fit window.",
    },
    KeyDoc {
        key: "fit_n_max",
        kind: "integer, 0 = steps",
        description: "End of the growth-fit window.",
    },
    KeyDoc {
        key: "plateau_ref",
        kind: "float | none",
        description: "Plateau height for crossover detection.",
    },
    KeyDoc {
        key: "crossover_factor",
        kind: "float",
        description: "Trailing median must exceed this multiple of plateau_ref.",
    },
    KeyDoc {
        key: "crossover_min_slope",
        kind: "float",
        description: "Local log-log slope threshold of the crossover.",
    },
    KeyDoc {
        key: "crossover_window",
        kind: "integer >= 3",
        description: "Trailing window, in logged samples.",
    },
    KeyDoc {
        key: "eta_branch",
        kind: "mean | even | odd",
        description: "Saturated eta values used by the effective generator.",
    },
    KeyDoc {
        key: "delta_source",
        kind: "recursion | tabulated",
        description: "Saturated delta used by the effective generator.",
    },
    KeyDoc {
        key: "coeff_n_max",
        kind: "integer",
        description: "Last step of the coefficient table.",
    },
    KeyDoc {
        key: "coeff_sampling",
        kind: "stroboscopic | fibonacci",
        description: "Coefficient rows at every step or at Fibonacci instants.",
    },
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Usage(format!("key '{key}': cannot parse '{value}'")))
}

fn wrap_usage<T>(key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Usage(format!("key '{key}': {e}")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "label" => {
                if v.is_empty() || v.contains(['/', '\\']) || v.starts_with('.') {
                    return Err(Error::Usage(format!("key 'label': '{v}' is not a plain name")));
                }
                self.label = v.to_string();
            }
            "sequence" => self.sequence = wrap_usage(key, v.parse())?,
            "k1" => self.k1 = parse(key, v)?,
            "k2" => self.k2 = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "tau" => self.tau = parse(key, v)?,
            "steps" => self.steps = parse(key, v)?,
            "basis" => self.basis = parse(key, v)?,
            "center" => {
                self.center = if v == "auto" { None } else { Some(parse(key, v)?) };
            }
            "initial" => {
                self.initial = match v {
                    "gaussian" => InitialState::Gaussian,
                    "eigenstate" | "momentum_eigenstate" => InitialState::Eigenstate,
                    _ => return Err(Error::Usage(format!("key 'initial': unknown state '{v}'"))),
                }
            }
            "l0" => self.l0 = parse(key, v)?,
            "log_policy" => self.log_policy = wrap_usage(key, v.parse())?,
            "fit_n_min" => self.fit_n_min = parse(key, v)?,
            "fit_n_max" => self.fit_n_max = parse(key, v)?,
            "plateau_ref" => {
                self.plateau_ref = if v == "none" { None } else { Some(parse(key, v)?) };
            }
            "crossover_factor" => self.crossover_factor = parse(key, v)?,
            "crossover_min_slope" => self.crossover_min_slope = parse(key, v)?,
            "crossover_window" => self.crossover_window = parse(key, v)?,
            "eta_branch" => self.eta_branch = wrap_usage(key, v.parse())?,
            "delta_source" => self.delta_source = wrap_usage(key, v.parse())?,
            "coeff_n_max" => self.coeff_n_max = parse(key, v)?,
            "coeff_sampling" => self.coeff_sampling = wrap_usage(key, v.parse())?,
            other => return Err(Error::Usage(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key=value` pairs, returning the keys touched.
    pub fn apply<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Vec<String>> {
        let mut touched = Vec::new();
        for (k, v) in pairs {
            self.set(k, v)?;
            touched.push(k.trim().to_string());
        }
        Ok(touched)
    }

    pub fn window_center(&self) -> i64 {
        self.center.unwrap_or(self.l0)
    }

    pub fn fit_window(&self) -> (u64, u64) {
        let hi = if self.fit_n_max == 0 {
            self.steps
        } else {
            self.fit_n_max
        };
        let lo = if self.fit_n_min == 0 {
            (self.steps / 100).max(1)
        } else {
            self.fit_n_min
        };
        (lo, hi)
    }
}

/// Parses a config file body into `(key, value)` pairs. `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("line {}: expected key = value, got '{raw}'", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn load_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_pairs(&text)
}

/// `--set key=value`.
pub fn split_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("expected key=value, got '{s}'")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Markdown reference of every key with its default.
pub fn key_reference() -> String {
    let defaults = serde_json::to_value(RunConfig::default()).expect("config serializes");
    let mut out = String::from(
        "# Configuration keys\n\n\
         Config files hold one `key = value` per line; `#` starts a comment. \
         Command-line flags and `--set key=value` override the file, which overrides a preset.\n\n\
         | key | type | default | meaning |\n|---|---|---|---|\n",
    );
    for k in KEYS {
        let default = match &defaults[k.key] {
            serde_json::Value::Null => "auto / none".to_string(),
            serde_json::Value::String(s) => s.clone(),
            v => v.to_string(),
        };
        let kind = k.kind.replace('|', "\\|");
        let _ = writeln!(
            out,
            "| `{}` | {} | `{}` | {} |",
            k.key, kind, default, k.description
        );
    }
    out
}
