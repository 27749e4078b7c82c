//! `kickrotor`: runs trajectories, coefficient tables, effective spectra and
//! figure presets, writing CSV/JSON with reproducibility manifests.

mod commands;
mod config;
mod presets;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kickrotor::{Error, Result};

use config::RunConfig;

/// Resolved config, the raw pairs applied and the keys they touched.
type Resolved = (RunConfig, Vec<(String, String)>, Vec<String>);

#[derive(Parser)]
#[command(
    name = "kickrotor",
    version,
    about = "Quantum kicked rotor with binary kick sequences"
)]
struct Cli {
    /// Output root; runs write into <out>/<label>/ and presets into <out>/<preset>/<label>/.
    #[arg(long, global = true, env = "KICKROTOR_OUT", default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    k1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    k2: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    l0: Option<String>,
    #[arg(long)]
    basis: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    log_policy: Option<String>,
}

impl RunArgs {
    /// Config file pairs first, then flags, then `--set`, in that order.
    fn pairs(&self) -> Result<Vec<(String, String)>> {
        let mut out = match &self.config {
            Some(p) => config::load_pairs(p)?,
            None => Vec::new(),
        };
        let flags = [
            ("seed", &self.seed),
            ("tau", &self.tau),
            ("k1", &self.k1),
            ("k2", &self.k2),
            ("l0", &self.l0),
            ("basis", &self.basis),
            ("steps", &self.steps),
            ("log_policy", &self.log_policy),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        }
        for s in &self.set {
            out.push(config::split_assignment(s)?);
        }
        Ok(out)
    }

    fn resolve(&self, mut base: RunConfig) -> Result<Resolved> {
        let pairs = self.pairs()?;
        let mut touched = base.apply(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        touched.dedup();
        Ok((base, pairs, touched))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and record <l^2>.
    Evolve(RunArgs),
    /// Exact BCH coefficient table.
    Coeffs(RunArgs),
    /// Spectrum, localization and plateau of the effective Fibonacci Hamiltonian.
    Effective(RunArgs),
    /// Regime reports for existing trace files or directories.
    Analyze {
        #[command(flatten)]
        run: RunArgs,
        /// Name of the output directory under the output root.
        #[arg(long, default_value = "analysis")]
        name: String,
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Run a figure preset; overrides apply to every point.
    Preset {
        name: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// List the presets.
    Presets,
    /// Print the configuration key reference (Markdown).
    ConfigReference,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Evolve(a) => {
            let (cfg, _, touched) = a.resolve(RunConfig::default())?;
            let dir = cli.out.join(&cfg.label);
            let report = commands::evolve(&cfg, &touched, &dir)?;
            match report {
                Some(r) => println!(
                    "{}: slope {:.3} over [{}, {}], {}",
                    dir.display(),
                    r.slope,
                    r.n_min,
                    r.n_max,
                    r.verdict
                ),
                None => println!("{}: done", dir.display()),
            }
        }
        Command::Coeffs(a) => {
            let (cfg, _, touched) = a.resolve(RunConfig::default())?;
            let dir = cli.out.join(&cfg.label);
            let rows = commands::coeffs(&cfg, &touched, &dir)?;
            println!("{}: {rows} rows", dir.display());
        }
        Command::Effective(a) => {
            let (cfg, _, touched) = a.resolve(RunConfig::default())?;
            let dir = cli.out.join(&cfg.label);
            let plateau = commands::effective(&cfg, &touched, &dir)?;
            println!("{}: plateau estimate {plateau:.4}", dir.display());
        }
        Command::Analyze { run, name, traces } => {
            let (cfg, pairs, touched) = run.resolve(RunConfig::default())?;
            let dir = cli.out.join(&name);
            let rows = commands::analyze(&cfg, &pairs, &touched, &traces, &dir)?;
            for r in rows {
                println!("{}: slope {:.3}, {}", r.label, r.report.slope, r.report.verdict);
            }
        }
        Command::Preset { name, run } => {
            let pairs = run.pairs()?;
            let mut touched: Vec<String> = pairs.iter().map(|(k, _)| k.clone()).collect();
            touched.dedup();
            commands::preset(&name, &pairs, &touched, &cli.out)?;
        }
        Command::Presets => {
            for n in presets::NAMES {
                println!("{n}");
            }
        }
        Command::ConfigReference => print!("{}", config::key_reference()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kickrotor: {e}");
            match e {
                Error::Usage(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
