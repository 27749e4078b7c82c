//! Stroboscopic split-step evolution.
//!
//! One step is `U = exp(-i l^2 tau / 2) exp(-i K cos theta)`: the kick is applied
//! pointwise on an `R`-point angle grid reached by an (unpadded) DFT of the
//! momentum amplitudes, and the free rotation is a diagonal phase in momentum.
//! The DFT pair is an exact unitary change of basis on the truncated window.
//!
//! Traces sample `<l^2>` of `psi_N = U_N ... U_1 psi_0`, i.e. immediately before
//! kick `N + 1`. The free factor commutes with `l^2`, so this equals the energy
//! just after kick `N`'s free rotation.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{BasisWindow, RotorState, C64, EDGE_FRACTION, EDGE_LEAKAGE_LIMIT};
use crate::kickseq::{fibonacci_index, fibonacci_instants_upto, Kick, KickSequenceSpec};

/// Kick labels folded into [`EnergyTrace::sequence_checksum`].
pub const CHECKSUM_LABELS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum LogPolicy {
    EveryStep,
    FibonacciInstants,
    LogSpaced { points_per_decade: u32 },
}

impl Default for LogPolicy {
    fn default() -> Self {
        LogPolicy::LogSpaced {
            points_per_decade: 24,
        }
    }
}

impl std::fmt::Display for LogPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LogPolicy::EveryStep => write!(f, "every_step"),
            LogPolicy::FibonacciInstants => write!(f, "fibonacci_instants"),
            LogPolicy::LogSpaced { points_per_decade } => write!(f, "log_spaced:{points_per_decade}"),
        }
    }
}

impl std::str::FromStr for LogPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "every_step" | "every" => return Ok(LogPolicy::EveryStep),
            "fibonacci_instants" | "fibonacci" => return Ok(LogPolicy::FibonacciInstants),
            "log_spaced" | "log" => return Ok(LogPolicy::default()),
            _ => {}
        }
        let ppd = s
            .strip_prefix("log_spaced:")
            .or_else(|| s.strip_prefix("log:"))
            .ok_or_else(|| Error::Usage(format!("unknown log policy '{s}'")))?;
        let points_per_decade: u32 = ppd
            .parse()
            .map_err(|_| Error::Usage(format!("bad points-per-decade '{ppd}'")))?;
        if points_per_decade == 0 {
            return Err(Error::Usage("points per decade must be positive".into()));
        }
        Ok(LogPolicy::LogSpaced { points_per_decade })
    }
}

impl LogPolicy {
    /// Step indices recorded for a run of `n_steps`, ascending, always starting
    /// with `0` (the initial state). Every-step and log-spaced policies also end
    /// at `n_steps`.
    pub fn instants(&self, n_steps: u64) -> Vec<u64> {
        let mut out = vec![0];
        match *self {
            LogPolicy::EveryStep => out.extend(1..=n_steps),
            LogPolicy::FibonacciInstants => out.extend(fibonacci_instants_upto(n_steps)),
            LogPolicy::LogSpaced { points_per_decade } => {
                let p = f64::from(points_per_decade.max(1));
                let mut k = 0u32;
                loop {
                    let n = 10f64.powf(f64::from(k) / p).round() as u64;
                    if n > n_steps {
                        break;
                    }
                    if *out.last().unwrap() != n {
                        out.push(n);
                    }
                    k += 1;
                }
                if *out.last().unwrap() != n_steps {
                    out.push(n_steps);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub tau: f64,
    pub spec: KickSequenceSpec,
    pub window: BasisWindow,
    pub n_steps: u64,
    pub log_policy: LogPolicy,
}

impl EvolutionConfig {
    pub fn new(
        tau: f64,
        spec: KickSequenceSpec,
        window: BasisWindow,
        n_steps: u64,
        log_policy: LogPolicy,
    ) -> Result<Self> {
        let cfg = Self {
            tau,
            spec,
            window,
            n_steps,
            log_policy,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Domain(format!("tau must be positive, got {}", self.tau)));
        }
        if self.n_steps == 0 {
            return Err(Error::Domain("n_steps must be at least 1".into()));
        }
        self.spec.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub n: u64,
    pub energy: f64,
}

/// `<l^2>` time series of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub samples: Vec<TraceSample>,
    pub config: EvolutionConfig,
    /// SHA-256 of the first `min(n_steps, 100000)` kick labels.
    pub sequence_checksum: String,
    /// Largest `| |psi|^2 - 1 |` seen at any step.
    pub max_norm_drift: f64,
    /// Largest probability seen on the guarded window edge.
    pub max_edge_probability: f64,
    /// Set when the run was aborted; the samples are then a prefix.
    #[serde(default)]
    pub failure: Option<String>,
}

impl EnergyTrace {
    pub fn ns(&self) -> Vec<u64> {
        self.samples.iter().map(|s| s.n).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.energy).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    /// Samples with `n_min <= n <= n_max`.
    pub fn window(&self, n_min: u64, n_max: u64) -> impl Iterator<Item = &TraceSample> {
        self.samples.iter().filter(move |s| s.n >= n_min && s.n <= n_max)
    }

    pub fn mean_energy(&self, n_min: u64, n_max: u64) -> Option<f64> {
        let (sum, count) = self
            .window(n_min, n_max)
            .fold((0.0, 0usize), |(s, c), x| (s + x.energy, c + 1));
        (count > 0).then(|| sum / count as f64)
    }
}

/// A run stopped early; carries the samples recorded before the failure.
#[derive(Debug, Clone)]
pub struct TrajectoryAbort {
    pub error: Error,
    pub partial: EnergyTrace,
}

impl From<Box<TrajectoryAbort>> for Error {
    fn from(abort: Box<TrajectoryAbort>) -> Self {
        abort.error
    }
}

/// Reusable split-step machinery for one window and period.
pub struct SplitStepPropagator {
    window: BasisWindow,
    tau: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
    free_phase: Vec<C64>,
    cos_grid: Vec<f64>,
    kick_cache: Vec<(u64, Vec<C64>)>,
}

impl std::fmt::Debug for SplitStepPropagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SplitStepPropagator")
            .field("window", &self.window)
            .field("tau", &self.tau)
            .finish_non_exhaustive()
    }
}

impl SplitStepPropagator {
    /// `tau = 0` is allowed here (pure kicks); trajectories require `tau > 0`.
    pub fn new(window: BasisWindow, tau: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::Domain(format!("tau must be finite and >= 0, got {tau}")));
        }
        let r = window.size;
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(r);
        let inverse = planner.plan_fft_inverse(r);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let half_tau = tau / 2.0;
        let free_phase = window
            .momenta()
            .map(|l| {
                let l2 = (l as f64) * (l as f64);
                C64::from_polar(1.0, -l2 * half_tau)
            })
            .collect();
        let cos_grid = (0..r)
            .map(|j| (std::f64::consts::TAU * j as f64 / r as f64).cos())
            .collect();
        Ok(Self {
            window,
            tau,
            forward,
            inverse,
            scratch: vec![C64::new(0.0, 0.0); scratch_len],
            free_phase,
            cos_grid,
            kick_cache: Vec::new(),
        })
    }

    pub fn window(&self) -> BasisWindow {
        self.window
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn kick_slot(&mut self, k: f64) -> usize {
        let key = k.to_bits();
        if let Some(i) = self.kick_cache.iter().position(|(b, _)| *b == key) {
            return i;
        }
        // 1/R of the unnormalized DFT pair is folded into the phase table.
        let scale = 1.0 / self.window.size as f64;
        let table = self
            .cos_grid
            .iter()
            .map(|c| C64::from_polar(scale, -k * c))
            .collect();
        self.kick_cache.push((key, table));
        self.kick_cache.len() - 1
    }

    /// `exp(-i K cos theta)` (or its inverse when `sign < 0`).
    fn apply_kick(&mut self, amps: &mut [C64], k: f64, inverse: bool) {
        let slot = self.kick_slot(k);
        // c_k -> psi(theta_j) up to the global factor exp(i l_min theta_j),
        // which commutes with the pointwise phase and cancels on the way back.
        self.inverse.process_with_scratch(amps, &mut self.scratch);
        let table = &self.kick_cache[slot].1;
        if inverse {
            for (a, p) in amps.iter_mut().zip(table) {
                *a *= p.conj();
            }
        } else {
            for (a, p) in amps.iter_mut().zip(table) {
                *a *= p;
            }
        }
        self.forward.process_with_scratch(amps, &mut self.scratch);
    }

    fn apply_free(&self, amps: &mut [C64], inverse: bool) {
        if inverse {
            for (a, p) in amps.iter_mut().zip(&self.free_phase) {
                *a *= p.conj();
            }
        } else {
            for (a, p) in amps.iter_mut().zip(&self.free_phase) {
                *a *= p;
            }
        }
    }

    fn check_window(&self, state: &RotorState) -> Result<()> {
        if state.window() != self.window {
            return Err(Error::WindowMismatch(format!(
                "state on {:?}, propagator on {:?}",
                state.window(),
                self.window
            )));
        }
        Ok(())
    }

    /// One period: kick with strength `k`, then free rotation.
    pub fn step(&mut self, state: &mut RotorState, k: f64) -> Result<()> {
        self.check_window(state)?;
        let amps = state.amplitudes_mut();
        self.apply_kick(amps, k, false);
        self.apply_free(amps, false);
        Ok(())
    }

    /// Exact inverse of [`Self::step`]: conjugate phases in reverse order.
    pub fn step_inverse(&mut self, state: &mut RotorState, k: f64) -> Result<()> {
        self.check_window(state)?;
        let amps = state.amplitudes_mut();
        self.apply_free(amps, true);
        self.apply_kick(amps, k, true);
        Ok(())
    }

    /// Applies `U_N ... U_1` for the given amplitudes in order.
    pub fn propagate<I>(&mut self, state: &mut RotorState, kicks: I) -> Result<()>
    where
        I: IntoIterator<Item = f64>,
    {
        for k in kicks {
            self.step(state, k)?;
        }
        Ok(())
    }
}

/// One split-step period `exp(-i l^2 tau/2) exp(-i K cos theta)` applied to `state`.
pub fn step(state: &RotorState, k: f64, tau: f64) -> Result<RotorState> {
    let mut out = state.clone();
    SplitStepPropagator::new(state.window(), tau)?.step(&mut out, k)?;
    Ok(out)
}

/// `U(n, 0) psi` for the first `n_steps` kicks of `spec`.
pub fn propagate_sequence(
    state: &RotorState,
    spec: &KickSequenceSpec,
    tau: f64,
    n_steps: u64,
) -> Result<RotorState> {
    let mut out = state.clone();
    let mut prop = SplitStepPropagator::new(state.window(), tau)?;
    for kick in spec.stream().take(n_steps as usize) {
        prop.step(&mut out, spec.amplitude_of(kick?))?;
    }
    Ok(out)
}

/// Runs `config` from `initial` and records `<l^2>` at the policy's instants.
pub fn run_trajectory(
    config: &EvolutionConfig,
    initial: &RotorState,
) -> std::result::Result<EnergyTrace, Box<TrajectoryAbort>> {
    run_trajectory_with_state(config, initial).map(|(trace, _)| trace)
}

/// As [`run_trajectory`], also returning the final state.
pub fn run_trajectory_with_state(
    config: &EvolutionConfig,
    initial: &RotorState,
) -> std::result::Result<(EnergyTrace, RotorState), Box<TrajectoryAbort>> {
    let empty = |error: Error| {
        Box::new(TrajectoryAbort {
            partial: EnergyTrace {
                samples: Vec::new(),
                config: *config,
                sequence_checksum: String::new(),
                max_norm_drift: 0.0,
                max_edge_probability: 0.0,
                failure: Some(error.to_string()),
            },
            error,
        })
    };
    config.validate().map_err(empty)?;
    if initial.window() != config.window {
        return Err(empty(Error::WindowMismatch(
            "initial state window differs from the configured window".into(),
        )));
    }
    let checksum = config
        .spec
        .label_checksum(config.n_steps.min(CHECKSUM_LABELS))
        .map_err(empty)?;
    let mut prop = SplitStepPropagator::new(config.window, config.tau).map_err(empty)?;

    let instants = config.log_policy.instants(config.n_steps);
    let mut next_sample = instants.iter().copied().peekable();
    let mut trace = EnergyTrace {
        samples: Vec::with_capacity(instants.len()),
        config: *config,
        sequence_checksum: checksum,
        max_norm_drift: 0.0,
        max_edge_probability: 0.0,
        failure: None,
    };

    let mut state = initial.clone();
    let abort = |trace: &mut EnergyTrace, error: Error| {
        trace.failure = Some(error.to_string());
        Box::new(TrajectoryAbort {
            error,
            partial: trace.clone(),
        })
    };

    let record = |trace: &mut EnergyTrace, n: u64, state: &RotorState| -> Result<()> {
        let energy = state.kinetic_energy()?;
        trace.samples.push(TraceSample { n, energy });
        Ok(())
    };

    if next_sample.peek() == Some(&0) {
        next_sample.next();
        if let Err(e) = record(&mut trace, 0, &state) {
            return Err(abort(&mut trace, e));
        }
    }

    let mut labels = config.spec.stream();
    for n in 1..=config.n_steps {
        let kick: Kick = match labels.next().expect("kick stream is infinite") {
            Ok(k) => k,
            Err(e) => return Err(abort(&mut trace, e)),
        };
        if let Err(e) = prop.step(&mut state, config.spec.amplitude_of(kick)) {
            return Err(abort(&mut trace, e));
        }
        let leakage = state.edge_probability();
        trace.max_edge_probability = trace.max_edge_probability.max(leakage);
        if leakage > EDGE_LEAKAGE_LIMIT {
            let err = Error::Truncation {
                step: n,
                leakage,
                limit: EDGE_LEAKAGE_LIMIT,
                basis: config.window.size,
            };
            return Err(abort(&mut trace, err));
        }
        if next_sample.peek() == Some(&n) {
            next_sample.next();
            trace.max_norm_drift = trace.max_norm_drift.max((state.norm_sqr() - 1.0).abs());
            if let Err(e) = record(&mut trace, n, &state) {
                return Err(abort(&mut trace, e));
            }
        }
    }
    trace.max_norm_drift = trace.max_norm_drift.max((state.norm_sqr() - 1.0).abs());
    Ok((trace, state))
}

/// Whether step `n` is a Fibonacci instant `F(m)`.
pub fn is_fibonacci_instant(n: u64) -> bool {
    fibonacci_index(n).is_some()
}

/// Basis size for a run expected to reach `<l^2> ~ E`, with `E` the larger of a
/// diffusion estimate `K^2 N min(1, (K tau)^2) / 2` and the pendulum scale
/// `4 K / tau`. Half-width `10 sqrt(E) + 64` outside the guarded edge, rounded
/// up to a power of two (at least 256).
pub fn auto_window(spec: &KickSequenceSpec, tau: f64, n_steps: u64, center: i64) -> Result<BasisWindow> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    let k = spec
        .k1
        .abs()
        .max(if spec.kind == crate::kickseq::SequenceKind::Constant {
            0.0
        } else {
            spec.k2.abs()
        });
    let diffusive = k * k * n_steps as f64 * (k * tau).powi(2).min(1.0) / 2.0;
    let pendulum = 4.0 * k / tau;
    let energy = diffusive.max(pendulum);
    let half = 10.0 * energy.sqrt() + 64.0;
    let size = (2.0 * half / (1.0 - EDGE_FRACTION)).ceil() as usize;
    let size = size.next_power_of_two().max(256);
    BasisWindow::new(center, size)
}
