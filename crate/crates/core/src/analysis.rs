//! Regime classification of `<l^2>` traces: growth exponents, plateaus and
//! the localized-to-diffusive crossover.

use serde::{Deserialize, Serialize};

use crate::effham::median_sorted;
use crate::error::{Error, Result};
use crate::evolve::TraceSample;

/// Fewest samples accepted by [`fit_growth`].
pub const MIN_FIT_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least-squares fit of `ln <l^2>` against `ln N` over `n_min <= N <= n_max`.
pub fn fit_growth(samples: &[TraceSample], n_min: u64, n_max: u64) -> Result<GrowthFit> {
    let window: Vec<&TraceSample> = samples
        .iter()
        .filter(|s| s.n >= n_min.max(1) && s.n <= n_max)
        .collect();
    if window.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "{} samples in [{n_min}, {n_max}], need at least {MIN_FIT_SAMPLES}",
            window.len()
        )));
    }
    if let Some(bad) = window.iter().find(|s| !(s.energy > 0.0 && s.energy.is_finite())) {
        return Err(Error::Fit(format!(
            "energy {} at N = {} is not positive",
            bad.energy, bad.n
        )));
    }
    let xs: Vec<f64> = window.iter().map(|s| (s.n as f64).ln()).collect();
    let ys: Vec<f64> = window.iter().map(|s| s.energy.ln()).collect();
    linear_fit(&xs, &ys)
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<GrowthFit> {
    let n = xs.len();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("all samples share one N".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = if n > 2 {
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(GrowthFit {
        slope,
        stderr,
        intercept,
        points: n,
    })
}

/// Thresholds of [`detect_crossover`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverParams {
    /// Trailing median must exceed this multiple of the plateau reference.
    pub factor: f64,
    /// Local log-log slope over the trailing window must exceed this.
    pub min_slope: f64,
    /// Trailing window length, in logged samples.
    pub window: usize,
    /// The reported onset is the last sample before the trigger whose energy is
    /// at most `onset_factor` times the reference.
    pub onset_factor: f64,
}

impl Default for CrossoverParams {
    fn default() -> Self {
        Self {
            factor: 3.0,
            min_slope: 0.5,
            window: 9,
            onset_factor: 1.0,
        }
    }
}

/// Logged step at which the trace leaves a plateau of height `plateau_ref`.
///
/// Scans the samples with `N >= 1` in order; the first index whose trailing
/// window has median above `factor * plateau_ref` and local slope above
/// `min_slope` is the trigger. The onset reported is the last sample up to the
/// trigger that still sits at or below `onset_factor * plateau_ref`, or the
/// first sample when none does. `None` when never triggered.
pub fn detect_crossover(
    samples: &[TraceSample],
    plateau_ref: f64,
    params: &CrossoverParams,
) -> Result<Option<u64>> {
    if !(plateau_ref > 0.0 && plateau_ref.is_finite()) {
        return Err(Error::Domain(format!(
            "plateau reference must be positive, got {plateau_ref}"
        )));
    }
    if params.window < 3 {
        return Err(Error::Usage("crossover window needs at least 3 samples".into()));
    }
    let pts: Vec<&TraceSample> = samples.iter().filter(|s| s.n >= 1).collect();
    let (Some(first), Some(last)) = (pts.first(), pts.last()) else {
        return Err(Error::Fit("empty trace".into()));
    };
    if (last.n as f64) < 1000.0 * first.n as f64 {
        return Err(Error::Fit(format!(
            "trace spans N = {}..{}, fewer than three decades",
            first.n, last.n
        )));
    }
    let w = params.window;
    for i in (w - 1)..pts.len() {
        let win = &pts[i + 1 - w..=i];
        let mut e: Vec<f64> = win.iter().map(|s| s.energy).collect();
        e.sort_by(f64::total_cmp);
        if median_sorted(&e) <= params.factor * plateau_ref {
            continue;
        }
        let xs: Vec<f64> = win.iter().map(|s| (s.n as f64).ln()).collect();
        let ys: Vec<f64> = win.iter().map(|s| s.energy.max(f64::MIN_POSITIVE).ln()).collect();
        if linear_fit(&xs, &ys)?.slope <= params.min_slope {
            continue;
        }
        let limit = params.onset_factor * plateau_ref;
        let onset = pts[..=i]
            .iter()
            .rev()
            .find(|s| s.energy <= limit)
            .map_or(pts[0].n, |s| s.n);
        return Ok(Some(onset));
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Localized,
    Diffusive,
    Crossover,
    Indeterminate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Localized => "localized",
            Verdict::Diffusive => "diffusive",
            Verdict::Crossover => "crossover",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyParams {
    /// Slopes at or below this count as localized.
    pub localized_max_slope: f64,
    /// Slopes within this distance of 1 count as diffusive.
    pub diffusive_tolerance: f64,
    pub crossover: CrossoverParams,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            localized_max_slope: 0.15,
            diffusive_tolerance: 0.2,
            crossover: CrossoverParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub n_min: u64,
    pub n_max: u64,
    pub slope: f64,
    pub slope_stderr: f64,
    pub plateau_mean: f64,
    /// Smallest and largest energy in the window.
    pub plateau_band: (f64, f64),
    pub crossover: Option<u64>,
    pub verdict: Verdict,
}

/// Fits `[n_min, n_max]` and, when `plateau_ref` is given and the trace is long
/// enough, looks for a crossover over the whole trace.
pub fn classify(
    samples: &[TraceSample],
    n_min: u64,
    n_max: u64,
    plateau_ref: Option<f64>,
    params: &ClassifyParams,
) -> Result<RegimeReport> {
    let fit = fit_growth(samples, n_min, n_max)?;
    let window: Vec<f64> = samples
        .iter()
        .filter(|s| s.n >= n_min.max(1) && s.n <= n_max)
        .map(|s| s.energy)
        .collect();
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let band = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
            (lo.min(e), hi.max(e))
        });
    let crossover = match plateau_ref {
        Some(r) => match detect_crossover(samples, r, &params.crossover) {
            Ok(c) => c,
            Err(Error::Fit(_)) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    let verdict = if crossover.is_some() {
        Verdict::Crossover
    } else if fit.slope <= params.localized_max_slope {
        Verdict::Localized
    } else if (fit.slope - 1.0).abs() <= params.diffusive_tolerance {
        Verdict::Diffusive
    } else {
        Verdict::Indeterminate
    };
    Ok(RegimeReport {
        n_min,
        n_max,
        slope: fit.slope,
        slope_stderr: fit.stderr,
        plateau_mean: mean,
        plateau_band: band,
        crossover,
        verdict,
    })
}

/// One row of a sweep summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub sequence: String,
    pub tau: f64,
    pub k1: f64,
    pub k2: f64,
    pub report: RegimeReport,
}

pub const SUMMARY_HEADER: &str =
    "label,sequence,tau,k1,k2,n_min,n_max,slope,slope_stderr,plateau_mean,band_low,band_high,crossover,verdict";

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let p = &r.report;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.label,
            r.sequence,
            r.tau,
            r.k1,
            r.k2,
            p.n_min,
            p.n_max,
            p.slope,
            p.slope_stderr,
            p.plateau_mean,
            p.plateau_band.0,
            p.plateau_band.1,
            p.crossover.map_or(String::new(), |c| c.to_string()),
            p.verdict
        ));
    }
    out
}
