//! Exact BCH coefficients of the composed propagator along a kick word.
//!
//! With `A_j = -i L_j`, the product of the first `n` steps is written
//! `exp(alpha A1 + beta A2 + delta [A2, A1] + eta1 [A1, [A1, A2]] + eta2 [A2, [A2, A1]])`
//! up to terms of order `tau^2`. Appending one step updates the five
//! coefficients by the recursions in [`CoefficientState::recursion_step`]; all
//! arithmetic is exact.

use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kickseq::{
    fibonacci_index, fibonacci_instant, floor_over_golden, floor_over_golden_sq, gamma, Kick,
    KickSequenceSpec, GOLDEN, MAX_FIBONACCI_INDEX,
};

/// Largest numerator or denominator (in bits) a coefficient may reach.
pub const MAX_COEFFICIENT_BITS: u64 = 4096;

/// Largest step count accepted by the coefficient walks and the CSV writer.
pub const MAX_COEFFICIENT_STEPS: u64 = 1 << 26;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn int(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn check_steps(n: u64) -> Result<()> {
    if n > MAX_COEFFICIENT_STEPS {
        return Err(Error::Resource(format!(
            "n = {n} exceeds the coefficient bound {MAX_COEFFICIENT_STEPS}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoefficientState {
    pub n: u64,
    pub alpha: BigRational,
    pub beta: BigRational,
    pub delta: BigRational,
    pub eta1: BigRational,
    pub eta2: BigRational,
}

/// Coefficients divided by the step count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Necs {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl Default for CoefficientState {
    fn default() -> Self {
        Self::zero()
    }
}

impl CoefficientState {
    /// The empty product (`n = 0`).
    pub fn zero() -> Self {
        Self {
            n: 0,
            alpha: BigRational::zero(),
            beta: BigRational::zero(),
            delta: BigRational::zero(),
            eta1: BigRational::zero(),
            eta2: BigRational::zero(),
        }
    }

    /// A state with the given coefficients; `alpha + beta` must equal `n`.
    pub fn new(
        n: u64,
        alpha: BigRational,
        beta: BigRational,
        delta: BigRational,
        eta1: BigRational,
        eta2: BigRational,
    ) -> Result<Self> {
        let s = Self {
            n,
            alpha,
            beta,
            delta,
            eta1,
            eta2,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if &self.alpha + &self.beta != int(self.n) {
            return Err(Error::Integrity(format!(
                "alpha + beta = {} differs from n = {}",
                &self.alpha + &self.beta,
                self.n
            )));
        }
        Ok(())
    }

    /// Coefficients for a single step of the given kind: `(1,0,0,0,0)` or `(0,1,0,0,0)`.
    pub fn single(kick: Kick) -> Self {
        Self::zero()
            .recursion_step(kick)
            .expect("one step never overflows")
    }

    /// Appends one step.
    pub fn recursion_step(&self, kick: Kick) -> Result<Self> {
        let twelfth = rat(1, 12);
        let half = rat(1, 2);
        let one = BigRational::one();
        let next = match kick {
            Kick::K1 => Self {
                n: self.n + 1,
                alpha: &self.alpha + &one,
                beta: self.beta.clone(),
                delta: &self.delta - &self.beta * &half,
                eta1: &self.eta1 - &self.delta * &half + &self.beta * (&one - &self.alpha) * &twelfth,
                eta2: &self.eta2 + &self.beta * &self.beta * &twelfth,
            },
            Kick::K2 => Self {
                n: self.n + 1,
                alpha: self.alpha.clone(),
                beta: &self.beta + &one,
                delta: &self.delta + &self.alpha * &half,
                eta1: &self.eta1 + &self.alpha * &self.alpha * &twelfth,
                eta2: &self.eta2 + &self.delta * &half + &self.alpha * (&one - &self.beta) * &twelfth,
            },
        };
        next.check_capacity()?;
        Ok(next)
    }

    fn check_capacity(&self) -> Result<()> {
        for (name, v) in self.fields() {
            let bits = v.numer().bits().max(v.denom().bits());
            if bits > MAX_COEFFICIENT_BITS {
                return Err(Error::Resource(format!(
                    "{name} at n = {} needs {bits} bits (limit {MAX_COEFFICIENT_BITS})",
                    self.n
                )));
            }
        }
        Ok(())
    }

    /// `(name, value)` pairs in column order.
    pub fn fields(&self) -> [(&'static str, &BigRational); 5] {
        [
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("delta", &self.delta),
            ("eta1", &self.eta1),
            ("eta2", &self.eta2),
        ]
    }

    /// Raw coefficients as floats, in the order alpha, beta, delta, eta1, eta2.
    pub fn to_f64(&self) -> [f64; 5] {
        self.fields().map(|(_, v)| to_f64(v))
    }

    /// Normalized expansion coefficients. Undefined at `n = 0`.
    pub fn necs(&self) -> Result<Necs> {
        if self.n == 0 {
            return Err(Error::Domain("NECs are undefined at n = 0".into()));
        }
        let n = int(self.n);
        let f = |v: &BigRational| to_f64(&(v / &n));
        Ok(Necs {
            alpha: f(&self.alpha),
            beta: f(&self.beta),
            delta: f(&self.delta),
            eta1: f(&self.eta1),
            eta2: f(&self.eta2),
        })
    }
}

/// Coefficients after applying `kicks` in order.
pub fn coefficients_along(kicks: &[Kick]) -> Result<CoefficientState> {
    check_steps(kicks.len() as u64)?;
    kicks
        .iter()
        .try_fold(CoefficientState::zero(), |c, &k| c.recursion_step(k))
}

/// Iterated recursion along the Fibonacci word, yielding the state at `n = 1, 2, ...`.
#[derive(Debug, Clone, Default)]
pub struct RecursionWalk {
    state: CoefficientState,
}

impl RecursionWalk {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Iterator for RecursionWalk {
    type Item = Result<CoefficientState>;

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.state.n + 1;
        let step = (|| {
            check_steps(n)?;
            let kick = if gamma(n)? == 2 { Kick::K1 } else { Kick::K2 };
            self.state.recursion_step(kick)
        })();
        Some(step.inspect(|s| self.state = s.clone()))
    }
}

/// Floor-function sums for the coefficients, accumulated term by term.
///
/// Uses `floor(nG/(1+G)) = floor(n/G)` and `floor(n/(1+G)) = floor(n/G^2)`;
/// no recursion state enters except `delta(n-1)` from the sum itself.
#[derive(Debug, Clone, Default)]
pub struct ClosedFormWalk {
    state: CoefficientState,
}

impl ClosedFormWalk {
    pub fn new() -> Self {
        Self::default()
    }

    fn term(&self, n: u64) -> Result<CoefficientState> {
        check_steps(n)?;
        let g = i64::from(gamma(n)?);
        let a_prev = BigInt::from(floor_over_golden(n)?);
        let b_prev = BigInt::from(floor_over_golden_sq(n)?);
        let a_prev = BigRational::from_integer(a_prev);
        let b_prev = BigRational::from_integer(b_prev);
        let prev = &self.state;
        let one_minus_g = BigRational::from_integer((1 - g).into());
        let g_minus_one = BigRational::from_integer((g - 1).into());
        let two_minus_g = BigRational::from_integer((2 - g).into());
        let two_minus_n = BigRational::from_integer(BigInt::from(2) - BigInt::from(n));
        let six_delta = &prev.delta * rat(6, 1);
        let twelfth = rat(1, 12);

        let beta = &prev.beta + &two_minus_g;
        let alpha = &prev.alpha + &g_minus_one;
        let delta = &prev.delta - (&g_minus_one * int(n - 1) - &a_prev) * rat(1, 2);
        let eta1 = &prev.eta1
            + (&two_minus_g * &a_prev * &a_prev
                + &one_minus_g * (&six_delta - &two_minus_n * &b_prev - &b_prev * &b_prev))
                * &twelfth;
        let eta2 = &prev.eta2
            + (&g_minus_one * &b_prev * &b_prev
                + &two_minus_g * (&six_delta + &two_minus_n * &a_prev + &a_prev * &a_prev))
                * &twelfth;
        let next = CoefficientState {
            n,
            alpha,
            beta,
            delta,
            eta1,
            eta2,
        };
        next.check_capacity()?;
        Ok(next)
    }
}

impl Iterator for ClosedFormWalk {
    type Item = Result<CoefficientState>;

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.state.n + 1;
        Some(self.term(n).inspect(|s| self.state = s.clone()))
    }
}

/// Coefficients at step `n` from the floor-function sums.
pub fn coefficients_closed_form(n: u64) -> Result<CoefficientState> {
    if n == 0 {
        return Err(Error::Domain("closed forms are defined for n >= 1".into()));
    }
    check_steps(n)?;
    let mut last = CoefficientState::zero();
    for s in ClosedFormWalk::new().take(n as usize) {
        last = s?;
    }
    Ok(last)
}

/// Coefficients at step `n` by iterating the recursion along the Fibonacci word.
pub fn coefficients_recursion(n: u64) -> Result<CoefficientState> {
    check_steps(n)?;
    let mut last = CoefficientState::zero();
    for s in RecursionWalk::new().take(n as usize) {
        last = s?;
    }
    Ok(last)
}

/// Which saturated `eta` values to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaBranch {
    /// Mean of the two parity branches.
    #[default]
    Mean,
    /// Branch seen at even Fibonacci index.
    Even,
    /// Branch seen at odd Fibonacci index.
    Odd,
}

impl std::str::FromStr for EtaBranch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(EtaBranch::Mean),
            "even" => Ok(EtaBranch::Even),
            "odd" => Ok(EtaBranch::Odd),
            other => Err(Error::Usage(format!("unknown eta branch '{other}'"))),
        }
    }
}

impl std::fmt::Display for EtaBranch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EtaBranch::Mean => "mean",
            EtaBranch::Even => "even",
            EtaBranch::Odd => "odd",
        })
    }
}

/// Source of the saturated `delta` used by the effective generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSource {
    /// Limit of `delta(F(m)) / F(m)` along the recursion, `1 / (2 G^3)`.
    #[default]
    Recursion,
    /// The tabulated asymptotic value `-1 / G^3`.
    Tabulated,
}

impl std::str::FromStr for DeltaSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "recursion" => Ok(DeltaSource::Recursion),
            "tabulated" => Ok(DeltaSource::Tabulated),
            other => Err(Error::Usage(format!("unknown delta source '{other}'"))),
        }
    }
}

impl std::fmt::Display for DeltaSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DeltaSource::Recursion => "recursion",
            DeltaSource::Tabulated => "tabulated",
        })
    }
}

/// Asymptotic NECs at Fibonacci instants `F(m)`, `m >> 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturatedNecs {
    pub alpha: f64,
    pub beta: f64,
    /// Tabulated asymptote, `-1/G^3`.
    pub delta: f64,
    /// Limit reached by the exact recursion, `1/(2 G^3)`.
    pub delta_recursion: f64,
    pub eta1_even: f64,
    pub eta1_odd: f64,
    pub eta2_even: f64,
    pub eta2_odd: f64,
    pub eta1_mean: f64,
    pub eta2_mean: f64,
}

impl SaturatedNecs {
    pub fn eta1(&self, branch: EtaBranch) -> f64 {
        match branch {
            EtaBranch::Mean => self.eta1_mean,
            EtaBranch::Even => self.eta1_even,
            EtaBranch::Odd => self.eta1_odd,
        }
    }

    pub fn eta2(&self, branch: EtaBranch) -> f64 {
        match branch {
            EtaBranch::Mean => self.eta2_mean,
            EtaBranch::Even => self.eta2_even,
            EtaBranch::Odd => self.eta2_odd,
        }
    }

    pub fn delta_from(&self, source: DeltaSource) -> f64 {
        match source {
            DeltaSource::Recursion => self.delta_recursion,
            DeltaSource::Tabulated => self.delta,
        }
    }

    /// Branch matching Fibonacci index `m`.
    pub fn branch_for(m: u32) -> EtaBranch {
        if m % 2 == 0 {
            EtaBranch::Even
        } else {
            EtaBranch::Odd
        }
    }
}

pub fn saturated_necs() -> SaturatedNecs {
    let g = GOLDEN;
    let eta1 = |s: f64| (g.powi(-4) + s * (2.0 / g + g.powi(-2))) / 12.0;
    let eta2 = |s: f64| (g.powi(-5) - s * (2.0 * g.powi(-2) + g.powi(-3)) + g.powi(-2)) / 12.0;
    SaturatedNecs {
        alpha: 1.0 / g,
        beta: g.powi(-2),
        delta: -g.powi(-3),
        delta_recursion: 0.5 * g.powi(-3),
        eta1_even: eta1(1.0),
        eta1_odd: eta1(-1.0),
        eta2_even: eta2(1.0),
        eta2_odd: eta2(-1.0),
        eta1_mean: g.powi(-4) / 12.0,
        eta2_mean: (g.powi(-5) + g.powi(-2)) / 12.0,
    }
}

/// Asymptotic fourth-order NECs `mu_i(F(m)) / F(m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuAsymptotics {
    pub m: u32,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
}

pub fn mu_normalized(m: u32) -> Result<MuAsymptotics> {
    if m == 0 {
        return Err(Error::Domain("Fibonacci index starts at m = 1".into()));
    }
    let g = GOLDEN;
    let s = if m % 2 == 0 { 1.0 } else { -1.0 };
    let gm = g.powi(m as i32 - 1);
    let pre = s / 120.0;
    Ok(MuAsymptotics {
        m,
        mu1: pre * (gm + (s * (3.0 * g - 4.0) - 1.0 - 3.0 * g) / g),
        mu2: pre * (gm * (2.0 - g) + (s * (4.0 * g - 7.0) - 2.0 - g) / g),
        mu3: pre * (2.0 * gm * (1.0 - g) + (s * (3.0 - g) + 3.0 + 4.0 * g) / g),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelocalizationEstimate {
    pub m_deloc: u32,
    pub n_deloc: u64,
}

/// Smallest Fibonacci index with `tau^2 G^m / 120 >= 1`, and `F(m)`.
pub fn delocalization_time(tau: f64) -> Result<DelocalizationEstimate> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!(
            "the delocalization estimate needs 0 < tau < 1, got {tau}"
        )));
    }
    let reached = |m: u32| tau * tau * GOLDEN.powi(m as i32) / 120.0 >= 1.0;
    let mut m = ((120.0 / (tau * tau)).ln() / GOLDEN.ln()).ceil().max(1.0) as u32;
    while m > 1 && reached(m - 1) {
        m -= 1;
    }
    while !reached(m) {
        m += 1;
    }
    if m > MAX_FIBONACCI_INDEX {
        return Err(Error::Domain(format!(
            "tau = {tau} gives m = {m}, beyond the largest representable F(m)"
        )));
    }
    Ok(DelocalizationEstimate {
        m_deloc: m,
        n_deloc: fibonacci_instant(m)?,
    })
}

/// Rows emitted by the coefficient CSV writer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Stroboscopic,
    Fibonacci,
}

impl std::str::FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stroboscopic" => Ok(Sampling::Stroboscopic),
            "fibonacci" => Ok(Sampling::Fibonacci),
            other => Err(Error::Usage(format!("unknown sampling '{other}'"))),
        }
    }
}

pub const CSV_HEADER: &str = "n,alpha,beta,delta,eta1,eta2,\
alpha_dec,beta_dec,delta_dec,eta1_dec,eta2_dec,\
alpha_nec,beta_nec,delta_nec,eta1_nec,eta2_nec,is_fibonacci_instant";

/// One CSV line (no trailing newline).
pub fn csv_row(c: &CoefficientState) -> Result<String> {
    let necs = c.necs()?;
    let fracs = c.fields().map(|(_, v)| v.to_string());
    let decs = c.to_f64();
    let nec = [necs.alpha, necs.beta, necs.delta, necs.eta1, necs.eta2];
    let mut line = c.n.to_string();
    for f in &fracs {
        line.push(',');
        line.push_str(f);
    }
    for d in decs.iter().chain(&nec) {
        line.push_str(&format!(",{d:.17e}"));
    }
    line.push_str(if fibonacci_index(c.n).is_some() {
        ",1"
    } else {
        ",0"
    });
    Ok(line)
}

/// Writes coefficient rows for `1 <= n <= n_max` (every step, or Fibonacci
/// instants only) along the Fibonacci word.
pub fn write_coefficients_csv<W: Write>(out: &mut W, n_max: u64, at: Sampling) -> Result<u64> {
    if n_max == 0 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    check_steps(n_max)?;
    writeln!(out, "{CSV_HEADER}")?;
    let mut rows = 0;
    for state in RecursionWalk::new().take(n_max as usize) {
        let state = state?;
        if at == Sampling::Stroboscopic || fibonacci_index(state.n).is_some() {
            writeln!(out, "{}", csv_row(&state)?)?;
            rows += 1;
        }
    }
    Ok(rows)
}

/// States at each Fibonacci instant `F(1) ..= F(m_max)`.
pub fn fibonacci_instant_states(m_max: u32) -> Result<Vec<(u32, CoefficientState)>> {
    let n_max = fibonacci_instant(m_max)?;
    check_steps(n_max)?;
    let mut out = Vec::with_capacity(m_max as usize);
    for state in RecursionWalk::new().take(n_max as usize) {
        let state = state?;
        if let Some(m) = fibonacci_index(state.n) {
            out.push((m, state));
        }
    }
    Ok(out)
}

/// Coefficients for an arbitrary sequence spec, first `n` kicks.
pub fn coefficients_for_spec(spec: &KickSequenceSpec, n: u64) -> Result<CoefficientState> {
    check_steps(n)?;
    let mut c = CoefficientState::zero();
    for kick in spec.stream().take(n as usize) {
        c = c.recursion_step(kick?)?;
    }
    Ok(c)
}

/// `|x| / n` for a coefficient, in floating point.
pub fn normalized_abs(v: &BigRational, n: u64) -> f64 {
    to_f64(&(v.abs() / int(n.max(1))))
}
