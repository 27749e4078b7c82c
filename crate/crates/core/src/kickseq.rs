//! Binary kick sequences.
//!
//! Every sequence is indexed from `n = 1` (the first kick). The Fibonacci
//! word is generated from the golden-mean Beatty sequence
//! `gamma(n) = floor((n+1)G) - floor(nG)`, evaluated in exact integer
//! arithmetic: `floor(nG) = floor((n + isqrt(5 n^2)) / 2)`. `gamma = 2` maps to
//! the first amplitude, `gamma = 1` to the second.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Golden mean `(1 + sqrt 5) / 2`.
pub const GOLDEN: f64 = 1.618_033_988_749_895;

/// Largest index for which the integer floor formulas cannot overflow `u128`.
pub const MAX_INDEX: u64 = 1 << 62;

/// Identity of the generator behind [`SequenceKind::Random`], echoed into run
/// manifests.
pub const PRNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9) seeded via seed_from_u64; \
     kick n uses bit 0 of 32-bit output word n-1";

/// Largest Fibonacci index whose instant `F(m)` fits in a `u64`.
pub const MAX_FIBONACCI_INDEX: u32 = 92;

/// Which of the two kick amplitudes is applied at a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kick {
    K1,
    K2,
}

impl Kick {
    pub fn symbol(self) -> char {
        match self {
            Kick::K1 => '1',
            Kick::K2 => '2',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    Fibonacci,
    Biperiodic,
    Random,
    Constant,
}

impl SequenceKind {
    pub fn name(self) -> &'static str {
        match self {
            SequenceKind::Fibonacci => "fibonacci",
            SequenceKind::Biperiodic => "biperiodic",
            SequenceKind::Random => "random",
            SequenceKind::Constant => "constant",
        }
    }
}

impl std::str::FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fibonacci" | "fib" => Ok(SequenceKind::Fibonacci),
            "biperiodic" | "bi-periodic" | "bi" => Ok(SequenceKind::Biperiodic),
            "random" | "rand" => Ok(SequenceKind::Random),
            "constant" | "regular" => Ok(SequenceKind::Constant),
            other => Err(Error::Usage(format!("unknown sequence kind '{other}'"))),
        }
    }
}

/// Rule producing the kick amplitude `K_N` for every step `N >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KickSequenceSpec {
    pub kind: SequenceKind,
    pub k1: f64,
    pub k2: f64,
    /// Only read for [`SequenceKind::Random`].
    #[serde(default)]
    pub seed: u64,
}

impl KickSequenceSpec {
    pub fn new(kind: SequenceKind, k1: f64, k2: f64, seed: u64) -> Result<Self> {
        let spec = Self { kind, k1, k2, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn fibonacci(k1: f64, k2: f64) -> Result<Self> {
        Self::new(SequenceKind::Fibonacci, k1, k2, 0)
    }

    pub fn biperiodic(k1: f64, k2: f64) -> Result<Self> {
        Self::new(SequenceKind::Biperiodic, k1, k2, 0)
    }

    pub fn random(k1: f64, k2: f64, seed: u64) -> Result<Self> {
        Self::new(SequenceKind::Random, k1, k2, seed)
    }

    /// Regular kicked rotor. `k2` is stored equal to `k1`.
    pub fn constant(k: f64) -> Result<Self> {
        Self::new(SequenceKind::Constant, k, k, 0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.k1.is_finite() {
            return Err(Error::Domain(format!("k1 must be finite, got {}", self.k1)));
        }
        if self.kind != SequenceKind::Constant && !self.k2.is_finite() {
            return Err(Error::Domain(format!("k2 must be finite, got {}", self.k2)));
        }
        Ok(())
    }

    pub fn amplitude_of(&self, kick: Kick) -> f64 {
        match (self.kind, kick) {
            (SequenceKind::Constant, _) | (_, Kick::K1) => self.k1,
            (_, Kick::K2) => self.k2,
        }
    }

    /// Label of kick `n` (random access; for the random kind this seeks the
    /// generator, so sequential consumers should prefer [`Self::stream`]).
    pub fn label(&self, n: u64) -> Result<Kick> {
        if n == 0 {
            return Err(Error::Domain("kick index starts at 1".into()));
        }
        match self.kind {
            SequenceKind::Fibonacci => fibonacci_kick(n),
            SequenceKind::Biperiodic => Ok(if n % 2 == 0 { Kick::K1 } else { Kick::K2 }),
            SequenceKind::Constant => Ok(Kick::K1),
            SequenceKind::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_word_pos(u128::from(n - 1));
                Ok(random_label(rng.next_u32()))
            }
        }
    }

    /// Sequential iterator over kick labels starting at `n = 1`.
    pub fn stream(&self) -> KickStream {
        KickStream {
            spec: *self,
            next: 1,
            rng: (self.kind == SequenceKind::Random).then(|| ChaCha8Rng::seed_from_u64(self.seed)),
        }
    }

    /// Hex SHA-256 of the first `count` kick labels (one byte `'1'`/`'2'` each).
    pub fn label_checksum(&self, count: u64) -> Result<String> {
        let mut hasher = Sha256::new();
        let mut buf = Vec::with_capacity(4096);
        for kick in self.stream().take(count as usize) {
            buf.push(kick?.symbol() as u8);
            if buf.len() == buf.capacity() {
                hasher.update(&buf);
                buf.clear();
            }
        }
        hasher.update(&buf);
        Ok(hex::encode(hasher.finalize()))
    }
}

fn random_label(word: u32) -> Kick {
    if word & 1 == 0 {
        Kick::K1
    } else {
        Kick::K2
    }
}

/// Per-trajectory label iterator. Owns its generator.
#[derive(Debug, Clone)]
pub struct KickStream {
    spec: KickSequenceSpec,
    next: u64,
    rng: Option<ChaCha8Rng>,
}

impl Iterator for KickStream {
    type Item = Result<Kick>;

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.next;
        self.next += 1;
        Some(match self.rng.as_mut() {
            Some(rng) => Ok(random_label(rng.next_u32())),
            None => self.spec.label(n),
        })
    }
}

/// `floor(n G)` in exact integer arithmetic.
pub fn golden_floor(n: u64) -> Result<u64> {
    if n > MAX_INDEX {
        return Err(Error::Domain(format!("index {n} exceeds {MAX_INDEX}")));
    }
    let n = u128::from(n);
    // sqrt(5) n is irrational for n > 0, so flooring the root first is exact.
    let root = (5 * n * n).isqrt();
    Ok(((n + root) / 2) as u64)
}

/// `floor(n G / (1 + G)) = floor(n / G)`.
pub fn floor_over_golden(n: u64) -> Result<u64> {
    Ok(golden_floor(n)? - n)
}

/// `floor(n / (1 + G)) = floor(n / G^2)`.
pub fn floor_over_golden_sq(n: u64) -> Result<u64> {
    if n == 0 {
        return Ok(0);
    }
    // n / G^2 = 2n - nG and nG is irrational, so floor(2n - nG) = 2n - floor(nG) - 1.
    Ok(2 * n - golden_floor(n)? - 1)
}

/// Fibonacci generating function, `floor((n+1)G) - floor(nG)`; always 1 or 2.
pub fn gamma(n: u64) -> Result<u8> {
    if n == 0 {
        return Err(Error::Domain("gamma is defined for n >= 1".into()));
    }
    if n >= MAX_INDEX {
        return Err(Error::Domain(format!("index {n} exceeds {}", MAX_INDEX - 1)));
    }
    Ok((golden_floor(n + 1)? - golden_floor(n)?) as u8)
}

pub fn fibonacci_kick(n: u64) -> Result<Kick> {
    Ok(if gamma(n)? == 2 { Kick::K1 } else { Kick::K2 })
}

/// Stroboscopic instant of the `m`-th Fibonacci instant:
/// `F(1) = 1`, `F(2) = 2`, `F(m) = F(m-1) + F(m-2)`.
pub fn fibonacci_instant(m: u32) -> Result<u64> {
    if m == 0 {
        return Err(Error::Domain("Fibonacci instants start at m = 1".into()));
    }
    if m > MAX_FIBONACCI_INDEX {
        return Err(Error::Domain(format!(
            "F({m}) overflows u64 (largest index is {MAX_FIBONACCI_INDEX})"
        )));
    }
    let (mut prev, mut cur) = (1u128, 1u128);
    for _ in 0..m {
        (prev, cur) = (cur, prev + cur);
    }
    Ok(prev as u64)
}

/// Inverse of [`fibonacci_instant`]: `Some(m)` when `n = F(m)`.
pub fn fibonacci_index(n: u64) -> Option<u32> {
    let n = u128::from(n);
    let (mut prev, mut cur, mut m) = (1u128, 2u128, 1u32);
    while prev < n {
        (prev, cur) = (cur, prev + cur);
        m += 1;
    }
    (prev == n).then_some(m)
}

/// All Fibonacci instants `F(m) <= n_max`, ascending.
pub fn fibonacci_instants_upto(n_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let (mut prev, mut cur) = (1u64, 2u64);
    while prev <= n_max {
        out.push(prev);
        match prev.checked_add(cur) {
            Some(next) => (prev, cur) = (cur, next),
            None => break,
        }
    }
    out
}

/// Word `S_m` built by substitution, `S_1 = K1`, `S_2 = K1 K2`,
/// `S_m = S_{m-1} S_{m-2}`.
pub fn substitution_word(m: u32) -> Result<Vec<Kick>> {
    if m == 0 {
        return Err(Error::Domain("words are indexed from m = 1".into()));
    }
    let len = fibonacci_instant(m)?;
    if len > (1 << 32) {
        return Err(Error::Resource(format!("word S_{m} has {len} letters")));
    }
    let mut older = vec![Kick::K1];
    let mut newer = vec![Kick::K1, Kick::K2];
    if m == 1 {
        return Ok(older);
    }
    for _ in 2..m {
        let mut next = newer.clone();
        next.extend_from_slice(&older);
        older = std::mem::replace(&mut newer, next);
    }
    Ok(newer)
}

/// `K_n` for the given rule.
pub fn kick_amplitude(n: u64, spec: &KickSequenceSpec) -> Result<f64> {
    Ok(spec.amplitude_of(spec.label(n)?))
}

/// First `F(m)` amplitudes of a Fibonacci sequence.
pub fn sequence_prefix(m: u32, spec: &KickSequenceSpec) -> Result<Vec<f64>> {
    if spec.kind != SequenceKind::Fibonacci {
        return Err(Error::Usage(format!(
            "sequence_prefix needs a fibonacci sequence, got {}",
            spec.kind.name()
        )));
    }
    let len = fibonacci_instant(m)?;
    (1..=len).map(|n| kick_amplitude(n, spec)).collect()
}
