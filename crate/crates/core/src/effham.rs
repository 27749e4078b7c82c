//! Per-step generators, effective generators built from BCH coefficients, and
//! spectral diagnostics of the effective Fibonacci Hamiltonian.

use faer::{Mat, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bchcoeff::{saturated_necs, CoefficientState, DeltaSource, EtaBranch};
use crate::error::{Error, Result};
use crate::evolve::SplitStepPropagator;
use crate::hilbert::{
    build_cos_theta, build_l_squared, build_sin_sq, build_sym_lsin, kick_matrix_bessel, BasisWindow,
    OperatorMatrix, RotorState, Symmetry, C64,
};
use crate::kickseq::{fibonacci_instant, Kick, KickSequenceSpec};

/// Tolerance of the Hermitian / anti-Hermitian tags, relative to the largest entry.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Relative reconstruction residual accepted from [`diagonalize`].
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

/// `|V|^2` range used for the exponential tail fit.
pub const TAIL_FIT_RANGE: (f64, f64) = (1e-12, 1e-2);

/// Fewest points accepted by the tail fit.
pub const TAIL_FIT_MIN_POINTS: usize = 10;

/// Coefficient of `sin^2 theta` inside the `tau / 2` bracket of `L`.
///
/// The second-order BCH term `[B, [B, A]] / 12` gives `K^2 / 6`; the `K^2 / 12`
/// variant is kept so the residual test can tell the two apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinSqCoefficient {
    #[default]
    Sixth,
    Twelfth,
}

impl SinSqCoefficient {
    fn divisor(self) -> f64 {
        match self {
            SinSqCoefficient::Sixth => 6.0,
            SinSqCoefficient::Twelfth => 12.0,
        }
    }
}

/// `L = K cos(theta) + (tau/2) [ l^2 + (K/2)(l sin(theta) + sin(theta) l) + (K^2/6) sin^2(theta) ]`,
/// so that one step is `exp(-i L) + O(tau^2)`.
pub fn build_l(k: f64, tau: f64, window: BasisWindow) -> Result<OperatorMatrix> {
    build_l_with(k, tau, window, SinSqCoefficient::Sixth)
}

pub fn build_l_with(
    k: f64,
    tau: f64,
    window: BasisWindow,
    sin_sq: SinSqCoefficient,
) -> Result<OperatorMatrix> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("tau must be finite and >= 0, got {tau}")));
    }
    if !k.is_finite() {
        return Err(Error::Domain(format!("kick strength must be finite, got {k}")));
    }
    let cos = build_cos_theta(window);
    let l2 = build_l_squared(window);
    let lsin = build_sym_lsin(window);
    let sin2 = build_sin_sq(window);
    let h = tau / 2.0;
    let re = |x: f64| C64::new(x, 0.0);
    OperatorMatrix::linear_combination(
        &[
            (re(k), &cos),
            (re(h), &l2),
            (re(h * k / 2.0), &lsin),
            (re(h * k * k / sin_sq.divisor()), &sin2),
        ],
        Symmetry::Hermitian,
    )
}

/// Where the coefficients of an [`EffectiveGenerator`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    PerStep {
        kick: Kick,
    },
    WordAccumulated {
        n: u64,
    },
    FibonacciSaturated {
        eta_branch: EtaBranch,
        delta_source: DeltaSource,
    },
    Explicit,
}

/// Floating-point coefficients multiplying `A1`, `A2`, `[A2, A1]`,
/// `[A1, [A1, A2]]`, `[A2, [A2, A1]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl From<&CoefficientState> for GeneratorCoefficients {
    fn from(c: &CoefficientState) -> Self {
        let [alpha, beta, delta, eta1, eta2] = c.to_f64();
        Self {
            alpha,
            beta,
            delta,
            eta1,
            eta2,
        }
    }
}

impl GeneratorCoefficients {
    /// Saturated NECs at Fibonacci instants.
    pub fn saturated(eta_branch: EtaBranch, delta_source: DeltaSource) -> Self {
        let s = saturated_necs();
        Self {
            alpha: s.alpha,
            beta: s.beta,
            delta: s.delta_from(delta_source),
            eta1: s.eta1(eta_branch),
            eta2: s.eta2(eta_branch),
        }
    }
}

/// Anti-Hermitian generator `G` with `U ~ exp(G)`.
#[derive(Debug, Clone)]
pub struct EffectiveGenerator {
    pub matrix: OperatorMatrix,
    pub coefficients: GeneratorCoefficients,
    pub provenance: Provenance,
}

impl EffectiveGenerator {
    pub fn window(&self) -> BasisWindow {
        self.matrix.window()
    }

    /// `H = i G`, Hermitian.
    pub fn hamiltonian(&self) -> Result<OperatorMatrix> {
        let h = self.matrix.scaled(C64::new(0.0, 1.0), Symmetry::Hermitian);
        h.check_symmetry(SYMMETRY_TOL)?;
        Ok(h)
    }

    /// `exp(G)` through the spectral decomposition of `i G`.
    pub fn exponential(&self) -> Result<OperatorMatrix> {
        diagonalize(&self.hamiltonian()?)?.propagator(1.0)
    }
}

/// `G = alpha A1 + beta A2 + delta [A2, A1] + eta1 [A1, [A1, A2]] + eta2 [A2, [A2, A1]]`
/// with `A_j = -i L_j`.
pub fn accumulate_generator(
    c: &CoefficientState,
    l1: &OperatorMatrix,
    l2: &OperatorMatrix,
) -> Result<EffectiveGenerator> {
    generator_from_coefficients(
        GeneratorCoefficients::from(c),
        l1,
        l2,
        Provenance::WordAccumulated { n: c.n },
    )
}

pub fn generator_from_coefficients(
    coeffs: GeneratorCoefficients,
    l1: &OperatorMatrix,
    l2: &OperatorMatrix,
    provenance: Provenance,
) -> Result<EffectiveGenerator> {
    if l1.window() != l2.window() {
        return Err(Error::WindowMismatch(format!(
            "L1 on {:?}, L2 on {:?}",
            l1.window(),
            l2.window()
        )));
    }
    let minus_i = C64::new(0.0, -1.0);
    let a1 = l1.scaled(minus_i, Symmetry::AntiHermitian);
    let a2 = l2.scaled(minus_i, Symmetry::AntiHermitian);
    let re = |x: f64| C64::new(x, 0.0);
    let mut terms: Vec<(C64, OperatorMatrix)> =
        vec![(re(coeffs.alpha), a1.clone()), (re(coeffs.beta), a2.clone())];
    let needs_commutators = coeffs.delta != 0.0 || coeffs.eta1 != 0.0 || coeffs.eta2 != 0.0;
    if needs_commutators {
        let c21 = a2.commutator(&a1)?;
        let c12 = c21.scaled(re(-1.0), Symmetry::AntiHermitian);
        if coeffs.eta1 != 0.0 {
            terms.push((re(coeffs.eta1), a1.commutator(&c12)?));
        }
        if coeffs.eta2 != 0.0 {
            terms.push((re(coeffs.eta2), a2.commutator(&c21)?));
        }
        terms.push((re(coeffs.delta), c21));
    }
    let refs: Vec<(C64, &OperatorMatrix)> = terms.iter().map(|(c, m)| (*c, m)).collect();
    let combined = OperatorMatrix::linear_combination(&refs, Symmetry::AntiHermitian)?;
    combined.check_symmetry(SYMMETRY_TOL)?;
    // Drop the round-off Hermitian part so that i G is exactly Hermitian.
    let matrix = project(&combined, Symmetry::AntiHermitian)?;
    Ok(EffectiveGenerator {
        matrix,
        coefficients: coeffs,
        provenance,
    })
}

/// `(M - M^+)/2` or `(M + M^+)/2`.
fn project(m: &OperatorMatrix, symmetry: Symmetry) -> Result<OperatorMatrix> {
    let sign = match symmetry {
        Symmetry::Hermitian => 1.0,
        Symmetry::AntiHermitian => -1.0,
        _ => return Err(Error::Usage("projection needs a (anti-)Hermitian target".into())),
    };
    let e = m.entries();
    let n = m.dim();
    let out = Mat::from_fn(n, n, |i, j| (e[(i, j)] + e[(j, i)].conj() * sign) * 0.5);
    OperatorMatrix::from_parts(m.window(), out, symmetry)
}

/// Eigen-decomposition of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub window: BasisWindow,
    /// Eigenvalues of `H`, ascending.
    pub energies: Vec<f64>,
    /// Eigenphases of `exp(-i H)`, wrapped into `(-pi, pi]`.
    pub eigenphases: Vec<f64>,
    /// Columns are the eigenvectors, rows indexed by momentum.
    pub vectors: Mat<C64>,
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

pub fn diagonalize(h: &OperatorMatrix) -> Result<SpectralData> {
    if h.symmetry() != Symmetry::Hermitian {
        return Err(Error::Usage(format!(
            "diagonalize needs a Hermitian-tagged operator, got {:?}",
            h.symmetry()
        )));
    }
    h.check_symmetry(SYMMETRY_TOL)?;
    let evd = h.entries().self_adjoint_eigen(Side::Lower).map_err(|e| {
        Error::Numeric(format!(
            "eigensolver failed ({e:?}) on a {}x{} matrix with max entry {:.3e}",
            h.dim(),
            h.dim(),
            h.max_abs()
        ))
    })?;
    let s = evd.S().column_vector();
    let energies: Vec<f64> = (0..h.dim()).map(|i| s[i].re).collect();
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    let data = SpectralData {
        window: h.window(),
        eigenphases: energies.iter().map(|&e| wrap_phase(-e)).collect(),
        energies,
        vectors: evd.U().to_owned(),
    };
    let residual = data.reconstruction_residual(h)?;
    let scale = h.max_abs().max(f64::MIN_POSITIVE);
    if residual > RECONSTRUCTION_TOL * scale {
        return Err(Error::Numeric(format!(
            "reconstruction residual {residual:.3e} exceeds {:.1e} x max|H| = {:.3e}",
            RECONSTRUCTION_TOL,
            RECONSTRUCTION_TOL * scale
        )));
    }
    Ok(data)
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `max |H - V diag(E) V^+|`.
    pub fn reconstruction_residual(&self, h: &OperatorMatrix) -> Result<f64> {
        if h.window() != self.window {
            return Err(Error::WindowMismatch(
                "spectrum and operator windows differ".into(),
            ));
        }
        let n = self.dim();
        let scaled = Mat::from_fn(n, n, |i, j| self.vectors[(i, j)] * self.energies[j]);
        let rebuilt = &scaled * self.vectors.adjoint();
        let e = h.entries();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max((rebuilt[(i, j)] - e[(i, j)]).norm());
            }
        }
        Ok(worst)
    }

    /// `max |V^+ V - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let prod = self.vectors.adjoint() * &self.vectors;
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> Result<OperatorMatrix> {
        let n = self.dim();
        let phases: Vec<C64> = self
            .energies
            .iter()
            .map(|&e| C64::from_polar(1.0, -e * t))
            .collect();
        let scaled = Mat::from_fn(n, n, |i, j| self.vectors[(i, j)] * phases[j]);
        OperatorMatrix::from_parts(self.window, &scaled * self.vectors.adjoint(), Symmetry::Unitary)
    }

    /// Components `<phi_m|psi>`.
    pub fn project(&self, state: &RotorState) -> Result<Vec<C64>> {
        if state.window() != self.window {
            return Err(Error::WindowMismatch("state and spectrum windows differ".into()));
        }
        let n = self.dim();
        let psi = state.amplitudes();
        Ok((0..n)
            .into_par_iter()
            .map(|m| (0..n).map(|l| self.vectors[(l, m)].conj() * psi[l]).sum())
            .collect())
    }

    /// `exp(-i H t) psi` without forming the propagator.
    pub fn evolve(&self, state: &RotorState, t: f64) -> Result<RotorState> {
        let coeffs = self.project(state)?;
        self.synthesize(&coeffs, t)
    }

    /// `sum_m c_m exp(-i E_m t) |phi_m>`.
    pub fn synthesize(&self, coeffs: &[C64], t: f64) -> Result<RotorState> {
        let n = self.dim();
        let weighted: Vec<C64> = coeffs
            .iter()
            .zip(&self.energies)
            .map(|(c, &e)| c * C64::from_polar(1.0, -e * t))
            .collect();
        let amps = (0..n)
            .into_par_iter()
            .map(|l| (0..n).map(|m| self.vectors[(l, m)] * weighted[m]).sum())
            .collect();
        RotorState::from_amplitudes(self.window, amps)
    }
}

/// The effective Fibonacci propagator and its generator.
#[derive(Debug, Clone)]
pub struct FibonacciPropagator {
    /// `U_fi = exp(-i H_fi)`.
    pub u_fi: OperatorMatrix,
    pub h_fi: OperatorMatrix,
    pub spectrum: SpectralData,
    pub coefficients: GeneratorCoefficients,
    pub options: FibonacciOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FibonacciOptions {
    pub eta_branch: EtaBranch,
    pub delta_source: DeltaSource,
    pub sin_sq: SinSqCoefficient,
}

/// `H_fi = i G_fi` from the saturated NECs, and `U_fi = exp(-i H_fi)`.
pub fn fibonacci_propagator(
    k1: f64,
    k2: f64,
    tau: f64,
    window: BasisWindow,
    options: FibonacciOptions,
) -> Result<FibonacciPropagator> {
    let l1 = build_l_with(k1, tau, window, options.sin_sq)?;
    let l2 = build_l_with(k2, tau, window, options.sin_sq)?;
    let coefficients = GeneratorCoefficients::saturated(options.eta_branch, options.delta_source);
    let g = generator_from_coefficients(
        coefficients,
        &l1,
        &l2,
        Provenance::FibonacciSaturated {
            eta_branch: options.eta_branch,
            delta_source: options.delta_source,
        },
    )?;
    let h_fi = g.hamiltonian()?;
    let spectrum = diagonalize(&h_fi)?;
    let u_fi = spectrum.propagator(1.0)?;
    Ok(FibonacciPropagator {
        u_fi,
        h_fi,
        spectrum,
        coefficients,
        options,
    })
}

impl FibonacciPropagator {
    /// `U_fi^n psi`.
    pub fn power_apply(&self, state: &RotorState, n: u64) -> Result<RotorState> {
        self.spectrum.evolve(state, n as f64)
    }
}

/// `||U_fi^{F(m)} psi - U(F(m), 0) psi||` for the Fibonacci sequence.
pub fn fibonacci_instant_residual(
    prop: &FibonacciPropagator,
    k1: f64,
    k2: f64,
    tau: f64,
    m: u32,
    psi: &RotorState,
) -> Result<f64> {
    let n = fibonacci_instant(m)?;
    let effective = prop.power_apply(psi, n)?;
    let spec = KickSequenceSpec::fibonacci(k1, k2)?;
    let mut exact = psi.clone();
    let mut stepper = SplitStepPropagator::new(psi.window(), tau)?;
    for kick in spec.stream().take(n as usize) {
        stepper.step(&mut exact, spec.amplitude_of(kick?))?;
    }
    effective.distance(&exact)
}

/// `Sum_{l,m} l^2 |V_{l0,m}|^2 |V_{l,m}|^2`: the dephased long-time `<l^2>` from `|l0>`.
pub fn plateau_estimate(spec: &SpectralData, l0: i64) -> Result<f64> {
    let row = spec.window.index_of(l0)?;
    let weights: Vec<f64> = (0..spec.dim())
        .map(|m| spec.vectors[(row, m)].norm_sqr())
        .collect();
    Ok(diagonal_ensemble(spec, &weights))
}

/// Dephased long-time `<l^2>` for an arbitrary initial state.
pub fn plateau_estimate_state(spec: &SpectralData, state: &RotorState) -> Result<f64> {
    let weights: Vec<f64> = spec.project(state)?.iter().map(|c| c.norm_sqr()).collect();
    Ok(diagonal_ensemble(spec, &weights))
}

fn diagonal_ensemble(spec: &SpectralData, weights: &[f64]) -> f64 {
    let n = spec.dim();
    let l_min = spec.window.l_min();
    let per_vector: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|m| {
            (0..n)
                .map(|i| {
                    let l = (l_min + i as i64) as f64;
                    l * l * spec.vectors[(i, m)].norm_sqr()
                })
                .sum::<f64>()
        })
        .collect();
    weights.iter().zip(&per_vector).map(|(w, e)| w * e).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenvectorMetrics {
    pub index: usize,
    pub energy: f64,
    pub eigenphase: f64,
    pub peak_l: i64,
    pub ipr: f64,
    /// Slope of `ln |V|^2` against `|l - peak|`; absent when too few points fall
    /// in the fit range.
    pub tail_slope: Option<f64>,
}

pub fn localization_profile(spec: &SpectralData) -> Vec<EigenvectorMetrics> {
    let n = spec.dim();
    let l_min = spec.window.l_min();
    (0..n)
        .into_par_iter()
        .map(|m| {
            let probs: Vec<f64> = (0..n).map(|i| spec.vectors[(i, m)].norm_sqr()).collect();
            let (peak, _) =
                probs.iter().enumerate().fold(
                    (0, f64::NEG_INFINITY),
                    |best, (i, &p)| if p > best.1 { (i, p) } else { best },
                );
            let ipr = probs.iter().map(|p| p * p).sum();
            let (xs, ys): (Vec<f64>, Vec<f64>) = probs
                .iter()
                .enumerate()
                .filter(|(_, &p)| p >= TAIL_FIT_RANGE.0 && p <= TAIL_FIT_RANGE.1)
                .map(|(i, &p)| (i.abs_diff(peak) as f64, p.ln()))
                .unzip();
            let tail_slope = (xs.len() >= TAIL_FIT_MIN_POINTS)
                .then(|| least_squares_slope(&xs, &ys))
                .flatten();
            EigenvectorMetrics {
                index: m,
                energy: spec.energies[m],
                eigenphase: spec.eigenphases[m],
                peak_l: l_min + peak as i64,
                ipr,
                tail_slope,
            }
        })
        .collect()
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Order-of-magnitude scales of the periodic rotor: localization length
/// `l_s = K^2 tau^2` and break time `N* = l_s` (constants set to 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QkrScales {
    pub localization_length: f64,
    pub heisenberg_time: f64,
}

pub fn regular_qkr_scales(k: f64, tau: f64) -> Result<QkrScales> {
    if !(k > 0.0 && tau > 0.0 && k.is_finite() && tau.is_finite()) {
        return Err(Error::Domain(format!(
            "need K, tau > 0, got K = {k}, tau = {tau}"
        )));
    }
    let ls = (k * tau).powi(2);
    Ok(QkrScales {
        localization_length: ls,
        heisenberg_time: ls,
    })
}

/// Residual `|| exp(-i L) psi - exp(A) exp(B) psi ||` for one step, where
/// `A = -i l^2 tau / 2` is diagonal and `exp(B) = exp(-i K cos theta)` comes
/// from the Bessel expansion.
pub fn single_step_residual(k: f64, tau: f64, psi: &RotorState, sin_sq: SinSqCoefficient) -> Result<f64> {
    let window = psi.window();
    let l = build_l_with(k, tau, window, sin_sq)?;
    let effective = diagonalize(&l)?.evolve(psi, 1.0)?;
    let kicked = kick_matrix_bessel(window, k)?.apply_state(psi)?;
    let amps = kicked
        .amplitudes()
        .iter()
        .zip(window.momenta())
        .map(|(a, l)| a * C64::from_polar(1.0, -((l * l) as f64) * tau / 2.0))
        .collect();
    let exact = RotorState::from_amplitudes(window, amps)?;
    effective.distance(&exact)
}

/// Log-log slope of [`single_step_residual`] against `tau`.
pub fn residual_scaling(
    k: f64,
    taus: &[f64],
    psi: &RotorState,
    sin_sq: SinSqCoefficient,
) -> Result<(Vec<f64>, f64)> {
    if taus.len() < 2 {
        return Err(Error::Fit("need at least two tau values".into()));
    }
    let residuals = taus
        .iter()
        .map(|&t| single_step_residual(k, t, psi, sin_sq))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let slope = least_squares_slope(&xs, &ys).ok_or_else(|| Error::Fit("degenerate tau set".into()))?;
    Ok((residuals, slope))
}

/// JSON summary of a spectral run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub k1: f64,
    pub k2: f64,
    pub tau: f64,
    pub window: BasisWindow,
    pub options: FibonacciOptions,
    pub coefficients: GeneratorCoefficients,
    pub l0: i64,
    pub plateau_estimate: f64,
    pub median_ipr: f64,
    pub eigenphases: Vec<f64>,
    pub eigenvectors: Vec<EigenvectorMetrics>,
}

impl SpectralSummary {
    pub fn new(k1: f64, k2: f64, tau: f64, l0: i64, prop: &FibonacciPropagator) -> Result<Self> {
        let eigenvectors = localization_profile(&prop.spectrum);
        let mut iprs: Vec<f64> = eigenvectors.iter().map(|m| m.ipr).collect();
        iprs.sort_by(f64::total_cmp);
        let median_ipr = median_sorted(&iprs);
        Ok(Self {
            k1,
            k2,
            tau,
            window: prop.spectrum.window,
            options: prop.options,
            coefficients: prop.coefficients,
            l0,
            plateau_estimate: plateau_estimate(&prop.spectrum, l0)?,
            median_ipr,
            eigenphases: prop.spectrum.eigenphases.clone(),
            eigenvectors,
        })
    }
}

pub(crate) fn median_sorted(v: &[f64]) -> f64 {
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bchcoeff::coefficients_along;
    use crate::evolve::propagate_sequence;
    use crate::hilbert::identity;

    fn window(r: usize) -> BasisWindow {
        BasisWindow::new(0, r).unwrap()
    }

    #[test]
    fn l_at_zero_tau_is_the_kick_potential() {
        let w = window(64);
        let l = build_l(7.5, 0.0, w).unwrap();
        let cos = build_cos_theta(w);
        for i in 0..64 {
            for j in 0..64 {
                assert_eq!(l.get(i, j), cos.get(i, j) * 7.5);
            }
        }
        let l = build_l(10.0, 0.3, w).unwrap();
        assert!(l.symmetry_defect() <= 1e-12 * l.max_abs());
    }

    #[test]
    fn residual_scaling_selects_the_sixth() {
        let w = window(256);
        let psi = RotorState::gaussian(w, 0).unwrap();
        let taus = [0.04, 0.02, 0.01];
        let (_, good) = residual_scaling(10.0, &taus, &psi, SinSqCoefficient::Sixth).unwrap();
        let (_, bad) = residual_scaling(10.0, &taus, &psi, SinSqCoefficient::Twelfth).unwrap();
        assert!((good - 2.0).abs() <= 0.3, "slope {good}");
        assert!(bad <= 1.3, "slope {bad}");
    }

    #[test]
    fn single_kick_generator() {
        let w = window(128);
        let l1 = build_l(10.0, 0.01, w).unwrap();
        let l2 = build_l(12.0, 0.01, w).unwrap();
        let g = accumulate_generator(&coefficients_along(&[Kick::K1]).unwrap(), &l1, &l2).unwrap();
        let want = l1.scaled(C64::new(0.0, -1.0), Symmetry::AntiHermitian);
        for i in 0..128 {
            for j in 0..128 {
                assert!((g.matrix.get(i, j) - want.get(i, j)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn hermitian_bookkeeping_for_word_prefixes() {
        let w = window(128);
        let l1 = build_l(10.0, 0.05, w).unwrap();
        let l2 = build_l(12.0, 0.05, w).unwrap();
        let word = crate::kickseq::substitution_word(9).unwrap();
        for n in [2, 3, 5, 8, 13, 34, word.len()] {
            let g = accumulate_generator(&coefficients_along(&word[..n]).unwrap(), &l1, &l2).unwrap();
            let h = g.hamiltonian().unwrap();
            assert!(h.symmetry_defect() <= SYMMETRY_TOL * h.max_abs());
        }
    }

    #[test]
    fn three_step_generator_error_shrinks_like_tau_squared() {
        use Kick::{K1, K2};
        let w = window(256);
        let psi = RotorState::gaussian(w, 0).unwrap();
        let spec = KickSequenceSpec::fibonacci(10.0, 12.0).unwrap();
        let c = coefficients_along(&[K1, K2, K1]).unwrap();
        assert_eq!(c.delta, num_rational::BigRational::from_integer(0.into()));
        let mut errs = Vec::new();
        for tau in [0.02, 0.01, 0.005] {
            let l1 = build_l(10.0, tau, w).unwrap();
            let l2 = build_l(12.0, tau, w).unwrap();
            let g = accumulate_generator(&c, &l1, &l2).unwrap();
            let eff = diagonalize(&g.hamiltonian().unwrap())
                .unwrap()
                .evolve(&psi, 1.0)
                .unwrap();
            let exact = propagate_sequence(&psi, &spec, tau, 3).unwrap();
            errs.push(eff.distance(&exact).unwrap());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        // second order in tau: halving tau divides the error by about four
        assert!(errs[1] / errs[2] > 3.0 && errs[1] / errs[2] < 5.0, "{errs:?}");
    }

    #[test]
    fn equal_kicks_collapse_to_l() {
        let w = window(128);
        let p = fibonacci_propagator(11.0, 11.0, 0.02, w, FibonacciOptions::default()).unwrap();
        let l = build_l(11.0, 0.02, w).unwrap();
        for i in 0..128 {
            for j in 0..128 {
                assert!((p.h_fi.get(i, j) - l.get(i, j)).norm() < 1e-10);
            }
        }
        assert!(p.u_fi.symmetry_defect() < 1e-8);
    }

    #[test]
    fn diagonalize_diagonal_input() {
        let w = window(16);
        // l^2 + l/10 is diagonal with a non-degenerate spectrum
        let h = OperatorMatrix::linear_combination(
            &[
                (C64::new(1.0, 0.0), &build_l_squared(w)),
                (C64::new(0.1, 0.0), &build_sym_l(w)),
            ],
            Symmetry::Hermitian,
        )
        .unwrap();
        let s = diagonalize(&h).unwrap();
        for m in 0..16 {
            let col: Vec<f64> = (0..16).map(|i| s.vectors[(i, m)].norm_sqr()).collect();
            assert!(col.iter().filter(|&&p| (p - 1.0).abs() < 1e-12).count() == 1);
            let norm: f64 = col.iter().sum();
            assert!((norm - 1.0).abs() < 1e-10);
        }
        assert!(s.orthonormality_defect() < 1e-10);
    }

    fn build_sym_l(w: BasisWindow) -> OperatorMatrix {
        let n = w.size;
        let m = Mat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(w.l_at(i) as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        OperatorMatrix::from_parts(w, m, Symmetry::Hermitian).unwrap()
    }

    #[test]
    fn diagonalize_rejects_untagged() {
        let w = window(8);
        let m = identity(w).matmul(&identity(w)).unwrap();
        assert!(matches!(diagonalize(&m), Err(Error::Usage(_))));
    }

    #[test]
    fn plateau_of_identity_vectors_is_l0_squared() {
        let w = window(32);
        let spec = SpectralData {
            window: w,
            energies: (0..32).map(f64::from).collect(),
            eigenphases: vec![0.0; 32],
            vectors: Mat::identity(32, 32),
        };
        assert_eq!(plateau_estimate(&spec, 5).unwrap(), 25.0);
        assert_eq!(plateau_estimate(&spec, -7).unwrap(), 49.0);
        let profile = localization_profile(&spec);
        assert!(profile.iter().all(|m| m.ipr == 1.0 && m.tail_slope.is_none()));
    }

    #[test]
    fn uniform_vector_ipr() {
        let w = window(64);
        let mut v = Mat::<C64>::zeros(64, 64);
        for i in 0..64 {
            v[(i, 0)] = C64::new(1.0 / 8.0, 0.0);
        }
        let spec = SpectralData {
            window: w,
            energies: vec![0.0; 64],
            eigenphases: vec![0.0; 64],
            vectors: v,
        };
        assert!((localization_profile(&spec)[0].ipr - 1.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn plateau_matches_dephased_average_of_exact_powers() {
        let w = window(512);
        let p = fibonacci_propagator(10.0, 12.0, 0.01, w, FibonacciOptions::default()).unwrap();
        let predicted = plateau_estimate(&p.spectrum, 0).unwrap();
        let psi = RotorState::momentum_eigenstate(w, 0).unwrap();
        let coeffs = p.spectrum.project(&psi).unwrap();
        let ns: Vec<u64> = (0..60).map(|i| 1000 + i * 150).collect();
        let mean = ns
            .iter()
            .map(|&n| {
                p.spectrum
                    .synthesize(&coeffs, n as f64)
                    .unwrap()
                    .kinetic_energy()
                    .unwrap()
            })
            .sum::<f64>()
            / ns.len() as f64;
        assert!(
            (mean / predicted - 1.0).abs() <= 0.1,
            "mean {mean}, predicted {predicted}"
        );
        // column relabeling does not change the estimate
        let n = w.size;
        let perm = Mat::from_fn(n, n, |i, j| p.spectrum.vectors[(i, n - 1 - j)]);
        let shuffled = SpectralData {
            vectors: perm,
            ..p.spectrum.clone()
        };
        assert!((plateau_estimate(&shuffled, 0).unwrap() - predicted).abs() < 1e-9 * predicted);
    }

    #[test]
    fn eigenphase_count_and_range() {
        let w = window(128);
        let p = fibonacci_propagator(10.0, 12.0, 0.05, w, FibonacciOptions::default()).unwrap();
        let phases = &p.spectrum.eigenphases;
        assert_eq!(phases.len(), 128);
        assert!(phases
            .iter()
            .all(|&x| x > -std::f64::consts::PI && x <= std::f64::consts::PI));
        assert_eq!(wrap_phase(std::f64::consts::PI), std::f64::consts::PI);
        assert_eq!(wrap_phase(-std::f64::consts::PI), std::f64::consts::PI);
    }

    #[test]
    fn qkr_scales() {
        let s = regular_qkr_scales(15.0, 1.0).unwrap();
        assert_eq!(s.localization_length, 225.0);
        assert_eq!(regular_qkr_scales(30.0, 1.0).unwrap().localization_length, 900.0);
        assert_eq!(regular_qkr_scales(30.0, 0.5).unwrap(), s);
        assert!(regular_qkr_scales(0.0, 1.0).is_err());
    }
}
