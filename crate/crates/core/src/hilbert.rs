//! Truncated angular-momentum basis, rotor states and dense operators.
//!
//! Basis convention: `psi(theta) = sum_l c_l exp(i l theta) / sqrt(2 pi)`, so
//! `exp(i theta)` raises `l` by one and
//! `<l'|sin theta|l> = (delta_{l', l+1} - delta_{l', l-1}) / (2i)`.

use faer::{Col, Mat};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::bessel_j_orders;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Tolerance for the norm check in [`RotorState::kinetic_energy`].
pub const NORM_INTEGRITY_TOL: f64 = 1e-6;

/// Fraction of the window (split evenly between both ends) watched by the
/// edge-leakage guard.
pub const EDGE_FRACTION: f64 = 0.05;

/// Probability allowed on the watched edge before a run is aborted.
pub const EDGE_LEAKAGE_LIMIT: f64 = 1e-8;

/// Momentum window `l in [center - R/2, center + R/2 - 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisWindow {
    pub center: i64,
    pub size: usize,
}

impl BasisWindow {
    pub fn new(center: i64, size: usize) -> Result<Self> {
        if size == 0 || size % 2 != 0 {
            return Err(Error::Domain(format!(
                "basis size must be even and positive, got {size}"
            )));
        }
        Ok(Self { center, size })
    }

    pub fn l_min(&self) -> i64 {
        self.center - (self.size / 2) as i64
    }

    pub fn l_max(&self) -> i64 {
        self.center + (self.size / 2) as i64 - 1
    }

    pub fn l_at(&self, index: usize) -> i64 {
        self.l_min() + index as i64
    }

    pub fn contains(&self, l: i64) -> bool {
        (self.l_min()..=self.l_max()).contains(&l)
    }

    pub fn index_of(&self, l: i64) -> Result<usize> {
        if !self.contains(l) {
            return Err(Error::Domain(format!(
                "l = {l} outside window [{}, {}]",
                self.l_min(),
                self.l_max()
            )));
        }
        Ok((l - self.l_min()) as usize)
    }

    pub fn momenta(&self) -> impl Iterator<Item = i64> + '_ {
        self.l_min()..=self.l_max()
    }

    /// Number of states watched at each end by the leakage guard.
    pub fn edge_width(&self) -> usize {
        ((self.size as f64 * EDGE_FRACTION / 2.0).ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    Hermitian,
    AntiHermitian,
    Unitary,
    None,
}

/// Dense complex operator on a [`BasisWindow`], tagged with its symmetry.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    window: BasisWindow,
    entries: Mat<C64>,
    symmetry: Symmetry,
}

impl OperatorMatrix {
    /// Wraps `entries` and verifies the tag to `tol` (relative to the largest entry
    /// for Hermitian/anti-Hermitian, absolute for unitary).
    pub fn new(window: BasisWindow, entries: Mat<C64>, symmetry: Symmetry, tol: f64) -> Result<Self> {
        let op = Self::from_parts(window, entries, symmetry)?;
        op.check_symmetry(tol)?;
        Ok(op)
    }

    /// Wraps `entries` without checking the symmetry tag.
    pub fn from_parts(window: BasisWindow, entries: Mat<C64>, symmetry: Symmetry) -> Result<Self> {
        if entries.nrows() != window.size || entries.ncols() != window.size {
            return Err(Error::WindowMismatch(format!(
                "{}x{} matrix on a window of size {}",
                entries.nrows(),
                entries.ncols(),
                window.size
            )));
        }
        Ok(Self {
            window,
            entries,
            symmetry,
        })
    }

    pub fn window(&self) -> BasisWindow {
        self.window
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn entries(&self) -> &Mat<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> Mat<C64> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.window.size
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[(row, col)]
    }

    /// Matrix element `<l'|M|l>`.
    pub fn element(&self, l_row: i64, l_col: i64) -> Result<C64> {
        Ok(self.get(self.window.index_of(l_row)?, self.window.index_of(l_col)?))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.entries)
    }

    /// Deviation measured by the symmetry tag: `max|M - M^+|`, `max|M + M^+|`,
    /// or `max|M^+ M - I|`; zero for [`Symmetry::None`].
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim();
        match self.symmetry {
            Symmetry::Hermitian | Symmetry::AntiHermitian => {
                let sign = if self.symmetry == Symmetry::Hermitian {
                    -1.0
                } else {
                    1.0
                };
                let mut worst = 0.0f64;
                for j in 0..n {
                    for i in 0..=j {
                        let d = self.entries[(i, j)] + self.entries[(j, i)].conj() * sign;
                        worst = worst.max(d.norm());
                    }
                }
                worst
            }
            Symmetry::Unitary => {
                let prod = self.entries.adjoint() * &self.entries;
                let mut worst = 0.0f64;
                for j in 0..n {
                    for i in 0..n {
                        let target = if i == j { 1.0 } else { 0.0 };
                        worst = worst.max((prod[(i, j)] - target).norm());
                    }
                }
                worst
            }
            Symmetry::None => 0.0,
        }
    }

    pub fn check_symmetry(&self, tol: f64) -> Result<()> {
        let scale = match self.symmetry {
            Symmetry::Hermitian | Symmetry::AntiHermitian => self.max_abs().max(1.0),
            _ => 1.0,
        };
        let defect = self.symmetry_defect();
        if defect > tol * scale {
            return Err(Error::Integrity(format!(
                "{:?} tag violated: defect {defect:.3e} > {:.1e}",
                self.symmetry,
                tol * scale
            )));
        }
        Ok(())
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        Self {
            window: self.window,
            entries: self.entries.adjoint().to_owned(),
            symmetry: self.symmetry,
        }
    }

    fn same_window(&self, other: &OperatorMatrix) -> Result<()> {
        if self.window != other.window {
            return Err(Error::WindowMismatch(format!(
                "{:?} vs {:?}",
                self.window, other.window
            )));
        }
        Ok(())
    }

    /// Product `self * other`; the result is untagged.
    pub fn matmul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.same_window(other)?;
        Ok(Self {
            window: self.window,
            entries: &self.entries * &other.entries,
            symmetry: Symmetry::None,
        })
    }

    /// `[self, other]`. Commutators of two Hermitian or two anti-Hermitian
    /// operators are anti-Hermitian and are tagged as such.
    pub fn commutator(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.same_window(other)?;
        let entries = &self.entries * &other.entries - &other.entries * &self.entries;
        let symmetry = match (self.symmetry, other.symmetry) {
            (Symmetry::Hermitian, Symmetry::Hermitian)
            | (Symmetry::AntiHermitian, Symmetry::AntiHermitian) => Symmetry::AntiHermitian,
            (Symmetry::Hermitian, Symmetry::AntiHermitian)
            | (Symmetry::AntiHermitian, Symmetry::Hermitian) => Symmetry::Hermitian,
            _ => Symmetry::None,
        };
        Ok(Self {
            window: self.window,
            entries,
            symmetry,
        })
    }

    /// `sum_k c_k M_k` over operators on one window, with an explicit result tag.
    pub fn linear_combination(
        terms: &[(C64, &OperatorMatrix)],
        symmetry: Symmetry,
    ) -> Result<OperatorMatrix> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Usage("empty linear combination".into()))?
            .1;
        let n = first.dim();
        let mut acc = Mat::<C64>::zeros(n, n);
        for (c, m) in terms {
            first.same_window(m)?;
            if *c == ZERO {
                continue;
            }
            for j in 0..n {
                for i in 0..n {
                    acc[(i, j)] += *c * m.entries[(i, j)];
                }
            }
        }
        Ok(Self {
            window: first.window,
            entries: acc,
            symmetry,
        })
    }

    pub fn scaled(&self, c: C64, symmetry: Symmetry) -> OperatorMatrix {
        Self {
            window: self.window,
            entries: Mat::from_fn(self.dim(), self.dim(), |i, j| c * self.entries[(i, j)]),
            symmetry,
        }
    }

    /// `M psi` on raw amplitudes.
    pub fn apply(&self, amplitudes: &[C64]) -> Result<Vec<C64>> {
        if amplitudes.len() != self.dim() {
            return Err(Error::WindowMismatch(format!(
                "vector of length {} for a {}-state operator",
                amplitudes.len(),
                self.dim()
            )));
        }
        let v = Col::from_fn(self.dim(), |i| amplitudes[i]);
        let out = &self.entries * &v;
        Ok((0..self.dim()).map(|i| out[i]).collect())
    }

    pub fn apply_state(&self, state: &RotorState) -> Result<RotorState> {
        if state.window != self.window {
            return Err(Error::WindowMismatch("state and operator windows differ".into()));
        }
        Ok(RotorState {
            window: self.window,
            amplitudes: self.apply(&state.amplitudes)?,
        })
    }
}

pub(crate) fn max_abs(m: &Mat<C64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            worst = worst.max(m[(i, j)].norm());
        }
    }
    worst
}

fn banded(window: BasisWindow, symmetry: Symmetry, f: impl Fn(i64, i64) -> C64) -> OperatorMatrix {
    let n = window.size;
    let mut m = Mat::<C64>::zeros(n, n);
    for j in 0..n {
        for i in j.saturating_sub(2)..(j + 3).min(n) {
            m[(i, j)] = f(window.l_at(i), window.l_at(j));
        }
    }
    OperatorMatrix {
        window,
        entries: m,
        symmetry,
    }
}

pub fn identity(window: BasisWindow) -> OperatorMatrix {
    banded(window, Symmetry::Hermitian, |lp, l| {
        if lp == l {
            C64::new(1.0, 0.0)
        } else {
            ZERO
        }
    })
}

pub fn build_cos_theta(window: BasisWindow) -> OperatorMatrix {
    banded(window, Symmetry::Hermitian, |lp, l| {
        if (lp - l).abs() == 1 {
            C64::new(0.5, 0.0)
        } else {
            ZERO
        }
    })
}

fn sin_element(lp: i64, l: i64) -> C64 {
    // 1/(2i) = -i/2
    match lp - l {
        1 => C64::new(0.0, -0.5),
        -1 => C64::new(0.0, 0.5),
        _ => ZERO,
    }
}

pub fn build_sin_theta(window: BasisWindow) -> OperatorMatrix {
    banded(window, Symmetry::Hermitian, sin_element)
}

pub fn build_l_squared(window: BasisWindow) -> OperatorMatrix {
    banded(window, Symmetry::Hermitian, |lp, l| {
        if lp == l {
            C64::new((l * l) as f64, 0.0)
        } else {
            ZERO
        }
    })
}

/// `l sin(theta) + sin(theta) l`, i.e. `(l' + l) <l'|sin theta|l>`.
pub fn build_sym_lsin(window: BasisWindow) -> OperatorMatrix {
    banded(window, Symmetry::Hermitian, |lp, l| {
        sin_element(lp, l) * (lp + l) as f64
    })
}

/// `sin^2(theta) = 1/2 - (shift_{+2} + shift_{-2}) / 4`.
pub fn build_sin_sq(window: BasisWindow) -> OperatorMatrix {
    banded(window, Symmetry::Hermitian, |lp, l| match (lp - l).abs() {
        0 => C64::new(0.5, 0.0),
        2 => C64::new(-0.25, 0.0),
        _ => ZERO,
    })
}

/// `exp(-i K cos theta)` from the Jacobi-Anger expansion,
/// `<l'|U|l> = (-i)^{l'-l} J_{l'-l}(K)`. Tagged unitary; rows within roughly
/// `K` of the window edge lose norm to truncation.
pub fn kick_matrix_bessel(window: BasisWindow, k: f64) -> Result<OperatorMatrix> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!(
            "kick strength must be finite and >= 0, got {k}"
        )));
    }
    let n = window.size;
    let j = bessel_j_orders(n, k);
    // (-i)^d J_d(K) depends only on |d| because J_{-d} = (-1)^d J_d.
    let phases = [
        C64::new(1.0, 0.0),
        C64::new(0.0, -1.0),
        C64::new(-1.0, 0.0),
        C64::new(0.0, 1.0),
    ];
    let band: Vec<C64> = (0..n).map(|d| phases[d % 4] * j[d]).collect();
    let m = Mat::from_fn(n, n, |r, c| band[r.abs_diff(c)]);
    OperatorMatrix::from_parts(window, m, Symmetry::Unitary)
}

/// Complex amplitudes over a momentum window.
#[derive(Debug, Clone, PartialEq)]
pub struct RotorState {
    window: BasisWindow,
    amplitudes: Vec<C64>,
}

impl RotorState {
    pub fn from_amplitudes(window: BasisWindow, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != window.size {
            return Err(Error::WindowMismatch(format!(
                "{} amplitudes for a window of size {}",
                amplitudes.len(),
                window.size
            )));
        }
        Ok(Self { window, amplitudes })
    }

    /// `|l>`.
    pub fn momentum_eigenstate(window: BasisWindow, l: i64) -> Result<Self> {
        let mut amplitudes = vec![ZERO; window.size];
        amplitudes[window.index_of(l)?] = C64::new(1.0, 0.0);
        Ok(Self { window, amplitudes })
    }

    /// `psi(l) ~ exp(-(l - l0)^2)`, renormalized on the window. Needs at least
    /// 20 states between `l0` and either edge.
    pub fn gaussian(window: BasisWindow, l0: i64) -> Result<Self> {
        const MARGIN: i64 = 20;
        if !window.contains(l0) {
            return Err(Error::Domain(format!(
                "l0 = {l0} outside window [{}, {}]",
                window.l_min(),
                window.l_max()
            )));
        }
        if l0 - window.l_min() < MARGIN || window.l_max() - l0 < MARGIN {
            return Err(Error::Domain(format!(
                "l0 = {l0} is closer than {MARGIN} states to the window edge"
            )));
        }
        let mut amplitudes: Vec<C64> = window
            .momenta()
            .map(|l| {
                let d = (l - l0) as f64;
                C64::new((-d * d).exp(), 0.0)
            })
            .collect();
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in amplitudes.iter_mut() {
            *a /= norm;
        }
        Ok(Self { window, amplitudes })
    }

    pub fn window(&self) -> BasisWindow {
        self.window
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        compensated_sum(self.amplitudes.iter().map(|a| a.norm_sqr()))
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<l^2>` without the normalization check.
    pub fn kinetic_energy_unchecked(&self) -> f64 {
        let l_min = self.window.l_min();
        compensated_sum(self.amplitudes.iter().enumerate().map(|(i, a)| {
            let l = (l_min + i as i64) as f64;
            l * l * a.norm_sqr()
        }))
    }

    /// `<l^2> = sum_l l^2 |psi_l|^2` (hbar = 1). Rejects states whose norm is off
    /// by more than [`NORM_INTEGRITY_TOL`].
    pub fn kinetic_energy(&self) -> Result<f64> {
        let norm = self.norm_sqr();
        if (norm - 1.0).abs() > NORM_INTEGRITY_TOL {
            return Err(Error::Integrity(format!("state norm^2 is {norm}, expected 1")));
        }
        Ok(self.kinetic_energy_unchecked())
    }

    /// Probability on the outermost `edge_width` states at each end.
    pub fn edge_probability(&self) -> f64 {
        let w = self.window.edge_width().min(self.window.size / 2);
        let n = self.amplitudes.len();
        compensated_sum(
            self.amplitudes[..w]
                .iter()
                .chain(&self.amplitudes[n - w..])
                .map(|a| a.norm_sqr()),
        )
    }

    pub fn distance(&self, other: &RotorState) -> Result<f64> {
        if self.window != other.window {
            return Err(Error::WindowMismatch("states live on different windows".into()));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub fn inner(&self, other: &RotorState) -> Result<C64> {
        if self.window != other.window {
            return Err(Error::WindowMismatch("states live on different windows".into()));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

/// Neumaier-compensated summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn window(r: usize) -> BasisWindow {
        BasisWindow::new(0, r).unwrap()
    }

    /// `(1/2pi) int exp(-i l' theta) f(theta) exp(i l theta) dtheta` by the
    /// trapezoid rule, exact for trigonometric polynomials of low degree.
    fn fourier_element(f: impl Fn(f64) -> C64, lp: i64, l: i64) -> C64 {
        let m = 256;
        (0..m)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / m as f64;
                C64::from_polar(1.0, (l - lp) as f64 * t) * f(t)
            })
            .sum::<C64>()
            / m as f64
    }

    #[test]
    fn window_geometry() {
        let w = BasisWindow::new(5, 8).unwrap();
        assert_eq!((w.l_min(), w.l_max()), (1, 8));
        assert_eq!(w.index_of(5).unwrap(), 4);
        assert!(w.index_of(9).is_err());
        assert_eq!(w.momenta().count(), 8);
        assert!(BasisWindow::new(0, 7).is_err());
        assert!(BasisWindow::new(0, 0).is_err());
        assert_eq!(BasisWindow::new(0, 1024).unwrap().edge_width(), 26);
    }

    #[test]
    fn cos_theta_structure() {
        let c = build_cos_theta(window(4));
        for i in 0..4 {
            let halves = (0..4).filter(|&j| c.get(i, j) == C64::new(0.5, 0.0)).count();
            let expected = if i == 0 || i == 3 { 1 } else { 2 };
            assert_eq!(halves, expected);
        }
        c.check_symmetry(1e-12).unwrap();
    }

    #[test]
    fn trig_operators_match_fourier_quadrature() {
        let w = window(64);
        let cos = build_cos_theta(w);
        let sin = build_sin_theta(w);
        let sin2 = build_sin_sq(w);
        for lp in w.momenta() {
            for l in w.momenta() {
                let qc = fourier_element(|t| C64::new(t.cos(), 0.0), lp, l);
                let qs = fourier_element(|t| C64::new(t.sin(), 0.0), lp, l);
                let qs2 = fourier_element(|t| C64::new(t.sin().powi(2), 0.0), lp, l);
                assert!((cos.element(lp, l).unwrap() - qc).norm() < 1e-10);
                assert!((sin.element(lp, l).unwrap() - qs).norm() < 1e-10);
                assert!((sin2.element(lp, l).unwrap() - qs2).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn all_builders_hermitian() {
        let w = BasisWindow::new(-3, 32).unwrap();
        for op in [
            build_cos_theta(w),
            build_sin_theta(w),
            build_l_squared(w),
            build_sym_lsin(w),
            build_sin_sq(w),
            identity(w),
        ] {
            assert_eq!(op.symmetry(), Symmetry::Hermitian);
            op.check_symmetry(1e-12).unwrap();
        }
    }

    #[test]
    fn pythagoras_on_interior_rows() {
        let w = window(32);
        let c = build_cos_theta(w);
        let s = build_sin_theta(w);
        let sum = OperatorMatrix::linear_combination(
            &[
                (C64::new(1.0, 0.0), &c.matmul(&c).unwrap()),
                (C64::new(1.0, 0.0), &s.matmul(&s).unwrap()),
            ],
            Symmetry::Hermitian,
        )
        .unwrap();
        for i in 2..30 {
            for j in 0..32 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((sum.get(i, j) - want).norm() < 1e-12);
            }
        }
        // edge rows feel the truncation
        assert!((sum.get(0, 0) - 1.0).norm() > 0.1);
    }

    #[test]
    fn products_match_product_form() {
        let w = BasisWindow::new(7, 40).unwrap();
        let l = banded(w, Symmetry::Hermitian, |lp, l| {
            if lp == l {
                C64::new(l as f64, 0.0)
            } else {
                ZERO
            }
        });
        let s = build_sin_theta(w);
        let product = OperatorMatrix::linear_combination(
            &[
                (C64::new(1.0, 0.0), &l.matmul(&s).unwrap()),
                (C64::new(1.0, 0.0), &s.matmul(&l).unwrap()),
            ],
            Symmetry::Hermitian,
        )
        .unwrap();
        let direct = build_sym_lsin(w);
        for i in 0..40 {
            for j in 0..40 {
                assert!((product.get(i, j) - direct.get(i, j)).norm() < 1e-12);
            }
        }
        let sin2 = build_sin_sq(w);
        let ss = s.matmul(&s).unwrap();
        for i in 2..38 {
            assert_eq!(sin2.get(i, i), C64::new(0.5, 0.0));
            for j in 0..40 {
                assert!((ss.get(i, j) - sin2.get(i, j)).norm() < 1e-12);
            }
        }
        let l2 = build_l_squared(window(8));
        assert_eq!(l2.element(0, 0).unwrap(), ZERO);
        assert_eq!(l2.element(-4, -4).unwrap(), C64::new(16.0, 0.0));
    }

    #[test]
    fn kinetic_energy_cases() {
        let w = window(64);
        let e3 = RotorState::momentum_eigenstate(w, 3).unwrap();
        assert_eq!(e3.kinetic_energy().unwrap(), 9.0);

        let mut amps = vec![ZERO; 64];
        amps[w.index_of(-1).unwrap()] = C64::new(0.5f64.sqrt(), 0.0);
        amps[w.index_of(1).unwrap()] = C64::new(0.0, 0.5f64.sqrt());
        let sup = RotorState::from_amplitudes(w, amps).unwrap();
        assert!((sup.kinetic_energy().unwrap() - 1.0).abs() < 1e-15);

        let bad = RotorState::from_amplitudes(w, vec![C64::new(1.0, 0.0); 64]).unwrap();
        assert!(matches!(bad.kinetic_energy(), Err(Error::Integrity(_))));
    }

    #[test]
    fn gaussian_state() {
        let w = window(128);
        let g = RotorState::gaussian(w, 0).unwrap();
        assert!((g.norm() - 1.0).abs() < 1e-12);
        for d in 1..20 {
            let a = g.amplitudes()[w.index_of(d).unwrap()];
            let b = g.amplitudes()[w.index_of(-d).unwrap()];
            assert_eq!(a, b);
        }
        // direct-sum oracle: sum l^2 e^{-2 l^2} / sum e^{-2 l^2}
        let (mut num, mut den) = (0.0, 0.0);
        for l in -60i64..=60 {
            let wgt = (-2.0 * (l * l) as f64).exp();
            num += (l * l) as f64 * wgt;
            den += wgt;
        }
        assert!((g.kinetic_energy().unwrap() - num / den).abs() < 1e-14);

        assert!(matches!(RotorState::gaussian(w, 500), Err(Error::Domain(_))));
        assert!(matches!(RotorState::gaussian(w, 60), Err(Error::Domain(_))));
    }

    #[test]
    fn bessel_kick_matrix() {
        let w = window(64);
        let id = kick_matrix_bessel(w, 0.0).unwrap();
        for i in 0..64 {
            for j in 0..64 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(id.get(i, j), C64::new(want, 0.0));
            }
        }
        let k = 12.0;
        let u = kick_matrix_bessel(window(1024), k).unwrap();
        let j0 = crate::special::bessel_j(0, k);
        assert!((u.get(500, 500) - j0).norm() < 1e-15);
        // interior rows are unit vectors
        for i in (2 * k as usize + 40)..(1024 - 2 * k as usize - 40) {
            let row: f64 = (0..1024).map(|j| u.get(i, j).norm_sqr()).sum();
            assert!((row - 1.0).abs() < 1e-10, "row {i}: {row}");
        }
        assert!(kick_matrix_bessel(w, -1.0).is_err());
    }

    #[test]
    fn bessel_kick_matrix_is_unitary_in_the_interior() {
        let w = window(1024);
        for k in [3.0, 20.0] {
            let u = kick_matrix_bessel(w, k).unwrap();
            let prod = u.adjoint().matmul(&u).unwrap();
            for i in 100..924 {
                for j in 100..924 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((prod.get(i, j) - want).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn kick_matrix_matches_fourier_quadrature() {
        let w = window(64);
        let k = 4.5;
        let u = kick_matrix_bessel(w, k).unwrap();
        for lp in -10..10 {
            for l in -10..10 {
                let q = fourier_element(|t| C64::from_polar(1.0, -k * t.cos()), lp, l);
                assert!((u.element(lp, l).unwrap() - q).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetry_tags_are_enforced() {
        let w = window(4);
        let mut m = Mat::<C64>::zeros(4, 4);
        m[(0, 1)] = C64::new(1.0, 0.0);
        assert!(OperatorMatrix::new(w, m.clone(), Symmetry::Hermitian, 1e-12).is_err());
        assert!(OperatorMatrix::new(w, m, Symmetry::None, 1e-12).is_ok());
        let mut a = Mat::<C64>::zeros(4, 4);
        a[(0, 1)] = C64::new(1.0, 0.0);
        a[(1, 0)] = C64::new(-1.0, 0.0);
        assert!(OperatorMatrix::new(w, a, Symmetry::AntiHermitian, 1e-12).is_ok());
        let wrong = OperatorMatrix::from_parts(window(8), Mat::zeros(4, 4), Symmetry::None);
        assert!(matches!(wrong, Err(Error::WindowMismatch(_))));
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let vals = std::iter::once(1e16)
            .chain(std::iter::repeat_n(1.0, 1000))
            .chain(std::iter::once(-1e16));
        assert_eq!(compensated_sum(vals), 1000.0);
    }
}
