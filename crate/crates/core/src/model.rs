//! Truncated spin⊗Fock space of a single trapped ion driven on the carrier and
//! the two first motional sidebands.
//!
//! Units: angular frequencies in rad/μs, times in μs, ħ = 1.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // float math comes from libm when std is absent
use num_traits::Float;

use crate::error::Error;
use crate::linalg::{CMatrix, I, ZERO};

/// Physical constants of the ion-light system.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SystemParams {
    /// Lamb-Dicke parameter.
    pub eta: f64,
    /// Trap angular frequency (rad/μs).
    pub omega_z: f64,
    /// Maximal bare Rabi angular frequency (rad/μs).
    pub omega_0: f64,
    /// Pulse duration (μs).
    pub total_time: f64,
    /// Number of piecewise-constant intervals on the control grid.
    pub n_steps: usize,
    /// Highest retained Fock level.
    pub n_max: usize,
    /// Keep only the resonant carrier / blue / red couplings.
    pub resonant_only: bool,
}

impl SystemParams {
    /// η = 0.25, ω_z = 2π·1.4 MHz, Ω0 = 2π·50 kHz, 1000 steps, n ≤ 14.
    pub fn standard(total_time: f64) -> Self {
        Self {
            eta: 0.25,
            omega_z: 2.0 * PI * 1.4,
            omega_0: 2.0 * PI * 0.05,
            total_time,
            n_steps: 1000,
            n_max: 14,
            resonant_only: false,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |name, reason| Err(Error::InvalidParameter { name, reason });
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad("eta", "must be finite and non-negative");
        }
        if !(self.total_time > 0.0 && self.total_time.is_finite()) {
            return bad("total_time", "must be positive");
        }
        if !(self.omega_0.is_finite() && self.omega_z.is_finite()) {
            return bad("omega", "frequencies must be finite");
        }
        if self.n_steps == 0 {
            return bad("n_steps", "must be at least 1");
        }
        if self.n_max == 0 {
            return bad("n_max", "must be at least 1");
        }
        Ok(())
    }

    /// True when Ω0/ω_z > 0.1, i.e. outside the resolved-sideband regime.
    pub fn regime_warning(&self) -> bool {
        self.omega_0 / self.omega_z > 0.1
    }

    /// Number of retained Fock levels.
    #[inline]
    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    /// Dimension of the spin⊗Fock space.
    #[inline]
    pub fn dim(&self) -> usize {
        2 * self.levels()
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.total_time / self.n_steps as f64
    }

    /// Time of grid point `j` (μs).
    #[inline]
    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Spin {
    Down = 0,
    Up = 1,
}

/// `(spin, n)` label of a product basis state; flat index `2n + spin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    pub spin: Spin,
    pub n: usize,
}

impl BasisIndex {
    pub const fn new(spin: Spin, n: usize) -> Self {
        Self { spin, n }
    }

    pub const fn down(n: usize) -> Self {
        Self::new(Spin::Down, n)
    }

    pub const fn up(n: usize) -> Self {
        Self::new(Spin::Up, n)
    }

    #[inline]
    pub const fn flat(self) -> usize {
        2 * self.n + self.spin as usize
    }

    #[inline]
    pub const fn from_flat(i: usize) -> Self {
        let spin = if i % 2 == 0 { Spin::Down } else { Spin::Up };
        Self { spin, n: i / 2 }
    }
}

/// The three drive fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Field {
    Carrier = 0,
    Blue = 1,
    Red = 2,
}

impl Field {
    pub const ALL: [Field; 3] = [Field::Carrier, Field::Blue, Field::Red];

    pub fn name(self) -> &'static str {
        match self {
            Field::Carrier => "carrier",
            Field::Blue => "blue",
            Field::Red => "red",
        }
    }
}

/// Dimensionless drive amplitudes `f = Ω/Ω0`, indexed by [`Field`].
pub type Amplitudes = [f64; 3];

/// Time-sampled dimensionless amplitudes on the grid `t_j = j·T/n_steps`,
/// `j = 0..=n_steps`. Unused fields hold zeros.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PulseSet {
    pub samples: [Vec<f64>; 3],
}

impl PulseSet {
    pub fn zeros(n_steps: usize) -> Self {
        Self { samples: [vec![0.0; n_steps + 1], vec![0.0; n_steps + 1], vec![0.0; n_steps + 1]] }
    }

    /// Same constant amplitude on every grid point, endpoints included.
    /// Used for analytic checks; violates the vanishing-boundary invariant.
    pub fn constant(n_steps: usize, amps: Amplitudes) -> Self {
        Self { samples: amps.map(|a| vec![a; n_steps + 1]) }
    }

    pub fn n_steps(&self) -> usize {
        self.samples[0].len().saturating_sub(1)
    }

    pub fn field(&self, f: Field) -> &[f64] {
        &self.samples[f as usize]
    }

    pub fn field_mut(&mut self, f: Field) -> &mut Vec<f64> {
        &mut self.samples[f as usize]
    }

    #[inline]
    pub fn amplitudes(&self, j: usize) -> Amplitudes {
        [self.samples[0][j], self.samples[1][j], self.samples[2][j]]
    }

    /// Every sample multiplied by `factor` (amplitude miscalibration).
    pub fn scaled(&self, factor: f64) -> Self {
        Self { samples: self.samples.clone().map(|v| v.into_iter().map(|x| x * factor).collect()) }
    }

    pub fn check_grid(&self, params: &SystemParams) -> Result<(), Error> {
        for s in &self.samples {
            if s.len() != params.n_steps + 1 {
                return Err(Error::ShapeMismatch { expected: params.n_steps + 1, found: s.len() });
            }
        }
        Ok(())
    }

    /// Checks the designed-pulse constraints: `|f| ≤ 1` and zero endpoints.
    pub fn check_constraints(&self) -> Result<(), Error> {
        for s in &self.samples {
            if s.iter().any(|x| !(x.abs() <= 1.0)) {
                return Err(Error::InvalidParameter { name: "pulse", reason: "|f| exceeds 1" });
            }
            if s.first().copied().unwrap_or(0.0) != 0.0 || s.last().copied().unwrap_or(0.0) != 0.0 {
                return Err(Error::InvalidParameter { name: "pulse", reason: "pulse does not vanish at the boundaries" });
            }
        }
        Ok(())
    }
}

/// Generalized Laguerre polynomial `L_n^k(x)` via the three-term recurrence
/// `(j+1) L_{j+1} = (2j+1+k−x) L_j − (j+k) L_{j−1}`.
pub fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let k = k as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + k - x) * cur - (jf + k) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Coupling strength `M_{n,n+δn}(η)` relative to the bare Rabi frequency.
pub fn matrix_element(n: usize, delta_n: i32, eta: f64) -> Result<Complex64, Error> {
    let x = eta * eta;
    let damp = Float::exp(-x / 2.0);
    match delta_n {
        0 => Ok(Complex64::new(damp * laguerre(n, 0, x), 0.0)),
        1 => {
            let mag = damp * eta * Float::sqrt(1.0 / (n as f64 + 1.0)) * laguerre(n, 1, x);
            Ok(I * mag)
        }
        -1 => {
            if n == 0 {
                return Err(Error::BelowGroundState);
            }
            let mag = damp * eta * Float::sqrt(1.0 / n as f64) * laguerre(n - 1, 1, x);
            Ok(I * mag)
        }
        _ => Err(Error::InvalidParameter { name: "delta_n", reason: "must be -1, 0 or +1" }),
    }
}

/// Precomputed `M_{n,n}` and `M_{n,n+1}` for levels `0..=n_max`.
///
/// `M_{n+1,n}` equals `M_{n,n+1}`, so one sideband table serves both directions.
#[derive(Debug, Clone)]
pub struct MatrixElements {
    pub carrier: Vec<Complex64>,
    pub sideband: Vec<Complex64>,
}

impl MatrixElements {
    pub fn new(eta: f64, n_max: usize) -> Self {
        let carrier = (0..=n_max).map(|n| matrix_element(n, 0, eta).unwrap_or(ZERO)).collect();
        let sideband = (0..=n_max).map(|n| matrix_element(n, 1, eta).unwrap_or(ZERO)).collect();
        Self { carrier, sideband }
    }
}

/// The spin-raising block `B` of the Hamiltonian, `B[m][n] = ⟨↑,m|H|↓,n⟩`.
///
/// Only `|m − n| ≤ 1` couplings exist, so `B` is tridiagonal:
/// `diag[n] = B[n][n]`, `lower[n] = B[n+1][n]`, `upper[n] = B[n][n+1]`.
/// The full Hamiltonian is `B` plus its Hermitian conjugate.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub diag: Vec<Complex64>,
    pub lower: Vec<Complex64>,
    pub upper: Vec<Complex64>,
}

impl Coupling {
    pub fn zeros(levels: usize) -> Self {
        Self {
            diag: vec![ZERO; levels],
            lower: vec![ZERO; levels.saturating_sub(1)],
            upper: vec![ZERO; levels.saturating_sub(1)],
        }
    }

    pub fn levels(&self) -> usize {
        self.diag.len()
    }

    /// Fills in the couplings for amplitudes `amps` with rotating phases
    /// evaluated at time `t`.
    pub fn fill(&mut self, params: &SystemParams, elements: &MatrixElements, amps: Amplitudes, t: f64) {
        let half = 0.5 * params.omega_0;
        let [fc, fb, fr] = amps;
        let levels = self.levels();
        let (weight_same, weight_raise, weight_lower) = if params.resonant_only {
            let c = Complex64::new(half * fc, 0.0);
            let b = Complex64::new(half * fb, 0.0);
            let r = Complex64::new(half * fr, 0.0);
            (c, b, r)
        } else {
            let rot = Complex64::from_polar(1.0, params.omega_z * t);
            let rot_c = rot.conj();
            // δn = 0: carrier (phase 1), blue (e^{iωt}), red (e^{−iωt})
            let same = (rot * fb + rot_c * fr + fc) * half;
            // δn = +1: carrier (e^{−iωt}), blue (phase 1)
            let raise = (rot_c * fc + fb) * half;
            // δn = −1: carrier (e^{iωt}), red (phase 1)
            let lower = (rot * fc + fr) * half;
            (same, raise, lower)
        };
        for n in 0..levels {
            self.diag[n] = elements.carrier[n] * weight_same;
        }
        for n in 0..levels - 1 {
            // |↓,n⟩ → |↑,n+1⟩ and |↓,n+1⟩ → |↑,n⟩ share |M_{n,n+1}|.
            self.lower[n] = elements.sideband[n] * weight_raise;
            self.upper[n] = elements.sideband[n] * weight_lower;
        }
    }

    /// `B v` for a vector over the spin-down levels.
    #[inline]
    pub fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        let d = self.levels();
        for m in 0..d {
            let mut acc = self.diag[m] * v[m];
            if m > 0 {
                acc += self.lower[m - 1] * v[m - 1];
            }
            if m + 1 < d {
                acc += self.upper[m] * v[m + 1];
            }
            out[m] = acc;
        }
    }

    /// `B† u` for a vector over the spin-up levels.
    #[inline]
    pub fn apply_adjoint(&self, u: &[Complex64], out: &mut [Complex64]) {
        let d = self.levels();
        for n in 0..d {
            let mut acc = self.diag[n].conj() * u[n];
            if n + 1 < d {
                acc += self.lower[n].conj() * u[n + 1];
            }
            if n > 0 {
                acc += self.upper[n - 1].conj() * u[n - 1];
            }
            out[n] = acc;
        }
    }

    /// Dense `B† B`, a Hermitian positive semi-definite matrix over the
    /// spin-down levels.
    pub fn gram(&self) -> CMatrix {
        let d = self.levels();
        let mut g = CMatrix::zeros(d);
        // Column n of B has entries at rows n-1, n, n+1.
        let col = |n: usize| -> [(usize, Complex64); 3] {
            [
                (n.wrapping_sub(1), if n > 0 { self.upper[n - 1] } else { ZERO }),
                (n, self.diag[n]),
                (n + 1, if n + 1 < d { self.lower[n] } else { ZERO }),
            ]
        };
        for a in 0..d {
            let ca = col(a);
            for b in a..(a + 3).min(d) {
                let cb = col(b);
                let mut acc = ZERO;
                for &(ra, va) in &ca {
                    for &(rb, vb) in &cb {
                        if ra == rb && ra < d {
                            acc += va.conj() * vb;
                        }
                    }
                }
                g[(a, b)] = acc;
                g[(b, a)] = acc.conj();
            }
        }
        g
    }

    /// Embeds `B + B†` into the interleaved spin⊗Fock basis.
    pub fn to_hamiltonian(&self) -> CMatrix {
        let d = self.levels();
        let mut h = CMatrix::zeros(2 * d);
        let mut put = |m: usize, n: usize, z: Complex64| {
            let up = BasisIndex::up(m).flat();
            let down = BasisIndex::down(n).flat();
            h[(up, down)] = z;
            h[(down, up)] = z.conj();
        };
        for n in 0..d {
            put(n, n, self.diag[n]);
        }
        for n in 0..d - 1 {
            put(n + 1, n, self.lower[n]);
            put(n, n + 1, self.upper[n]);
        }
        h
    }
}

/// Full Hamiltonian at time `t` for the given amplitudes.
pub fn assemble_hamiltonian(params: &SystemParams, amps: Amplitudes, t: f64) -> CMatrix {
    let elements = MatrixElements::new(params.eta, params.n_max);
    let mut b = Coupling::zeros(params.levels());
    b.fill(params, &elements, amps, t);
    b.to_hamiltonian()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    // Direct power series L_n^k(x) = Σ_i (−1)^i C(n+k, n−i) x^i / i!
    fn laguerre_series(n: usize, k: usize, x: f64) -> f64 {
        let binom = |a: usize, b: usize| -> f64 {
            let mut r = 1.0;
            for i in 0..b {
                r = r * (a - i) as f64 / (i + 1) as f64;
            }
            r
        };
        let mut sum = 0.0;
        let mut fact = 1.0;
        for i in 0..=n {
            if i > 0 {
                fact *= i as f64;
            }
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * binom(n + k, n - i) * x.powi(i as i32) / fact;
        }
        sum
    }

    #[test]
    fn laguerre_examples() {
        assert_eq!(laguerre(0, 0, 0.0625), 1.0);
        assert_eq!(laguerre(0, 2, 0.3), 1.0);
        assert!(close(laguerre(1, 1, 0.0625), 1.9375, 1e-15));
        let x = 0.0625;
        assert!(close(laguerre(2, 0, x), 1.0 - 2.0 * x + x * x / 2.0, 1e-15));
        assert!(close(laguerre(2, 0, x), 0.876953125, 1e-15));
    }

    #[test]
    fn laguerre_matches_power_series() {
        for n in 0..=20 {
            for k in 0..=2 {
                for &x in &[0.0, 0.01, 0.0625, 0.1] {
                    let a = laguerre(n, k, x);
                    let b = laguerre_series(n, k, x);
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "n={n} k={k} x={x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn matrix_element_examples() {
        let m00 = matrix_element(0, 0, 0.25).unwrap();
        assert!(close(m00.re, (-0.03125f64).exp(), 1e-15) && m00.im == 0.0);
        assert!(close(m00.re, 0.969233234476344, 1e-12));

        let m12 = matrix_element(1, 1, 0.25).unwrap();
        let expect = 0.25 * (0.5f64).sqrt() * (-0.03125f64).exp() * 1.9375;
        assert!(m12.re == 0.0 && close(m12.im, expect, 1e-15));
        assert!(close(m12.im, 0.331967, 1e-6));

        for n in 0..5 {
            assert_eq!(matrix_element(n, 1, 0.0).unwrap(), ZERO);
            if n > 0 {
                assert_eq!(matrix_element(n, -1, 0.0).unwrap(), ZERO);
            }
        }
        assert_eq!(matrix_element(0, -1, 0.25), Err(Error::BelowGroundState));
        assert!(matrix_element(3, 2, 0.25).is_err());
    }

    #[test]
    fn relative_rabi_frequency_ordering() {
        let eta = 0.25;
        for n in 0..9 {
            let a = matrix_element(n, 0, eta).unwrap().re;
            let b = matrix_element(n + 1, 0, eta).unwrap().re;
            assert!(b < a, "carrier not decreasing at n={n}");
            let sa = matrix_element(n, 1, eta).unwrap().norm();
            let sb = matrix_element(n + 1, 1, eta).unwrap().norm();
            assert!(sb > sa, "blue not increasing at n={n}");
            let ra = matrix_element(n + 1, -1, eta).unwrap().norm();
            let rb = matrix_element(n + 2, -1, eta).unwrap().norm();
            assert!(rb > ra, "red not increasing at n={}", n + 1);
        }
    }

    #[test]
    fn raising_lowering_symmetry() {
        for n in 0..20 {
            let up = matrix_element(n, 1, 0.25).unwrap();
            let down = matrix_element(n + 1, -1, 0.25).unwrap();
            assert!((up.norm() - down.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn basis_index_bijection() {
        for i in 0..30 {
            assert_eq!(BasisIndex::from_flat(i).flat(), i);
        }
        assert_eq!(BasisIndex::up(3).flat(), 7);
        assert_eq!(BasisIndex::down(3).flat(), 6);
    }

    #[test]
    fn zero_amplitudes_give_zero_matrix() {
        let p = SystemParams::standard(300.0);
        let h = assemble_hamiltonian(&p, [0.0; 3], 12.3);
        assert_eq!(h.max_abs(), 0.0);
        assert_eq!(h.dim(), 30);
    }

    #[test]
    fn eta_zero_carrier_is_blockwise_rabi() {
        let p = SystemParams { eta: 0.0, resonant_only: true, ..SystemParams::standard(100.0) };
        let h = assemble_hamiltonian(&p, [1.0, 0.0, 0.0], 0.0);
        for r in 0..h.dim() {
            for c in 0..h.dim() {
                let (a, b) = (BasisIndex::from_flat(r), BasisIndex::from_flat(c));
                let expect = if a.n == b.n && a.spin != b.spin { p.omega_0 / 2.0 } else { 0.0 };
                assert!((h[(r, c)] - Complex64::new(expect, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn blue_sideband_entries() {
        let p = SystemParams { n_max: 2, resonant_only: true, ..SystemParams::standard(100.0) };
        let h = assemble_hamiltonian(&p, [0.0, 1.0, 0.0], 3.0);
        for n in 0..2 {
            let m = matrix_element(n, 1, 0.25).unwrap();
            let z = h[(BasisIndex::up(n + 1).flat(), BasisIndex::down(n).flat())];
            assert!((z - m * (p.omega_0 / 2.0)).norm() < 1e-15);
        }
        // nothing else is populated besides the Hermitian partners
        let nonzero = h.as_slice().iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 4);
    }

    #[test]
    fn phases_are_unity_at_t0() {
        let full = SystemParams::standard(100.0);
        let amps = [0.3, -0.7, 0.5];
        let h = assemble_hamiltonian(&full, amps, 0.0);
        // Sum of per-field terms with unit phases.
        let mut sum = CMatrix::zeros(full.dim());
        for f in Field::ALL {
            let mut a = [0.0; 3];
            a[f as usize] = amps[f as usize];
            sum = sum.add(&assemble_hamiltonian(&full, a, 0.0));
        }
        assert!(h.max_abs_diff(&sum) < 1e-15);
        let m = MatrixElements::new(full.eta, full.n_max);
        let z = h[(BasisIndex::up(2).flat(), BasisIndex::down(3).flat())];
        let expect = m.sideband[2] * (full.omega_0 / 2.0) * (amps[0] + amps[2]);
        assert!((z - expect).norm() < 1e-15);
    }

    #[test]
    fn gram_matches_dense_product() {
        let p = SystemParams::standard(100.0);
        let el = MatrixElements::new(p.eta, p.n_max);
        let mut b = Coupling::zeros(p.levels());
        b.fill(&p, &el, [0.4, -0.9, 0.2], 1.7);
        let d = p.levels();
        let dense = CMatrix::from_fn(d, |m, n| {
            if m == n {
                b.diag[n]
            } else if m == n + 1 {
                b.lower[n]
            } else if n == m + 1 {
                b.upper[m]
            } else {
                ZERO
            }
        });
        assert!(b.gram().max_abs_diff(&dense.adjoint().matmul(&dense)) < 1e-15);
    }

    proptest! {
        #[test]
        fn hamiltonian_is_hermitian(
            c in -1.0f64..1.0, bl in -1.0f64..1.0, r in -1.0f64..1.0,
            t in 0.0f64..1000.0, eta in 0.0f64..0.5, resonant in any::<bool>(),
        ) {
            let p = SystemParams { eta, resonant_only: resonant, ..SystemParams::standard(1000.0) };
            let h = assemble_hamiltonian(&p, [c, bl, r], t);
            prop_assert!(h.hermiticity_defect() <= 1e-14 * h.max_abs().max(1.0));
        }
    }
}
