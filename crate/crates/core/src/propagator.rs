//! Piecewise-constant propagation by exact exponentiation of the step
//! Hamiltonian.
//!
//! Interval `j` holds the amplitudes of grid sample `j` (left edge) and the
//! rotating phases of the off-resonant terms frozen at the interval midpoint.
//!
//! The Hamiltonian only connects spin-down to spin-up states,
//! `H = [[0, B†], [B, 0]]`, so its eigendecomposition follows from that of
//! the half-size Gram matrix `G = B†B = W diag(s²) W†`: the eigenvalues of `H`
//! are `±s_k`. Written out in blocks,
//!
//! ```text
//! exp(−iHτ) = [[ W cos(sτ) W†,      −i W S W† B†      ],
//!              [ −i B W S W†,    1 + B W C W† B†    ]]
//! S = sin(sτ)/s,   C = (cos(sτ) − 1)/s²
//! ```
//!
//! which is what [`Step`] stores and applies. [`step_propagator`] is the
//! dense route over the full space and serves as the reference.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // float math comes from libm when std is absent
use num_traits::Float;

use crate::error::Error;
use crate::linalg::{inner, norm_sqr, CMatrix, HermitianEigen, I, ZERO};
use crate::model::{BasisIndex, Coupling, MatrixElements, PulseSet, Spin, SystemParams};

/// Complex amplitudes over the interleaved spin⊗Fock basis (flat index `2n + spin`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn basis(params: &SystemParams, index: BasisIndex) -> Self {
        let mut amplitudes = vec![ZERO; params.dim()];
        amplitudes[index.flat()] = Complex64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amplitudes).sqrt()
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// `|⟨spin, n|ψ⟩|²`.
    pub fn population(&self, index: BasisIndex) -> f64 {
        self.amplitudes[index.flat()].norm_sqr()
    }

    /// Total spin-up probability summed over Fock levels `0..=k_max`.
    pub fn spin_up_population(&self, k_max: usize) -> f64 {
        let levels = self.amplitudes.len() / 2;
        (0..levels.min(k_max + 1)).map(|k| self.population(BasisIndex::up(k))).sum()
    }

    fn split(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let down = self.amplitudes.iter().step_by(2).copied().collect();
        let up = self.amplitudes.iter().skip(1).step_by(2).copied().collect();
        (down, up)
    }

    fn join(down: &[Complex64], up: &[Complex64]) -> Self {
        let mut amplitudes = Vec::with_capacity(2 * down.len());
        for (d, u) in down.iter().zip(up) {
            amplitudes.push(*d);
            amplitudes.push(*u);
        }
        Self { amplitudes }
    }
}

/// Evolved images `|ψ_n(T)⟩` of the initial states `|↓, n⟩`, `n = 0..N−1`.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvolvedBasis {
    pub finals: Vec<StateVector>,
    pub params: SystemParams,
    /// FNV-1a hash of the pulse samples that produced `finals`.
    pub pulse_hash: u64,
}

impl EvolvedBasis {
    pub fn len(&self) -> usize {
        self.finals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.finals.is_empty()
    }

    /// Largest `|⟨ψ_j|ψ_k⟩ − δ_jk|` over all pairs.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (j, a) in self.finals.iter().enumerate() {
            for (k, b) in self.finals.iter().enumerate().skip(j) {
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((a.inner(b) - target).norm());
            }
        }
        worst
    }
}

pub fn pulse_hash(pulses: &PulseSet) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for s in &pulses.samples {
        for x in s {
            for byte in x.to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
    }
    h
}

/// `exp(−i H dt)` through the eigendecomposition of `H`.
pub fn step_propagator(h: &CMatrix, dt: f64) -> Result<CMatrix, Error> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter { name: "dt", reason: "must be positive" });
    }
    let eig = HermitianEigen::new(h)?;
    Ok(eig.apply_fn(|l| Complex64::from_polar(1.0, -l * dt)))
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// One factored interval propagator.
#[derive(Debug, Clone)]
pub struct Step {
    coupling: Coupling,
    /// Eigenvectors of `B†B`, row-major.
    w: CMatrix,
    cos: Vec<f64>,
    sin_over: Vec<f64>,
    cos_m1_over: Vec<f64>,
}

/// Scratch buffers for applying a [`Step`].
#[derive(Debug, Clone)]
struct Workspace {
    x: Vec<Complex64>,
    y: Vec<Complex64>,
    tmp: Vec<Complex64>,
    z: Vec<Complex64>,
}

impl Workspace {
    fn new(levels: usize) -> Self {
        Self { x: vec![ZERO; levels], y: vec![ZERO; levels], tmp: vec![ZERO; levels], z: vec![ZERO; levels] }
    }
}

impl Step {
    pub fn new(coupling: Coupling, dt: f64) -> Result<Self, Error> {
        let eig = HermitianEigen::new(&coupling.gram())?;
        let mut cos = Vec::with_capacity(eig.values.len());
        let mut sin_over = Vec::with_capacity(eig.values.len());
        let mut cos_m1_over = Vec::with_capacity(eig.values.len());
        for &l in &eig.values {
            let s = l.max(0.0).sqrt();
            let half = sinc(0.5 * s * dt);
            cos.push((s * dt).cos());
            sin_over.push(dt * sinc(s * dt));
            cos_m1_over.push(-0.5 * dt * dt * half * half);
        }
        Ok(Self { coupling, w: eig.vectors, cos, sin_over, cos_m1_over })
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    /// Applies the step (or its inverse when `inverse`) in place.
    fn apply(&self, down: &mut [Complex64], up: &mut [Complex64], ws: &mut Workspace, inverse: bool) {
        let d = down.len();
        let w = self.w.as_slice();
        let sign = if inverse { -1.0 } else { 1.0 };
        // x = W† down,  y = W† B† up
        self.coupling.apply_adjoint(up, &mut ws.tmp);
        ws.x.iter_mut().for_each(|v| *v = ZERO);
        ws.y.iter_mut().for_each(|v| *v = ZERO);
        for r in 0..d {
            let (dr, br) = (down[r], ws.tmp[r]);
            let row = &w[r * d..(r + 1) * d];
            for k in 0..d {
                let c = row[k].conj();
                ws.x[k] += c * dr;
                ws.y[k] += c * br;
            }
        }
        // spectral weights
        for k in 0..d {
            let (x, y) = (ws.x[k], ws.y[k]);
            let s = self.sin_over[k] * sign;
            ws.x[k] = x * self.cos[k] - I * (y * s);
            ws.y[k] = -I * (x * s) + y * self.cos_m1_over[k];
        }
        // down' = W x,  up' = up + B W y
        for r in 0..d {
            let row = &w[r * d..(r + 1) * d];
            let mut a = ZERO;
            let mut b = ZERO;
            for k in 0..d {
                a += row[k] * ws.x[k];
                b += row[k] * ws.y[k];
            }
            down[r] = a;
            ws.z[r] = b;
        }
        self.coupling.apply(&ws.z, &mut ws.tmp);
        for (u, t) in up.iter_mut().zip(&ws.tmp) {
            *u += t;
        }
    }
}

/// Streams the factored per-interval propagators of a pulse.
struct StepBuilder<'a> {
    params: &'a SystemParams,
    pulses: &'a PulseSet,
    elements: MatrixElements,
    coupling: Coupling,
}

impl<'a> StepBuilder<'a> {
    fn new(params: &'a SystemParams, pulses: &'a PulseSet) -> Result<Self, Error> {
        params.validate()?;
        pulses.check_grid(params)?;
        Ok(Self {
            params,
            pulses,
            elements: MatrixElements::new(params.eta, params.n_max),
            coupling: Coupling::zeros(params.levels()),
        })
    }

    fn step(&mut self, j: usize) -> Result<Step, Error> {
        let dt = self.params.dt();
        let t_mid = (j as f64 + 0.5) * dt;
        self.coupling.fill(self.params, &self.elements, self.pulses.amplitudes(j), t_mid);
        Step::new(self.coupling.clone(), dt).map_err(|e| Error::Propagation { step: j, source: alloc::boxed::Box::new(e) })
    }
}

/// The full cached sequence of interval propagators for one pulse.
#[derive(Debug, Clone)]
pub struct StepSequence {
    steps: Vec<Step>,
    levels: usize,
}

impl StepSequence {
    pub fn build(params: &SystemParams, pulses: &PulseSet) -> Result<Self, Error> {
        let mut builder = StepBuilder::new(params, pulses)?;
        let steps = (0..params.n_steps).map(|j| builder.step(j)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { steps, levels: params.levels() })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `U(T) ψ`.
    pub fn apply(&self, state: &StateVector) -> StateVector {
        let (mut down, mut up) = state.split();
        let mut ws = Workspace::new(self.levels);
        for step in &self.steps {
            step.apply(&mut down, &mut up, &mut ws, false);
        }
        StateVector::join(&down, &up)
    }

    /// `U(T)† ψ`: the inverse steps in reverse order.
    pub fn apply_adjoint(&self, state: &StateVector) -> StateVector {
        let (mut down, mut up) = state.split();
        let mut ws = Workspace::new(self.levels);
        for step in self.steps.iter().rev() {
            step.apply(&mut down, &mut up, &mut ws, true);
        }
        StateVector::join(&down, &up)
    }

    /// Dense `U(T)` over the full space.
    pub fn unitary(&self) -> CMatrix {
        let dim = 2 * self.levels;
        let mut u = CMatrix::zeros(dim);
        for c in 0..dim {
            let mut e = StateVector { amplitudes: vec![ZERO; dim] };
            e.amplitudes[c] = Complex64::new(1.0, 0.0);
            let out = self.apply(&e);
            for r in 0..dim {
                u[(r, c)] = out.amplitudes[r];
            }
        }
        u
    }
}

/// Evolves one state over the whole grid.
pub fn evolve(params: &SystemParams, pulses: &PulseSet, initial: &StateVector) -> Result<StateVector, Error> {
    if initial.amplitudes.len() != params.dim() {
        return Err(Error::ShapeMismatch { expected: params.dim(), found: initial.amplitudes.len() });
    }
    let mut out = propagate_states(params, pulses, core::slice::from_ref(initial))?;
    Ok(out.remove(0))
}

/// Evolves the `N` initial states `|↓, n⟩`, `n < N`, computing each interval
/// propagator once.
pub fn evolve_basis(params: &SystemParams, pulses: &PulseSet, n: usize) -> Result<EvolvedBasis, Error> {
    if n == 0 || n > params.levels() {
        return Err(Error::InvalidParameter { name: "N", reason: "must satisfy 1 <= N <= n_max + 1" });
    }
    let initial: Vec<StateVector> = (0..n).map(|k| StateVector::basis(params, BasisIndex::down(k))).collect();
    let finals = propagate_states(params, pulses, &initial)?;
    Ok(EvolvedBasis { finals, params: *params, pulse_hash: pulse_hash(pulses) })
}

fn propagate_states(params: &SystemParams, pulses: &PulseSet, initial: &[StateVector]) -> Result<Vec<StateVector>, Error> {
    let mut builder = StepBuilder::new(params, pulses)?;
    let mut split: Vec<(Vec<Complex64>, Vec<Complex64>)> = initial.iter().map(StateVector::split).collect();
    let mut ws = Workspace::new(params.levels());
    for j in 0..params.n_steps {
        let step = builder.step(j)?;
        for (down, up) in split.iter_mut() {
            step.apply(down, up, &mut ws, false);
        }
    }
    Ok(split.iter().map(|(d, u)| StateVector::join(d, u)).collect())
}

/// Probability of finding `|spin, n⟩` in each state, convenience for tests.
pub fn populations(state: &StateVector, spin: Spin) -> Vec<f64> {
    let levels = state.amplitudes.len() / 2;
    (0..levels).map(|n| state.population(BasisIndex::new(spin, n))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_hamiltonian, matrix_element, Field};
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn sigma_x_rotation(omega: f64, dt: f64) -> CMatrix {
        let c = Complex64::new((omega * dt / 2.0).cos(), 0.0);
        let s = Complex64::new(0.0, -(omega * dt / 2.0).sin());
        CMatrix::from_row_major(vec![c, s, s, c]).unwrap()
    }

    #[test]
    fn zero_hamiltonian_gives_identity() {
        let u = step_propagator(&CMatrix::zeros(6), 0.7).unwrap();
        assert!(u.max_abs_diff(&CMatrix::identity(6)) < 1e-15);
    }

    #[test]
    fn two_level_rotation() {
        let omega = 1.3;
        let h = CMatrix::from_row_major(vec![ZERO, (omega / 2.0).into(), (omega / 2.0).into(), ZERO]).unwrap();
        for dt in [0.01, 0.5, 2.0, 7.0] {
            let u = step_propagator(&h, dt).unwrap();
            assert!(u.max_abs_diff(&sigma_x_rotation(omega, dt)) < 1e-14);
        }
    }

    #[test]
    fn rejects_non_positive_dt() {
        assert!(step_propagator(&CMatrix::identity(2), 0.0).is_err());
    }

    #[test]
    fn factored_step_matches_dense_route() {
        for resonant_only in [false, true] {
            let p = SystemParams { resonant_only, ..SystemParams::standard(300.0) };
            let amps = [0.8, -0.35, 0.6];
            let t = 17.3;
            let el = MatrixElements::new(p.eta, p.n_max);
            let mut b = Coupling::zeros(p.levels());
            b.fill(&p, &el, amps, t);
            let dt = 0.9;
            let step = Step::new(b, dt).unwrap();
            let dense = step_propagator(&assemble_hamiltonian(&p, amps, t), dt).unwrap();
            let mut ws = Workspace::new(p.levels());
            for c in 0..p.dim() {
                let mut e = StateVector { amplitudes: vec![ZERO; p.dim()] };
                e.amplitudes[c] = 1.0.into();
                let (mut d, mut u) = e.split();
                step.apply(&mut d, &mut u, &mut ws, false);
                let got = StateVector::join(&d, &u);
                for r in 0..p.dim() {
                    assert!((got.amplitudes[r] - dense[(r, c)]).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn zero_pulse_is_identity() {
        let p = SystemParams::standard(300.0);
        let pulses = PulseSet::zeros(p.n_steps);
        let b = evolve_basis(&p, &pulses, 3).unwrap();
        for (n, s) in b.finals.iter().enumerate() {
            let e = StateVector::basis(&p, BasisIndex::down(n));
            assert!(s.amplitudes.iter().zip(&e.amplitudes).all(|(a, b)| (a - b).norm() < 1e-12));
        }
    }

    #[test]
    fn carrier_pi_pulse_at_eta_zero() {
        let mut p = SystemParams { eta: 0.0, resonant_only: true, ..SystemParams::standard(1.0) };
        p.total_time = PI / p.omega_0;
        p.n_steps = 50;
        let pulses = PulseSet::constant(p.n_steps, [1.0, 0.0, 0.0]);
        let out = evolve(&p, &pulses, &StateVector::basis(&p, BasisIndex::down(0))).unwrap();
        assert!((out.population(BasisIndex::up(0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blue_sideband_rabi_oracle() {
        let p = SystemParams { resonant_only: true, n_steps: 200, ..SystemParams::standard(60.0) };
        let pulses = PulseSet::constant(p.n_steps, [0.0, 1.0, 0.0]);
        for n in 0..4 {
            let rabi = p.omega_0 * matrix_element(n, 1, p.eta).unwrap().norm();
            let mut sub = p;
            for steps in [1, 37, 200] {
                sub.n_steps = steps;
                sub.total_time = p.dt() * steps as f64;
                let pl = PulseSet::constant(steps, [0.0, 1.0, 0.0]);
                let out = evolve(&sub, &pl, &StateVector::basis(&sub, BasisIndex::down(n))).unwrap();
                let expect = (rabi * sub.total_time / 2.0).sin().powi(2);
                assert!((out.population(BasisIndex::up(n + 1)) - expect).abs() < 1e-8);
            }
        }
        let _ = pulses;
    }

    #[test]
    fn time_reversal_returns_initial_state() {
        let p = SystemParams::standard(120.0);
        let mut pulses = PulseSet::zeros(p.n_steps);
        for j in 1..p.n_steps {
            let t = p.time(j);
            pulses.field_mut(Field::Carrier)[j] = 0.7 * (0.05 * t).sin();
            pulses.field_mut(Field::Blue)[j] = -0.4 * (0.11 * t).cos();
            pulses.field_mut(Field::Red)[j] = 0.9 * (0.02 * t).sin();
        }
        let seq = StepSequence::build(&p, &pulses).unwrap();
        let psi0 = StateVector::basis(&p, BasisIndex::down(2));
        let psi_t = seq.apply(&psi0);
        let direct = evolve(&p, &pulses, &psi0).unwrap();
        assert_eq!(psi_t, direct);
        let back = seq.apply_adjoint(&psi_t);
        for (a, b) in back.amplitudes.iter().zip(&psi0.amplitudes) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn evolve_basis_rejects_bad_n() {
        let p = SystemParams::standard(100.0);
        let z = PulseSet::zeros(p.n_steps);
        assert!(evolve_basis(&p, &z, 0).is_err());
        assert!(evolve_basis(&p, &z, 16).is_err());
        assert!(evolve_basis(&p, &PulseSet::zeros(10), 2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn dense_step_is_unitary(c in -1.0f64..1.0, b in -1.0f64..1.0, r in -1.0f64..1.0, t in 0.0f64..300.0, dt in 0.01f64..3.0) {
            let p = SystemParams::standard(300.0);
            let u = step_propagator(&assemble_hamiltonian(&p, [c, b, r], t), dt).unwrap();
            prop_assert!(u.unitarity_defect() < 1e-12);
        }
    }
}
