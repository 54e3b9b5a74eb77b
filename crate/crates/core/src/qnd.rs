//! Phonon-number filter sequence on density matrices with ideal shelving.
//!
//! Steps: (a) prepare `|↓⟩⟨↓| ⊗ ρ_ho`, (b) map `U_m`, (c) shelve spin-down to
//! `a1`, (d) unmap `U_m†`, (e) phonon channel, (f) map `U_m'`, (g) shelve
//! spin-down to `a2`, (h) read the remaining in-trap population.

use alloc::vec::Vec;

#[allow(unused_imports)] // float math comes from libm when std is absent
use num_traits::Float;
use num_complex::Complex64;

use crate::error::Error;
use crate::linalg::{CMatrix, ONE, ZERO};
use crate::model::{BasisIndex, PulseSet, Spin, SystemParams};
use crate::propagator::StepSequence;

/// Spin ⊗ Fock density matrix plus the two shelf populations.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    /// Indexed like the state vectors: `2n + spin`.
    pub rho: CMatrix,
    pub shelf_a1: f64,
    pub shelf_a2: f64,
}

impl DensityMatrix {
    /// `|↓⟩⟨↓| ⊗ ρ_ho` with empty shelves.
    pub fn spin_down(rho_ho: &CMatrix) -> Self {
        let levels = rho_ho.dim();
        let rho = CMatrix::from_fn(2 * levels, |i, j| {
            if i % 2 == 0 && j % 2 == 0 {
                rho_ho[(i / 2, j / 2)]
            } else {
                ZERO
            }
        });
        Self { rho, shelf_a1: 0.0, shelf_a2: 0.0 }
    }

    pub fn levels(&self) -> usize {
        self.rho.dim() / 2
    }

    pub fn in_trap(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn total(&self) -> f64 {
        self.in_trap() + self.shelf_a1 + self.shelf_a2
    }

    fn conjugate(&mut self, u: &CMatrix) {
        self.rho = u.matmul(&self.rho).matmul(&u.adjoint());
    }

    /// Removes the spin-down block and its coherences; returns its trace.
    fn shelve_down(&mut self) -> f64 {
        let dim = self.rho.dim();
        let mut moved = 0.0;
        for i in (0..dim).step_by(2) {
            moved += self.rho[(i, i)].re;
            for j in 0..dim {
                self.rho[(i, j)] = ZERO;
                self.rho[(j, i)] = ZERO;
            }
        }
        moved
    }

    /// Fock-factor reduction `Tr_spin ρ`.
    pub fn phonon_state(&self) -> CMatrix {
        CMatrix::from_fn(self.levels(), |a, b| self.rho[(2 * a, 2 * b)] + self.rho[(2 * a + 1, 2 * b + 1)])
    }
}

/// Kraus representation of a process on the Fock factor.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhononChannel {
    kraus: Vec<CMatrix>,
}

impl PhononChannel {
    /// Checks shapes and `Σ K†K = 1` to `1e−10`.
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self, Error> {
        let first = kraus.first().ok_or(Error::InvalidParameter { name: "channel", reason: "no Kraus operators" })?;
        let dim = first.dim();
        let mut sum = CMatrix::zeros(dim);
        for k in &kraus {
            if k.dim() != dim {
                return Err(Error::ShapeMismatch { expected: dim, found: k.dim() });
            }
            sum = sum.add(&k.adjoint().matmul(k));
        }
        let defect = sum.max_abs_diff(&CMatrix::identity(dim));
        if !(defect <= 1e-10) {
            return Err(Error::ChannelIncomplete { defect });
        }
        Ok(Self { kraus })
    }

    pub fn identity(levels: usize) -> Self {
        Self { kraus: alloc::vec![CMatrix::identity(levels)] }
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn levels(&self) -> usize {
        self.kraus[0].dim()
    }

    /// `L(ρ) = Σ K ρ K†` on a Fock-space matrix.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(rho.dim());
        for k in &self.kraus {
            out = out.add(&k.matmul(rho).matmul(&k.adjoint()));
        }
        out
    }

    /// Same, acting as `1_spin ⊗ L` on the joint matrix.
    fn apply_joint(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(rho.dim());
        for k in &self.kraus {
            let big = CMatrix::from_fn(rho.dim(), |i, j| if i % 2 == j % 2 { k[(i / 2, j / 2)] } else { ZERO });
            out = out.add(&big.matmul(rho).matmul(&big.adjoint()));
        }
        out
    }
}

/// Source of the full mapping unitaries `U_m(T)` on spin ⊗ Fock.
pub trait MappingUnitaries {
    fn levels(&self) -> usize;
    fn unitary(&self, m: usize) -> Result<CMatrix, Error>;
}

/// Perfect maps: `|↓,m⟩ ↔ i|↑,m⟩`, every other basis state untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdealMaps {
    pub levels: usize,
}

impl MappingUnitaries for IdealMaps {
    fn levels(&self) -> usize {
        self.levels
    }

    fn unitary(&self, m: usize) -> Result<CMatrix, Error> {
        RotationMaps { levels: self.levels, fraction: 1.0 }.unitary(m)
    }
}

/// Imperfect maps: rotation by `fraction·π` between `|↓,m⟩` and `|↑,m⟩`, so the
/// target flips with probability `sin²(fraction·π/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMaps {
    pub levels: usize,
    pub fraction: f64,
}

impl MappingUnitaries for RotationMaps {
    fn levels(&self) -> usize {
        self.levels
    }

    fn unitary(&self, m: usize) -> Result<CMatrix, Error> {
        if m >= self.levels {
            return Err(Error::InvalidLevel { m, n: self.levels });
        }
        let half = self.fraction * core::f64::consts::FRAC_PI_2;
        let (s, c) = Float::sin_cos(half);
        let mut u = CMatrix::identity(2 * self.levels);
        let (d, up) = (BasisIndex::down(m).flat(), BasisIndex::up(m).flat());
        u[(d, d)] = Complex64::new(c, 0.0);
        u[(up, up)] = Complex64::new(c, 0.0);
        u[(d, up)] = Complex64::new(0.0, s);
        u[(up, d)] = Complex64::new(0.0, s);
        Ok(u)
    }
}

/// Maps obtained by propagating stored pulses, one pulse set per level.
#[derive(Debug, Clone)]
pub struct PropagatedMaps {
    levels: usize,
    unitaries: Vec<(usize, CMatrix)>,
}

impl PropagatedMaps {
    pub fn new(params: &SystemParams, pulses: &[(usize, PulseSet)]) -> Result<Self, Error> {
        let unitaries = pulses
            .iter()
            .map(|(m, p)| StepSequence::build(params, p).map(|s| (*m, s.unitary())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { levels: params.levels(), unitaries })
    }
}

impl MappingUnitaries for PropagatedMaps {
    fn levels(&self) -> usize {
        self.levels
    }

    fn unitary(&self, m: usize) -> Result<CMatrix, Error> {
        self.unitaries
            .iter()
            .find(|(k, _)| *k == m)
            .map(|(_, u)| u.clone())
            .ok_or(Error::InvalidParameter { name: "m", reason: "no pulse stored for this level" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepTrace {
    /// `'a'` through `'h'`.
    pub step: char,
    pub in_trap: f64,
    pub shelf_a1: f64,
    pub shelf_a2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub p_f: f64,
    pub state: DensityMatrix,
    pub trace: Vec<StepTrace>,
}

fn check_rho_ho(rho_ho: &CMatrix, levels: usize) -> Result<(), Error> {
    if rho_ho.dim() != levels {
        return Err(Error::ShapeMismatch { expected: levels, found: rho_ho.dim() });
    }
    if rho_ho.hermiticity_defect() > 1e-10 || (rho_ho.trace() - ONE).norm() > 1e-10 {
        return Err(Error::InvalidParameter { name: "rho_ho", reason: "not a unit-trace Hermitian matrix" });
    }
    Ok(())
}

fn record(trace: &mut Vec<StepTrace>, step: char, s: &DensityMatrix) {
    trace.push(StepTrace { step, in_trap: s.in_trap(), shelf_a1: s.shelf_a1, shelf_a2: s.shelf_a2 });
}

/// Runs steps (a)–(h) and returns `P_f`, the final state and per-step traces.
pub fn run_filter_sequence(
    rho_ho: &CMatrix,
    m: usize,
    m_prime: usize,
    channel: &PhononChannel,
    maps: &impl MappingUnitaries,
) -> Result<FilterOutcome, Error> {
    let levels = maps.levels();
    check_rho_ho(rho_ho, levels)?;
    if channel.levels() != levels {
        return Err(Error::ShapeMismatch { expected: levels, found: channel.levels() });
    }
    let u_m = maps.unitary(m)?;
    let u_mp = maps.unitary(m_prime)?;
    let mut trace = Vec::with_capacity(8);

    let mut s = DensityMatrix::spin_down(rho_ho);
    record(&mut trace, 'a', &s);
    s.conjugate(&u_m);
    record(&mut trace, 'b', &s);
    s.shelf_a1 += s.shelve_down();
    record(&mut trace, 'c', &s);
    s.conjugate(&u_m.adjoint());
    record(&mut trace, 'd', &s);
    s.rho = channel.apply_joint(&s.rho);
    record(&mut trace, 'e', &s);
    s.conjugate(&u_mp);
    record(&mut trace, 'f', &s);
    s.shelf_a2 += s.shelve_down();
    record(&mut trace, 'g', &s);
    let p_f = s.in_trap();
    record(&mut trace, 'h', &s);
    Ok(FilterOutcome { p_f, state: s, trace })
}

/// `⟨m|ρ_ho|m⟩ · ⟨m'|L(|m⟩⟨m|)|m'⟩`.
pub fn closed_form_p_f(rho_ho: &CMatrix, m: usize, m_prime: usize, channel: &PhononChannel) -> f64 {
    let mut proj = CMatrix::zeros(channel.levels());
    proj[(m, m)] = ONE;
    rho_ho[(m, m)].re * channel.apply(&proj)[(m_prime, m_prime)].re
}

/// Steps (a)–(c) only: the in-trap population after the first shelving.
pub fn initial_population_measurement(rho_ho: &CMatrix, m: usize, maps: &impl MappingUnitaries) -> Result<f64, Error> {
    check_rho_ho(rho_ho, maps.levels())?;
    let mut s = DensityMatrix::spin_down(rho_ho);
    s.conjugate(&maps.unitary(m)?);
    s.shelf_a1 += s.shelve_down();
    Ok(s.in_trap())
}

/// Thermal Fock state with mean occupation `nbar`, truncated and renormalized.
pub fn thermal_state(nbar: f64, levels: usize) -> CMatrix {
    let q = nbar / (1.0 + nbar);
    let w: Vec<f64> = (0..levels).map(|n| Float::powi(q, n as i32)).collect();
    let z: f64 = w.iter().sum();
    CMatrix::from_fn(levels, |i, j| if i == j { Complex64::new(w[i] / z, 0.0) } else { ZERO })
}

/// Spin population in `state` after the sequence, for diagnostics.
pub fn spin_population(state: &DensityMatrix, spin: Spin) -> f64 {
    (0..state.levels()).map(|n| state.rho[(BasisIndex::new(spin, n).flat(), BasisIndex::new(spin, n).flat())].re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::HermitianEigen;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const L: usize = 6;

    fn pure(levels: usize, n: usize) -> CMatrix {
        let mut r = CMatrix::zeros(levels);
        r[(n, n)] = ONE;
        r
    }

    fn random_matrix(rng: &mut ChaCha8Rng, dim: usize) -> CMatrix {
        CMatrix::from_fn(dim, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_rho(rng: &mut ChaCha8Rng, dim: usize) -> CMatrix {
        let a = random_matrix(rng, dim);
        let p = a.matmul(&a.adjoint());
        let tr = p.trace().re;
        p.scale(Complex64::new(1.0 / tr, 0.0))
    }

    /// `K_i = A_i S^{−1/2}` with `S = Σ A_i†A_i`.
    fn random_channel(rng: &mut ChaCha8Rng, dim: usize, count: usize) -> PhononChannel {
        let a: Vec<CMatrix> = (0..count).map(|_| random_matrix(rng, dim)).collect();
        let s = a.iter().fold(CMatrix::zeros(dim), |acc, k| acc.add(&k.adjoint().matmul(k)));
        let inv_sqrt = HermitianEigen::new(&s).unwrap().apply_fn(|x| Complex64::new(1.0 / x.sqrt(), 0.0));
        PhononChannel::new(a.iter().map(|k| k.matmul(&inv_sqrt)).collect()).unwrap()
    }

    fn lowering_shift(levels: usize) -> PhononChannel {
        // |n⟩ → |n−1⟩ with |0⟩ → |L−1⟩: unitary, so one Kraus operator suffices
        let k = CMatrix::from_fn(levels, |i, j| if (i + 1) % levels == j { ONE } else { ZERO });
        PhononChannel::new(vec![k]).unwrap()
    }

    #[test]
    fn identity_channel_same_level_fluoresces() {
        let maps = IdealMaps { levels: L };
        for m in 0..L {
            let out = run_filter_sequence(&pure(L, m), m, m, &PhononChannel::identity(L), &maps).unwrap();
            assert!((out.p_f - 1.0).abs() < 1e-14);
            let other = run_filter_sequence(&pure(L, m), m, (m + 1) % L, &PhononChannel::identity(L), &maps).unwrap();
            assert!(other.p_f.abs() < 1e-14);
        }
    }

    #[test]
    fn thermal_state_through_lowering_channel() {
        let rho = thermal_state(1.0, L);
        let ch = lowering_shift(L);
        let maps = IdealMaps { levels: L };
        // weight of level m in the truncated geometric distribution, then L(|m⟩⟨m|) = |m−1⟩⟨m−1|
        let z: f64 = (0..L).map(|n| 0.5f64.powi(n as i32)).sum();
        for m in 0..L {
            let w = 0.5f64.powi(m as i32) / z;
            let target = (m + L - 1) % L;
            for mp in 0..L {
                let expect = if mp == target { w } else { 0.0 };
                let out = run_filter_sequence(&rho, m, mp, &ch, &maps).unwrap();
                assert!((out.p_f - expect).abs() < 1e-12, "m={m} m'={mp}");
                assert!((out.p_f - closed_form_p_f(&rho, m, mp, &ch)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn initial_measurement_reads_level_weight() {
        let maps = IdealMaps { levels: L };
        assert!((initial_population_measurement(&pure(L, 2), 2, &maps).unwrap() - 1.0).abs() < 1e-14);
        assert!(initial_population_measurement(&pure(L, 3), 2, &maps).unwrap().abs() < 1e-14);
        let rho = thermal_state(1.0, L);
        let z = (1.0 - 0.5f64.powi(L as i32)) / 0.5;
        for m in 0..L {
            let expect = 0.5f64.powi(m as i32) / z;
            assert!((initial_population_measurement(&rho, m, &maps).unwrap() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn probability_is_conserved_at_every_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_rho(&mut rng, L);
        let ch = random_channel(&mut rng, L, 3);
        let out = run_filter_sequence(&rho, 1, 4, &ch, &RotationMaps { levels: L, fraction: 0.7 }).unwrap();
        assert_eq!(out.trace.iter().map(|t| t.step).collect::<alloc::string::String>(), "abcdefgh");
        for t in &out.trace {
            assert!((t.in_trap + t.shelf_a1 + t.shelf_a2 - 1.0).abs() < 1e-10);
        }
        assert!(out.state.rho.hermiticity_defect() < 1e-12);
        let eig = HermitianEigen::new(&out.state.rho).unwrap();
        assert!(eig.values.iter().all(|&v| v >= -1e-12));
        assert!(spin_population(&out.state, Spin::Down).abs() < 1e-15);
        assert!((spin_population(&out.state, Spin::Up) - out.p_f).abs() < 1e-12);
        assert!((out.state.phonon_state().trace().re - out.p_f).abs() < 1e-12);
    }

    #[test]
    fn protocol_error_vanishes_as_maps_improve() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random_rho(&mut rng, L);
        let ch = random_channel(&mut rng, L, 2);
        let errors: Vec<f64> = [0.5, 0.7, 0.9, 0.97, 0.99, 1.0]
            .iter()
            .map(|&fraction| {
                let out = run_filter_sequence(&rho, 2, 3, &ch, &RotationMaps { levels: L, fraction }).unwrap();
                (out.p_f - closed_form_p_f(&rho, 2, 3, &ch)).abs()
            })
            .collect();
        assert!(errors.windows(2).all(|w| w[1] <= w[0]), "{errors:?}");
        assert!(errors[5] < 1e-12);
    }

    #[test]
    fn zero_pulse_maps_shelve_everything() {
        let p = SystemParams { n_steps: 10, ..SystemParams::standard(300.0) };
        let maps = PropagatedMaps::new(&p, &[(0, PulseSet::zeros(10))]).unwrap();
        let rho = thermal_state(2.0, p.levels());
        let out = run_filter_sequence(&rho, 0, 0, &PhononChannel::identity(p.levels()), &maps).unwrap();
        assert!(out.p_f.abs() < 1e-14);
        assert!((out.state.shelf_a1 - 1.0).abs() < 1e-12);
        assert!(maps.unitary(1).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let maps = IdealMaps { levels: L };
        let k = CMatrix::identity(L).scale(Complex64::new(0.9, 0.0));
        assert!(matches!(PhononChannel::new(vec![k]), Err(Error::ChannelIncomplete { .. })));
        assert!(PhononChannel::new(vec![]).is_err());
        assert!(run_filter_sequence(&pure(L + 1, 0), 0, 0, &PhononChannel::identity(L), &maps).is_err());
        assert!(run_filter_sequence(&pure(L, 0), 0, 0, &PhononChannel::identity(L + 1), &maps).is_err());
        let not_unit = CMatrix::identity(L);
        assert!(run_filter_sequence(&not_unit, 0, 0, &PhononChannel::identity(L), &maps).is_err());
        assert!(run_filter_sequence(&pure(L, 0), L, 0, &PhononChannel::identity(L), &maps).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(120))]
        #[test]
        fn ideal_sequence_matches_closed_form(seed in any::<u64>(), m in 0usize..L, mp in 0usize..L, count in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_rho(&mut rng, L);
            let ch = random_channel(&mut rng, L, count);
            let out = run_filter_sequence(&rho, m, mp, &ch, &IdealMaps { levels: L }).unwrap();
            prop_assert!((out.p_f - closed_form_p_f(&rho, m, mp, &ch)).abs() < 1e-10);
        }
    }
}
