//! Mapping fidelity `F(m, N) = F↑ · F↓`.
//!
//! `F↑` is the spin-up probability of the evolved target state `|ψ_m(T)⟩`,
//! `F↓` the mean spin-down probability of the other `N − 1` states. Only the
//! spin is read out, so the primary figures count population on every
//! retained Fock level; the variant restricted to `k < N` is kept alongside.

use alloc::vec::Vec;

use crate::error::Error;
use crate::model::{BasisIndex, Spin};
use crate::propagator::{EvolvedBasis, StateVector};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MapReport {
    pub m: usize,
    #[cfg_attr(feature = "serde", serde(rename = "N"))]
    pub n: usize,
    #[cfg_attr(feature = "serde", serde(rename = "F"))]
    pub f: f64,
    #[cfg_attr(feature = "serde", serde(rename = "F_up"))]
    pub f_up: f64,
    #[cfg_attr(feature = "serde", serde(rename = "F_down"))]
    pub f_down: f64,
    /// Spin-up probability of `|ψ_n(T)⟩` for each initial level `n < N`.
    pub p_up: Vec<f64>,
    /// Same figures with the projector restricted to Fock levels `k < N`.
    pub restricted: RestrictedFidelity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RestrictedFidelity {
    #[cfg_attr(feature = "serde", serde(rename = "F"))]
    pub f: f64,
    #[cfg_attr(feature = "serde", serde(rename = "F_up"))]
    pub f_up: f64,
    #[cfg_attr(feature = "serde", serde(rename = "F_down"))]
    pub f_down: f64,
}

impl MapReport {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.f
    }
}

fn spin_population(state: &StateVector, spin: Spin, k_limit: usize) -> f64 {
    (0..k_limit).map(|k| state.population(BasisIndex::new(spin, k))).sum()
}

/// Fidelity of the evolved basis as a map flipping the spin for level `m` only.
pub fn fidelity(basis: &EvolvedBasis, m: usize, n: usize) -> Result<MapReport, Error> {
    if n < 2 {
        return Err(Error::InvalidParameter { name: "N", reason: "at least two levels are needed (F↓ averages over N − 1)" });
    }
    if m >= n {
        return Err(Error::InvalidLevel { m, n });
    }
    if n > basis.len() {
        return Err(Error::ShapeMismatch { expected: n, found: basis.len() });
    }
    let levels = basis.params.levels();
    let p_up: Vec<f64> = basis.finals[..n].iter().map(|s| spin_population(s, Spin::Up, levels)).collect();
    let f_up = p_up[m];
    let f_down = p_up.iter().enumerate().filter(|&(k, _)| k != m).map(|(_, p)| 1.0 - p).sum::<f64>() / (n - 1) as f64;

    let k_lim = n.min(levels);
    let r_up = spin_population(&basis.finals[m], Spin::Up, k_lim);
    let r_down = basis.finals[..n]
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != m)
        .map(|(_, s)| spin_population(s, Spin::Down, k_lim))
        .sum::<f64>()
        / (n - 1) as f64;

    Ok(MapReport {
        m,
        n,
        f: f_up * f_down,
        f_up,
        f_down,
        p_up,
        restricted: RestrictedFidelity { f: r_up * r_down, f_up: r_up, f_down: r_down },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;
    use crate::model::{matrix_element, PulseSet, SystemParams};
    use crate::propagator::evolve_basis;
    use alloc::vec;
    use core::f64::consts::PI;
    use num_complex::Complex64;

    fn synthetic(params: &SystemParams, n: usize, m: usize) -> EvolvedBasis {
        // permutation-plus-phase map: |↓,m⟩ → i|↑,m⟩, every other |↓,k⟩ kept
        let finals = (0..n)
            .map(|k| {
                let mut a = vec![ZERO; params.dim()];
                if k == m {
                    a[BasisIndex::up(k).flat()] = Complex64::new(0.0, 1.0);
                } else {
                    a[BasisIndex::down(k).flat()] = Complex64::new(-1.0, 0.0);
                }
                StateVector { amplitudes: a }
            })
            .collect();
        EvolvedBasis { finals, params: *params, pulse_hash: 0 }
    }

    #[test]
    fn identity_evolution_has_zero_fidelity() {
        let p = SystemParams::standard(300.0);
        let b = evolve_basis(&p, &PulseSet::zeros(p.n_steps), 10).unwrap();
        let r = fidelity(&b, 0, 10).unwrap();
        assert_eq!((r.f_up, r.f_down, r.f), (0.0, 1.0, 0.0));
    }

    #[test]
    fn global_carrier_pi_pulse_flips_everything() {
        let mut p = SystemParams { eta: 0.0, resonant_only: true, n_steps: 40, ..SystemParams::standard(1.0) };
        p.total_time = PI / p.omega_0;
        let b = evolve_basis(&p, &PulseSet::constant(p.n_steps, [1.0, 0.0, 0.0]), 4).unwrap();
        let r = fidelity(&b, 1, 4).unwrap();
        assert!((r.f_up - 1.0).abs() < 1e-12);
        assert!(r.f_down.abs() < 1e-12);
        assert!(r.f.abs() < 1e-12);
    }

    #[test]
    fn blue_sideband_pi_time_on_ground_state() {
        let base = SystemParams { resonant_only: true, n_steps: 100, ..SystemParams::standard(1.0) };
        let o01 = base.omega_0 * matrix_element(0, 1, base.eta).unwrap().norm();
        let o12 = base.omega_0 * matrix_element(1, 1, base.eta).unwrap().norm();
        let t = PI / o01;
        let p = SystemParams { total_time: t, ..base };
        let b = evolve_basis(&p, &PulseSet::constant(p.n_steps, [0.0, 1.0, 0.0]), 2).unwrap();
        let r = fidelity(&b, 0, 2).unwrap();
        let expect_down = (o12 * t / 2.0).cos().powi(2);
        assert!((r.f_up - 1.0).abs() < 1e-10);
        assert!((r.f_down - expect_down).abs() < 1e-10);
        assert!((r.f - expect_down).abs() < 1e-10);
    }

    #[test]
    fn perfect_synthetic_map_scores_one() {
        let p = SystemParams::standard(300.0);
        for m in 0..10 {
            let r = fidelity(&synthetic(&p, 10, m), m, 10).unwrap();
            assert_eq!(r.f, 1.0);
            assert_eq!(r.restricted.f, 1.0);
        }
    }

    #[test]
    fn relabeling_target_only_moves_which_entry_is_f_up() {
        let p = SystemParams { n_steps: 200, ..SystemParams::standard(100.0) };
        let mut pulses = PulseSet::zeros(p.n_steps);
        for j in 1..p.n_steps {
            pulses.samples[0][j] = 0.5 * (0.1 * p.time(j)).sin();
            pulses.samples[2][j] = 0.8 * (0.03 * p.time(j)).cos();
        }
        let b = evolve_basis(&p, &pulses, 5).unwrap();
        let base = fidelity(&b, 0, 5).unwrap();
        for m in 1..5 {
            let r = fidelity(&b, m, 5).unwrap();
            assert_eq!(r.p_up, base.p_up);
            assert_eq!(r.f_up, base.p_up[m]);
            assert_eq!(r.f, r.f_up * r.f_down);
            // widening the projector never loses flipped population
            assert!(r.f_up >= r.restricted.f_up);
        }
    }

    #[test]
    fn rejects_bad_levels() {
        let p = SystemParams::standard(300.0);
        let b = synthetic(&p, 3, 0);
        assert!(fidelity(&b, 0, 1).is_err());
        assert_eq!(fidelity(&b, 3, 3), Err(Error::InvalidLevel { m: 3, n: 3 }));
        assert!(fidelity(&b, 0, 4).is_err());
    }
}
