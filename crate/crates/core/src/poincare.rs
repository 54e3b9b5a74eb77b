//! Waiting times for a constant blue-sideband drive.
//!
//! Under a resonant blue drive the ladders `|↓,n⟩ ↔ |↑,n+1⟩` decouple and each
//! acts as a pointer rotating at `Ω_n = Ω0·|M_{n,n+1}|`. The map for level `m`
//! is reached when pointer `m` sits near angle π and all others near 0.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

#[allow(unused_imports)] // float math comes from libm when std is absent
use num_traits::Float;

use crate::error::Error;
use crate::model::matrix_element;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointerSystem {
    /// `Ω_n` for `n = 0..N`, rad/μs.
    pub frequencies: Vec<f64>,
    pub m: usize,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Condition {
    Fidelity,
    Uniform,
}

/// Outcome of a successful waiting-time scan.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WaitingTime {
    /// First crossing, refined by bisection, μs.
    pub t: f64,
    /// First grid time satisfying the condition, μs.
    pub grid_t: f64,
}

/// Shortest angular distance between `a` and `b`, in `[0, π]`.
pub fn circdist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

impl PointerSystem {
    /// Pointers of the first `n` ladders for Lamb–Dicke parameter `eta`.
    pub fn new(eta: f64, omega_0: f64, n: usize, m: usize, epsilon: f64) -> Result<Self, Error> {
        let frequencies = (0..n)
            .map(|k| matrix_element(k, 1, eta).map(|e| omega_0 * e.norm()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_frequencies(frequencies, m, epsilon)
    }

    pub fn from_frequencies(frequencies: Vec<f64>, m: usize, epsilon: f64) -> Result<Self, Error> {
        if frequencies.is_empty() {
            return Err(Error::InvalidParameter { name: "N", reason: "need at least one pointer" });
        }
        if m >= frequencies.len() {
            return Err(Error::InvalidLevel { m, n: frequencies.len() });
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter { name: "epsilon", reason: "must be positive" });
        }
        if frequencies.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter { name: "frequencies", reason: "must be positive and finite" });
        }
        Ok(Self { frequencies, m, epsilon })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    fn fastest(&self) -> f64 {
        self.frequencies.iter().copied().fold(0.0, f64::max)
    }

    /// Grid spacing used by default: `0.005·2π/Ω_max`.
    pub fn default_dt(&self) -> f64 {
        0.005 * TAU / self.fastest()
    }

    /// `Δφ_n(t)`: half the angular miss of pointer `n` from its goal.
    pub fn pointer_deviations(&self, t: f64) -> Vec<f64> {
        self.frequencies.iter().enumerate().map(|(n, w)| self.deviation_at(n, w * t)).collect()
    }

    #[inline]
    fn deviation_at(&self, n: usize, theta: f64) -> f64 {
        0.5 * circdist(theta, if n == self.m { PI } else { 0.0 })
    }

    /// `Δφ_m² + Σ_{n≠m} Δφ_n²/(N−1)`; just `Δφ_m²` for a single pointer.
    fn fidelity_measure(&self, dev: &[f64]) -> f64 {
        let others = self.len().saturating_sub(1).max(1) as f64;
        let rest: f64 = dev.iter().enumerate().filter(|&(n, _)| n != self.m).map(|(_, d)| d * d).sum();
        dev[self.m] * dev[self.m] + rest / others
    }

    fn uniform_measure(dev: &[f64]) -> f64 {
        dev.iter().copied().fold(0.0, f64::max)
    }

    /// `T_P` from `1/T_P = (ε/2)^{(N−1)/2}/(2π)^N · Σ Ω_n`.
    pub fn analytic_recurrence_time(&self) -> f64 {
        let n = self.len() as f64;
        let sum: f64 = self.frequencies.iter().sum();
        TAU.powf(n) / ((self.epsilon / 2.0).powf((n - 1.0) / 2.0) * sum)
    }

    /// First time with `Δφ_m² + Σ_{n≠m} Δφ_n²/(N−1) ≤ ε`.
    pub fn waiting_time_fidelity(&self, t_max: f64, dt: f64) -> Result<WaitingTime, Error> {
        self.scan(t_max, dt, Condition::Fidelity)
    }

    /// First time with `max_n Δφ_n ≤ √(ε/2)`.
    pub fn waiting_time_uniform(&self, t_max: f64, dt: f64) -> Result<WaitingTime, Error> {
        self.scan(t_max, dt, Condition::Uniform)
    }

    fn measure(&self, cond: Condition, dev: &[f64]) -> f64 {
        match cond {
            Condition::Fidelity => self.fidelity_measure(dev),
            Condition::Uniform => Self::uniform_measure(dev),
        }
    }

    fn bound(&self, cond: Condition) -> f64 {
        match cond {
            Condition::Fidelity => self.epsilon,
            Condition::Uniform => Float::sqrt(self.epsilon / 2.0),
        }
    }

    /// Lower bound on the measure from the target deviation alone.
    fn target_only(cond: Condition, dm: f64) -> f64 {
        match cond {
            Condition::Fidelity => dm * dm,
            Condition::Uniform => dm,
        }
    }

    fn scan(&self, t_max: f64, dt: f64, cond: Condition) -> Result<WaitingTime, Error> {
        if !(dt > 0.0) || dt > 0.01 * TAU / self.fastest() {
            return Err(Error::InvalidParameter { name: "dt", reason: "must be positive and at most 0.01·2π/Ω_max" });
        }
        if !(t_max > 0.0) {
            return Err(Error::InvalidParameter { name: "t_max", reason: "must be positive" });
        }
        // phases advance incrementally and are re-anchored every RESYNC steps
        const RESYNC: u64 = 4096;
        let n = self.len();
        let bound = self.bound(cond);
        let incr: Vec<f64> = self.frequencies.iter().map(|w| (w * dt).rem_euclid(TAU)).collect();
        let goal: Vec<f64> = (0..n).map(|k| if k == self.m { PI } else { 0.0 }).collect();
        let mut phase = alloc::vec![0.0; n];
        let mut dev = alloc::vec![0.0; n];
        let steps = Float::floor(t_max / dt) as u64;
        let mut best = f64::INFINITY;
        for k in 1..=steps {
            if k % RESYNC == 0 {
                let t = k as f64 * dt;
                for (p, w) in phase.iter_mut().zip(&self.frequencies) {
                    *p = (w * t).rem_euclid(TAU);
                }
            } else {
                for (p, d) in phase.iter_mut().zip(&incr) {
                    *p += d;
                    if *p >= TAU {
                        *p -= TAU;
                    }
                }
            }
            let lower = Self::target_only(cond, 0.5 * circdist(phase[self.m], PI));
            if lower > bound {
                best = best.min(lower);
                continue;
            }
            for i in 0..n {
                dev[i] = 0.5 * circdist(phase[i], goal[i]);
            }
            let v = self.measure(cond, &dev);
            if v <= bound {
                let grid_t = k as f64 * dt;
                let t = self.refine(grid_t - dt, grid_t, cond);
                return Ok(WaitingTime { t, grid_t });
            }
            best = best.min(v);
        }
        Err(Error::WaitingTimeNotFound { t_max, best })
    }

    /// Bisects `[lo, hi]` (condition false at `lo`, true at `hi`) and returns
    /// the upper end once the bracket is below `1e−12` relative.
    fn refine(&self, mut lo: f64, mut hi: f64, cond: Condition) -> f64 {
        let bound = self.bound(cond);
        for _ in 0..200 {
            if hi - lo <= 1e-12 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.measure(cond, &self.pointer_deviations(mid)) <= bound {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}
