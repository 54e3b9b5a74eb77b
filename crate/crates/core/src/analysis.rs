//! Diagnostics around a designed pulse: amplitude miscalibration, Fock-space
//! truncation, and how the reachable fidelity scales with `N`.

use alloc::vec::Vec;

use crate::crab::{optimize_discrete, optimize_map, OptResult, PulseMode, SearchConfig};
use crate::error::Error;
use crate::fidelity::fidelity;
use crate::model::{BasisIndex, PulseSet, Spin, SystemParams};
use crate::propagator::evolve_basis;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RobustnessCurve {
    pub xi: Vec<f64>,
    pub fidelity: Vec<f64>,
    /// `F(0) − min_ξ F(ξ)`.
    pub max_drop: f64,
    /// `max_ξ F(ξ) − min_ξ F(ξ)`.
    pub peak_to_peak: f64,
}

/// `n` uniform points on `[−half_width, half_width]`; `n` odd keeps 0 exact.
pub fn xi_grid(half_width: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return alloc::vec![0.0];
    }
    let mid = (n - 1) as f64 / 2.0;
    (0..n).map(|i| if 2 * i == n - 1 { 0.0 } else { half_width * (i as f64 - mid) / mid }).collect()
}

/// The default window: 21 points on `[−0.01, 0.01]`.
pub fn default_xi_grid() -> Vec<f64> {
    xi_grid(0.01, 21)
}

/// `F(m, N)` with every sample multiplied by `1 + ξ`. Scaled samples may
/// exceed 1; that is the miscalibration being modeled.
pub fn scan_calibration(
    pulses: &PulseSet,
    params: &SystemParams,
    m: usize,
    n: usize,
    xi: &[f64],
) -> Result<RobustnessCurve, Error> {
    if !xi.contains(&0.0) {
        return Err(Error::InvalidParameter { name: "xi_grid", reason: "must contain 0" });
    }
    let fidelity = xi
        .iter()
        .map(|&x| {
            let scaled = if x == 0.0 { pulses.clone() } else { pulses.scaled(1.0 + x) };
            evolve_basis(params, &scaled, n).and_then(|b| fidelity(&b, m, n)).map(|r| r.f)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let f0 = fidelity[xi.iter().position(|&x| x == 0.0).unwrap_or(0)];
    let lo = fidelity.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fidelity.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RobustnessCurve { xi: xi.to_vec(), fidelity, max_drop: f0 - lo, peak_to_peak: hi - lo })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TruncationReport {
    pub n_max: usize,
    pub wide_n_max: usize,
    pub f: f64,
    pub f_wide: f64,
    pub delta_f: f64,
    /// Largest `|Δ population|` over initial states, spins and Fock levels;
    /// levels beyond the narrow space count as zero there.
    pub max_population_diff: f64,
}

/// Re-evaluates `F(m, N)` with `n_max = 19` (dimension 40).
pub fn check_truncation(pulses: &PulseSet, params: &SystemParams, m: usize, n: usize) -> Result<TruncationReport, Error> {
    check_truncation_at(pulses, params, m, n, 19)
}

pub fn check_truncation_at(
    pulses: &PulseSet,
    params: &SystemParams,
    m: usize,
    n: usize,
    wide_n_max: usize,
) -> Result<TruncationReport, Error> {
    let wide = SystemParams { n_max: wide_n_max, ..*params };
    let a = evolve_basis(params, pulses, n)?;
    let b = evolve_basis(&wide, pulses, n)?;
    let (fa, fb) = (fidelity(&a, m, n)?.f, fidelity(&b, m, n)?.f);
    let mut diff: f64 = 0.0;
    for (sa, sb) in a.finals.iter().zip(&b.finals) {
        for spin in [Spin::Down, Spin::Up] {
            for k in 0..wide.levels().max(params.levels()) {
                let idx = BasisIndex::new(spin, k);
                let pa = if k < params.levels() { sa.population(idx) } else { 0.0 };
                let pb = if k < wide.levels() { sb.population(idx) } else { 0.0 };
                diff = diff.max((pa - pb).abs());
            }
        }
    }
    Ok(TruncationReport {
        n_max: params.n_max,
        wide_n_max,
        f: fa,
        f_wide: fb,
        delta_f: (fa - fb).abs(),
        max_population_diff: diff,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingRow {
    #[cfg_attr(feature = "serde", serde(rename = "N"))]
    pub n: usize,
    pub f: f64,
    pub one_minus_f: f64,
    /// Operation time of the map, μs.
    pub t_opt_us: f64,
}

/// One optimization per `N` at fixed `T`; rows plus the full results.
pub fn scaling_run(
    m: usize,
    params: &SystemParams,
    n_list: &[usize],
    config: &SearchConfig,
    mode: PulseMode,
) -> Result<(Vec<ScalingRow>, Vec<OptResult>), Error> {
    if n_list.is_empty() {
        return Err(Error::InvalidParameter { name: "N_list", reason: "must not be empty" });
    }
    let mut rows = Vec::with_capacity(n_list.len());
    let mut results = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let res = match mode {
            PulseMode::Continuous => optimize_map(m, n, params, config)?,
            PulseMode::Discrete => optimize_discrete(m, n, params, config)?,
        };
        rows.push(ScalingRow { n, f: res.report.f, one_minus_f: 1.0 - res.report.f, t_opt_us: params.total_time });
        results.push(res);
    }
    Ok((rows, results))
}

/// Places where the best fidelity rises with `N` (ideally none).
pub fn trend_inversions(rows: &[ScalingRow]) -> usize {
    rows.windows(2).filter(|w| w[1].n > w[0].n && w[1].f > w[0].f).count()
}

/// Shortest `T` on `t_grid` (μs, ascending) whose optimized map reaches
/// `F ≥ target`, with the result that got there.
pub fn shortest_time(
    m: usize,
    n: usize,
    base: &SystemParams,
    t_grid: &[f64],
    target: f64,
    config: &SearchConfig,
) -> Result<Option<(f64, OptResult)>, Error> {
    for &t in t_grid {
        let params = SystemParams { total_time: t, ..*base };
        let res = optimize_map(m, n, &params, config)?;
        if res.report.f >= target {
            return Ok(Some((t, res)));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crab::{ControlScenario, SimplexOptions};
    use crate::model::matrix_element;

    #[test]
    fn grid_has_exact_zero_and_endpoints() {
        let g = default_xi_grid();
        assert_eq!(g.len(), 21);
        assert_eq!(g[10], 0.0);
        assert_eq!((g[0], g[20]), (-0.01, 0.01));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    fn wiggly(p: &SystemParams) -> PulseSet {
        let mut s = PulseSet::zeros(p.n_steps);
        for j in 1..p.n_steps {
            let t = p.time(j);
            s.samples[0][j] = 0.4 * (0.05 * t).sin();
            s.samples[1][j] = 0.7 * (0.02 * t).cos();
            s.samples[2][j] = -0.5 * (0.031 * t).sin();
        }
        s
    }

    #[test]
    fn unperturbed_point_equals_plain_fidelity() {
        let p = SystemParams { n_steps: 200, ..SystemParams::standard(150.0) };
        let s = wiggly(&p);
        let c = scan_calibration(&s, &p, 1, 4, &xi_grid(0.01, 5)).unwrap();
        let f0 = fidelity(&evolve_basis(&p, &s, 4).unwrap(), 1, 4).unwrap().f;
        assert_eq!(c.fidelity[2], f0);
        assert!(c.max_drop >= 0.0 && c.peak_to_peak >= c.max_drop);
        assert_eq!(c, scan_calibration(&s, &p, 1, 4, &xi_grid(0.01, 5)).unwrap());
        assert!(scan_calibration(&s, &p, 1, 4, &[0.01]).is_err());
    }

    #[test]
    fn zero_pulse_curve_is_flat_zero() {
        let p = SystemParams { n_steps: 50, ..SystemParams::standard(300.0) };
        let c = scan_calibration(&PulseSet::zeros(50), &p, 0, 3, &default_xi_grid()).unwrap();
        assert!(c.fidelity.iter().all(|&f| f == 0.0));
        assert_eq!((c.max_drop, c.peak_to_peak), (0.0, 0.0));
    }

    #[test]
    fn scaling_pulses_equals_scaling_rabi_frequency() {
        let p = SystemParams { n_steps: 200, ..SystemParams::standard(150.0) };
        let s = wiggly(&p);
        for xi in [-0.01, 0.004, 0.01] {
            let a = evolve_basis(&p, &s.scaled(1.0 + xi), 4).unwrap();
            let q = SystemParams { omega_0: p.omega_0 * (1.0 + xi), ..p };
            let b = evolve_basis(&q, &s, 4).unwrap();
            for (x, y) in a.finals.iter().zip(&b.finals) {
                for (u, v) in x.amplitudes.iter().zip(&y.amplitudes) {
                    assert!((u - v).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn truncation_checks() {
        let p = SystemParams { n_steps: 100, ..SystemParams::standard(300.0) };
        let r = check_truncation(&PulseSet::zeros(100), &p, 0, 3).unwrap();
        assert_eq!((r.delta_f, r.max_population_diff), (0.0, 0.0));

        // short resonant blue drive: amplitude leaks one level per Rabi cycle at most
        let q = SystemParams { resonant_only: true, n_steps: 100, ..SystemParams::standard(1.0) };
        let t = core::f64::consts::PI / (q.omega_0 * matrix_element(0, 1, q.eta).unwrap().norm());
        let q = SystemParams { total_time: t, ..q };
        let r = check_truncation(&PulseSet::constant(100, [0.0, 1.0, 0.0]), &q, 0, 3).unwrap();
        assert!(r.delta_f < 1e-10 && r.max_population_diff < 1e-10, "{r:?}");
        assert_eq!((r.n_max, r.wide_n_max), (14, 19));
    }

    #[test]
    fn scaling_rows_and_trend() {
        let p = SystemParams { n_steps: 100, ..SystemParams::standard(300.0) };
        let cfg = SearchConfig {
            scenario: ControlScenario::CarrierRed,
            harmonics: 2,
            restarts: 1,
            simplex: SimplexOptions { max_evals: 30, ..SimplexOptions::default() },
            ..SearchConfig::default()
        };
        let (rows, res) = scaling_run(0, &p, &[2, 3], &cfg, PulseMode::Continuous).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].f, res[1].report.f);
        assert_eq!(rows[0].t_opt_us, 300.0);
        assert!((rows[0].one_minus_f + rows[0].f - 1.0).abs() < 1e-15);
        assert!(scaling_run(0, &p, &[], &cfg, PulseMode::Continuous).is_err());

        let mk = |n, f| ScalingRow { n, f, one_minus_f: 1.0 - f, t_opt_us: 1.0 };
        assert_eq!(trend_inversions(&[mk(2, 0.99), mk(3, 0.98), mk(4, 0.985), mk(5, 0.9)]), 1);
    }
}
