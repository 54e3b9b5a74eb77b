//! Chopped-random-basis pulse parameterization and its derivative-free search.
//!
//! Each active field is a truncated Fourier series with jittered frequencies
//! `ω_k = 2πk(1 + r_k)/T`, multiplied by `sin²(πt/T)` and clipped to `[−1, 1]`,
//! so every coefficient vector yields an admissible pulse. The search runs
//! Nelder–Mead over the coefficients from several seeded starting points.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // float math comes from libm when std is absent
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::fidelity::{fidelity, MapReport};
use crate::model::{Field, PulseSet, SystemParams};
use crate::propagator::evolve_basis;

/// Which drive fields the optimizer may shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ControlScenario {
    ThreeField,
    CarrierBlue,
    CarrierRed,
}

impl ControlScenario {
    pub fn fields(self) -> &'static [Field] {
        match self {
            ControlScenario::ThreeField => &[Field::Carrier, Field::Blue, Field::Red],
            ControlScenario::CarrierBlue => &[Field::Carrier, Field::Blue],
            ControlScenario::CarrierRed => &[Field::Carrier, Field::Red],
        }
    }
}

/// Continuous shaped pulses, or phase-flip pulses `sign(raw)` of unit power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum PulseMode {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CrabParams {
    pub scenario: ControlScenario,
    pub mode: PulseMode,
    /// Harmonics per field, `K`.
    pub harmonics: usize,
    /// Frequency jitters `r_k ∈ [−0.5, 0.5]`, one row of `K` per active field.
    pub jitter: Vec<Vec<f64>>,
    /// `(a_k, b_k)` pairs laid out as `[(field·K + k)·2 + {0, 1}]`.
    pub coefficients: Vec<f64>,
    /// Seed the jitters and starting coefficients were drawn from.
    pub seed: u64,
}

impl CrabParams {
    /// All-zero coefficients with unjittered frequencies.
    pub fn zeros(scenario: ControlScenario, mode: PulseMode, harmonics: usize) -> Self {
        let nf = scenario.fields().len();
        Self {
            scenario,
            mode,
            harmonics,
            jitter: vec![vec![0.0; harmonics]; nf],
            coefficients: vec![0.0; 2 * harmonics * nf],
            seed: 0,
        }
    }

    pub fn n_coefficients(&self) -> usize {
        2 * self.harmonics * self.scenario.fields().len()
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.harmonics == 0 {
            return Err(Error::InvalidParameter { name: "K", reason: "need at least one harmonic" });
        }
        let nf = self.scenario.fields().len();
        if self.coefficients.len() != self.n_coefficients() {
            return Err(Error::ShapeMismatch { expected: self.n_coefficients(), found: self.coefficients.len() });
        }
        if self.jitter.len() != nf {
            return Err(Error::ShapeMismatch { expected: nf, found: self.jitter.len() });
        }
        for row in &self.jitter {
            if row.len() != self.harmonics {
                return Err(Error::ShapeMismatch { expected: self.harmonics, found: row.len() });
            }
            if row.iter().any(|r| !(r.abs() <= 0.5)) {
                return Err(Error::InvalidParameter { name: "jitter", reason: "r_k must lie in [-0.5, 0.5]" });
            }
            let rel = relative_frequencies(row);
            for i in 0..rel.len() {
                if rel[i + 1..].contains(&rel[i]) {
                    return Err(Error::InvalidParameter { name: "jitter", reason: "frequencies of a field must be distinct" });
                }
            }
        }
        if self.mode == PulseMode::Discrete && nf != 2 {
            return Err(Error::InvalidParameter { name: "scenario", reason: "discrete pulses need exactly two fields" });
        }
        Ok(())
    }

    /// `ω_k` in rad/μs for active field `field_slot`.
    pub fn frequencies(&self, field_slot: usize, total_time: f64) -> Vec<f64> {
        relative_frequencies(&self.jitter[field_slot]).into_iter().map(|x| 2.0 * PI * x / total_time).collect()
    }
}

fn relative_frequencies(jitter: &[f64]) -> Vec<f64> {
    jitter.iter().enumerate().map(|(i, r)| (i + 1) as f64 * (1.0 + r)).collect()
}

/// The unshaped series `Σ_k a_k sin(ω_k t) + b_k cos(ω_k t)` on the grid.
fn raw_series(crab: &CrabParams, slot: usize, params: &SystemParams) -> Vec<f64> {
    let kk = crab.harmonics;
    let coeffs = &crab.coefficients[2 * kk * slot..2 * kk * (slot + 1)];
    let omegas = crab.frequencies(slot, params.total_time);
    (0..=params.n_steps)
        .map(|j| {
            let t = params.time(j);
            omegas.iter().zip(coeffs.chunks_exact(2)).map(|(w, ab)| {
                let (s, c) = (w * t).sin_cos();
                ab[0] * s + ab[1] * c
            })
            .sum()
        })
        .collect()
}

/// Realized pulse for `crab` on the grid of `params`.
///
/// Continuous mode: `clip(sin²(πt/T)·raw(t))`. Discrete mode: `sign(raw(t))`
/// with `sign(0) = +1`. Endpoints are set to exactly zero in both modes.
pub fn synthesize_pulse(crab: &CrabParams, params: &SystemParams) -> Result<PulseSet, Error> {
    crab.validate()?;
    let mut pulses = PulseSet::zeros(params.n_steps);
    let last = params.n_steps;
    for (slot, &field) in crab.scenario.fields().iter().enumerate() {
        let raw = raw_series(crab, slot, params);
        let out = pulses.field_mut(field);
        for j in 1..last {
            out[j] = match crab.mode {
                PulseMode::Continuous => {
                    let env = (PI * params.time(j) / params.total_time).sin().powi(2);
                    (env * raw[j]).clamp(-1.0, 1.0)
                }
                PulseMode::Discrete => {
                    if raw[j] >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
        }
    }
    Ok(pulses)
}

/// `1 − F(m, N)` for the pulse realized by `crab`.
pub fn objective(crab: &CrabParams, m: usize, n: usize, params: &SystemParams) -> Result<f64, Error> {
    Ok(1.0 - evaluate(crab, m, n, params)?.1.f)
}

fn evaluate(crab: &CrabParams, m: usize, n: usize, params: &SystemParams) -> Result<(PulseSet, MapReport), Error> {
    let pulses = synthesize_pulse(crab, params)?;
    let basis = evolve_basis(params, &pulses, n)?;
    let report = fidelity(&basis, m, n)?;
    Ok((pulses, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimplexOptions {
    /// Cap on objective evaluations. The starting point is always evaluated.
    pub max_evals: usize,
    pub tol_x: f64,
    pub tol_f: f64,
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_evals: 20_000, tol_x: 1e-8, tol_f: 1e-12, initial_step: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Termination {
    SimplexSize,
    Spread,
    Budget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    /// `(evaluation count, best objective so far)` at every improvement.
    pub trace: Vec<(usize, f64)>,
    pub termination: Termination,
}

struct Counter<F> {
    f: F,
    evals: usize,
    max: usize,
    best: f64,
    trace: Vec<(usize, f64)>,
}

impl<F, E> Counter<F>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    /// `None` once the budget is spent.
    fn eval(&mut self, x: &[f64]) -> Result<Option<f64>, E> {
        if self.evals >= self.max && self.evals > 0 {
            return Ok(None);
        }
        let mut v = (self.f)(x)?;
        if v.is_nan() {
            v = f64::INFINITY;
        }
        self.evals += 1;
        if v < self.best || self.trace.is_empty() {
            self.best = v;
            self.trace.push((self.evals, v));
        }
        Ok(Some(v))
    }
}

/// Nelder–Mead simplex descent with coefficients (1, 2, 0.5, 0.5).
///
/// Stops when every vertex lies within `tol_x` (max-norm) of the best one, when
/// the objective spread over the simplex drops below `tol_f`, or when the
/// evaluation budget is spent. Budget exhaustion is reported, not an error.
pub fn direct_search<F, E>(f: F, x0: &[f64], opts: &SimplexOptions) -> Result<SearchOutcome, E>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;

    let dim = x0.len();
    let mut c = Counter { f, evals: 0, max: opts.max_evals, best: f64::INFINITY, trace: Vec::new() };
    let f0 = c.eval(x0)?.expect("first evaluation always runs");
    let mut simplex: Vec<(f64, Vec<f64>)> = vec![(f0, x0.to_vec())];

    macro_rules! finish {
        ($why:expr) => {{
            simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (fb, xb) = simplex.swap_remove(0);
            return Ok(SearchOutcome { x: xb, f: fb, evaluations: c.evals, trace: c.trace, termination: $why });
        }};
    }
    macro_rules! eval_or_stop {
        ($x:expr) => {
            match c.eval($x)? {
                Some(v) => v,
                None => finish!(Termination::Budget),
            }
        };
    }

    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += opts.initial_step;
        let v = eval_or_stop!(&x);
        simplex.push((v, x));
    }
    if dim == 0 {
        finish!(Termination::SimplexSize);
    }

    let mut centroid = vec![0.0; dim];
    let mut trial = vec![0.0; dim];
    loop {
        simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (f_best, f_second_worst, f_worst) = (simplex[0].0, simplex[dim - 1].0, simplex[dim].0);
        if f_worst - f_best <= opts.tol_f {
            finish!(Termination::Spread);
        }
        let diameter = simplex[1..]
            .iter()
            .map(|(_, x)| x.iter().zip(&simplex[0].1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter <= opts.tol_x {
            finish!(Termination::SimplexSize);
        }

        centroid.iter_mut().for_each(|v| *v = 0.0);
        for (_, x) in &simplex[..dim] {
            centroid.iter_mut().zip(x).for_each(|(c, v)| *c += v);
        }
        centroid.iter_mut().for_each(|v| *v /= dim as f64);

        let along = |t: &mut Vec<f64>, from: &[f64], coef: f64| {
            // t = centroid + coef·(from − centroid)
            for ((ti, ci), fi) in t.iter_mut().zip(&centroid).zip(from) {
                *ti = ci + coef * (fi - ci);
            }
        };

        along(&mut trial, &simplex[dim].1, -ALPHA);
        let xr = trial.clone();
        let fr = eval_or_stop!(&xr);

        if fr < f_best {
            along(&mut trial, &xr, GAMMA);
            let fe = eval_or_stop!(&trial);
            simplex[dim] = if fe < fr { (fe, trial.clone()) } else { (fr, xr) };
            continue;
        }
        if fr < f_second_worst {
            simplex[dim] = (fr, xr);
            continue;
        }
        if fr < f_worst {
            along(&mut trial, &xr, RHO);
            let fc = eval_or_stop!(&trial);
            if fc <= fr {
                simplex[dim] = (fc, trial.clone());
                continue;
            }
        } else {
            along(&mut trial, &simplex[dim].1, RHO);
            let fc = eval_or_stop!(&trial);
            if fc < f_worst {
                simplex[dim] = (fc, trial.clone());
                continue;
            }
        }

        let best = simplex[0].1.clone();
        for i in 1..=dim {
            for (v, b) in simplex[i].1.iter_mut().zip(&best) {
                *v = b + SIGMA * (*v - b);
            }
            let x = simplex[i].1.clone();
            simplex[i].0 = eval_or_stop!(&x);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchConfig {
    pub scenario: ControlScenario,
    pub harmonics: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Starting coefficients are uniform in `±init_range·√(3/K)`, which puts
    /// the RMS of the unshaped series at about `init_range`.
    pub init_range: f64,
    pub simplex: SimplexOptions,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            scenario: ControlScenario::ThreeField,
            harmonics: 12,
            restarts: 8,
            seed: 0,
            init_range: 0.3,
            simplex: SimplexOptions::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.harmonics == 0 {
            return Err(Error::InvalidParameter { name: "K", reason: "need at least one harmonic" });
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter { name: "restarts", reason: "need at least one start" });
        }
        if !(self.init_range >= 0.0) || !(self.simplex.initial_step > 0.0) {
            return Err(Error::InvalidParameter { name: "init_range", reason: "ranges must be non-negative, step positive" });
        }
        Ok(())
    }

    /// Seed of restart `r`, decorrelated from neighbouring restarts.
    pub fn restart_seed(&self, r: usize) -> u64 {
        // splitmix64 finalizer
        let mut z = self.seed.wrapping_add((r as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Fresh jitters and starting coefficients for restart `r`.
    pub fn initial_params(&self, r: usize, mode: PulseMode) -> CrabParams {
        let seed = self.restart_seed(r);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut crab = CrabParams::zeros(self.scenario, mode, self.harmonics);
        crab.seed = seed;
        for row in crab.jitter.iter_mut() {
            loop {
                row.iter_mut().for_each(|r| *r = rng.random_range(-0.5..=0.5));
                let rel = relative_frequencies(row);
                if (0..rel.len()).all(|i| !rel[i + 1..].contains(&rel[i])) {
                    break;
                }
            }
        }
        let bound = self.init_range * Float::sqrt(3.0 / self.harmonics as f64);
        if bound > 0.0 {
            crab.coefficients.iter_mut().for_each(|c| *c = rng.random_range(-bound..=bound));
        }
        crab
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RestartRecord {
    pub restart: usize,
    pub seed: u64,
    pub best_objective: f64,
    pub evaluations: usize,
    pub termination: Termination,
    /// `(evaluation count, best objective so far)` at every improvement.
    pub trace: Vec<(usize, f64)>,
}

/// One finished start: its record and the coefficients it ended on.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub record: RestartRecord,
    pub crab: CrabParams,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptResult {
    pub best: CrabParams,
    pub pulses: PulseSet,
    pub report: MapReport,
    pub evaluations: usize,
    pub restarts: Vec<RestartRecord>,
    /// Filled in by callers that have a clock.
    pub wall_time_s: Option<f64>,
}

/// Runs start `r` of the multi-start search. Starts are independent.
pub fn run_restart(
    m: usize,
    n: usize,
    params: &SystemParams,
    config: &SearchConfig,
    mode: PulseMode,
    r: usize,
) -> Result<RestartOutcome, Error> {
    let start = config.initial_params(r, mode);
    let mut crab = start.clone();
    let outcome = direct_search(
        |x: &[f64]| {
            crab.coefficients.copy_from_slice(x);
            objective(&crab, m, n, params)
        },
        &start.coefficients,
        &config.simplex,
    )?;
    let mut best = start;
    best.coefficients = outcome.x;
    Ok(RestartOutcome {
        record: RestartRecord {
            restart: r,
            seed: best.seed,
            best_objective: outcome.f,
            evaluations: outcome.evaluations,
            termination: outcome.termination,
            trace: outcome.trace,
        },
        crab: best,
    })
}

/// Picks the best start (lowest objective, earliest on ties), then re-derives
/// its pulse and fidelity from scratch and re-checks the pulse constraints.
pub fn collect_restarts(
    m: usize,
    n: usize,
    params: &SystemParams,
    mut outcomes: Vec<RestartOutcome>,
) -> Result<OptResult, Error> {
    outcomes.sort_by_key(|o| o.record.restart);
    let idx = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.record.best_objective.total_cmp(&b.1.record.best_objective).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or(Error::InvalidParameter { name: "restarts", reason: "need at least one start" })?;
    let best = outcomes[idx].crab.clone();
    let (pulses, report) = evaluate(&best, m, n, params)?;
    pulses.check_constraints()?;
    Ok(OptResult {
        best,
        pulses,
        report,
        evaluations: outcomes.iter().map(|o| o.record.evaluations).sum(),
        restarts: outcomes.into_iter().map(|o| o.record).collect(),
        wall_time_s: None,
    })
}

fn optimize(
    m: usize,
    n: usize,
    params: &SystemParams,
    config: &SearchConfig,
    mode: PulseMode,
) -> Result<OptResult, Error> {
    params.validate()?;
    config.validate()?;
    if m >= n {
        return Err(Error::InvalidLevel { m, n });
    }
    let outcomes = (0..config.restarts)
        .map(|r| run_restart(m, n, params, config, mode, r))
        .collect::<Result<Vec<_>, _>>()?;
    collect_restarts(m, n, params, outcomes)
}

/// Multi-start search for continuous pulses maximizing `F(m, N)`.
pub fn optimize_map(m: usize, n: usize, params: &SystemParams, config: &SearchConfig) -> Result<OptResult, Error> {
    optimize(m, n, params, config, PulseMode::Continuous)
}

/// Same search for phase-flip pulses; needs a two-field scenario.
pub fn optimize_discrete(m: usize, n: usize, params: &SystemParams, config: &SearchConfig) -> Result<OptResult, Error> {
    if config.scenario.fields().len() != 2 {
        return Err(Error::InvalidParameter { name: "scenario", reason: "discrete pulses need exactly two fields" });
    }
    optimize(m, n, params, config, PulseMode::Discrete)
}
