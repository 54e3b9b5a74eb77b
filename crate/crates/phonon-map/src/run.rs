//! Task dispatch: one config in, result files and a manifest out.

use std::path::{Path, PathBuf};
use std::time::Instant;

use phonon_map_core::analysis::{check_truncation, scan_calibration, xi_grid, RobustnessCurve, ScalingRow, TruncationReport};
use phonon_map_core::crab::{collect_restarts, run_restart, ControlScenario, OptResult, PulseMode, SearchConfig};
use phonon_map_core::fidelity::{fidelity, MapReport};
use phonon_map_core::model::{PulseSet, SystemParams};
use phonon_map_core::poincare::PointerSystem;
use phonon_map_core::propagator::evolve_basis;
use phonon_map_core::qnd::{
    closed_form_p_f, initial_population_measurement, run_filter_sequence, thermal_state, IdealMaps, MappingUnitaries,
    PhononChannel, PropagatedMaps, StepTrace,
};
use phonon_map_core::Error as CoreError;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Scenario, Task};
use crate::error::RunError;
use crate::formats::{self, PoincareRow};
use crate::manifest::{self, Manifest, Versions};

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest_path: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Multi-start search with the starts spread over `threads` workers. The
/// result does not depend on the thread count.
pub fn optimize_parallel(
    m: usize,
    n: usize,
    params: &SystemParams,
    config: &SearchConfig,
    mode: PulseMode,
    threads: usize,
) -> Result<OptResult, CoreError> {
    params.validate()?;
    config.validate()?;
    if m >= n {
        return Err(CoreError::InvalidLevel { m, n });
    }
    if mode == PulseMode::Discrete && config.scenario.fields().len() != 2 {
        return Err(CoreError::InvalidParameter { name: "scenario", reason: "discrete pulses need exactly two fields" });
    }
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
    let outcomes = pool.install(|| {
        (0..config.restarts).into_par_iter().map(|r| run_restart(m, n, params, config, mode, r)).collect::<Result<Vec<_>, _>>()
    })?;
    let mut res = collect_restarts(m, n, params, outcomes)?;
    res.wall_time_s = Some(start.elapsed().as_secs_f64());
    Ok(res)
}

#[derive(Debug, Serialize)]
struct OptimizeRecord<'a> {
    scenario: &'static str,
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T_us")]
    t_us: f64,
    #[serde(rename = "F")]
    f: f64,
    truncation: TruncationReport,
    result: &'a OptResult,
}

#[derive(Debug, Serialize)]
struct RobustnessRecord<'a> {
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    curve: &'a RobustnessCurve,
}

#[derive(Debug, Serialize)]
struct QndRecord {
    m: usize,
    m_prime: usize,
    nbar: f64,
    maps: &'static str,
    #[serde(rename = "P_f")]
    p_f: f64,
    #[serde(rename = "P_f_closed_form")]
    p_f_closed_form: f64,
    protocol_error: f64,
    initial_population: f64,
    trace: Vec<StepTrace>,
}

#[derive(Debug, Serialize)]
struct ScalingRecord {
    scenario: &'static str,
    m: usize,
    rows: Vec<ScalingRow>,
    discrete: Vec<ScalingRow>,
    trend_inversions: usize,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    out: &'a Path,
    threads: usize,
    files: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn path(&mut self, suffix: &str) -> PathBuf {
        let p = self.out.join(format!("{}_{suffix}", self.cfg.output));
        self.files.push(p.clone());
        p
    }
}

/// Loads, runs and writes everything, including the manifest.
pub fn run_file(config: &Path, overrides: &Overrides) -> Result<RunSummary, RunError> {
    let cfg = ExperimentConfig::load(config)?;
    run(cfg, overrides)
}

pub fn run(mut cfg: ExperimentConfig, overrides: &Overrides) -> Result<RunSummary, RunError> {
    if let Some(s) = overrides.seed {
        cfg.control.seed = s;
    }
    if let Some(t) = overrides.threads {
        cfg.threads = t;
    }
    let threads = if cfg.threads == 0 { rayon::current_num_threads() } else { cfg.threads };
    let out = overrides.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).map_err(|e| RunError::io(&out, e))?;

    let start = Instant::now();
    let mut ctx = Ctx { cfg: &cfg, out: &out, threads, files: Vec::new() };
    match cfg.task {
        Task::Optimize => optimize_task(&mut ctx)?,
        Task::Evaluate => evaluate_task(&mut ctx)?,
        Task::Robustness => robustness_task(&mut ctx)?,
        Task::Poincare => poincare_task(&mut ctx)?,
        Task::Qnd => qnd_task(&mut ctx)?,
        Task::Scaling => scaling_task(&mut ctx)?,
    }
    let files = ctx.files;
    let manifest = Manifest {
        config: cfg.clone(),
        seed: cfg.control.seed,
        threads,
        versions: Versions::current(),
        wall_time_s: start.elapsed().as_secs_f64(),
        files: manifest::entries(&out, &files)?,
    };
    let manifest_path = out.join(format!("{}_manifest.json", cfg.output));
    manifest::write(&manifest_path, &manifest)?;
    Ok(RunSummary { manifest_path, files })
}

fn optimize_one(ctx: &mut Ctx, scenario: Scenario, m: usize, tag: &str) -> Result<OptResult, RunError> {
    let params = ctx.cfg.params();
    let n = ctx.cfg.control.n;
    let mut search = ctx.cfg.control.search();
    let (sc, mode) = scenario.control();
    search.scenario = sc;
    let res = optimize_parallel(m, n, &params, &search, mode, ctx.threads)?;
    let truncation = check_truncation(&res.pulses, &params, m, n)?;
    let record = OptimizeRecord { scenario: scenario.name(), m, n, t_us: params.total_time, f: res.report.f, truncation, result: &res };
    let p = ctx.path(&format!("{tag}result.json"));
    formats::write_json(&p, &record)?;
    let p = ctx.path(&format!("{tag}pulse.csv"));
    formats::write_pulse_csv(&p, &params, &res.pulses)?;
    let p = ctx.path(&format!("{tag}map.csv"));
    formats::write_map_report_csv(&p, &res.report)?;
    Ok(res)
}

fn optimize_task(ctx: &mut Ctx) -> Result<(), RunError> {
    match ctx.cfg.sweep.clone() {
        None => optimize_one(ctx, ctx.cfg.control.scenario, ctx.cfg.control.m, "").map(|_| ()),
        Some(sweep) => {
            for &scenario in &sweep.scenarios {
                for &m in &sweep.m_list {
                    optimize_one(ctx, scenario, m, &format!("{}_m{m}_", scenario.name().replace('+', "-")))?;
                }
            }
            Ok(())
        }
    }
}

fn evaluate_pulses(params: &SystemParams, pulses: &PulseSet, m: usize, n: usize) -> Result<MapReport, CoreError> {
    fidelity(&evolve_basis(params, pulses, n)?, m, n)
}

fn evaluate_task(ctx: &mut Ctx) -> Result<(), RunError> {
    let params = ctx.cfg.params();
    let block = ctx.cfg.evaluate.as_ref().expect("validated");
    let pulses = formats::read_pulse_csv(&block.pulse_csv, &params)?;
    let report = evaluate_pulses(&params, &pulses, ctx.cfg.control.m, ctx.cfg.control.n)?;
    let p = ctx.path("report.json");
    formats::write_json(&p, &report)?;
    let p = ctx.path("map.csv");
    formats::write_map_report_csv(&p, &report)
}

fn robustness_task(ctx: &mut Ctx) -> Result<(), RunError> {
    let params = ctx.cfg.params();
    let (m, n) = (ctx.cfg.control.m, ctx.cfg.control.n);
    let block = ctx.cfg.robustness.clone().unwrap_or(crate::config::RobustnessBlock {
        pulse_csv: None,
        xi_half_width: 0.01,
        xi_points: 21,
    });
    let pulses = match &block.pulse_csv {
        Some(path) => formats::read_pulse_csv(path, &params)?,
        None => optimize_one(ctx, ctx.cfg.control.scenario, m, "")?.pulses,
    };
    let curve = scan_calibration(&pulses, &params, m, n, &xi_grid(block.xi_half_width, block.xi_points))?;
    let p = ctx.path("robustness.json");
    formats::write_json(&p, &RobustnessRecord { m, n, curve: &curve })?;
    let p = ctx.path("robustness.csv");
    formats::write_robustness_csv(&p, &curve)
}

fn found(r: Result<phonon_map_core::poincare::WaitingTime, CoreError>) -> Result<Option<f64>, CoreError> {
    match r {
        Ok(w) => Ok(Some(w.t)),
        Err(CoreError::WaitingTimeNotFound { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Waiting times for every `(N, m)`, in units of `1/Ω0`.
pub fn poincare_rows(
    params: &SystemParams,
    n_list: &[usize],
    epsilon: f64,
    t_max_us: f64,
    t_opt_us: Option<f64>,
) -> Result<Vec<PoincareRow>, CoreError> {
    let w = params.omega_0;
    let mut rows = Vec::new();
    for &n in n_list {
        for m in 0..n {
            let sys = PointerSystem::new(params.eta, params.omega_0, n, m, epsilon)?;
            let dt = sys.default_dt();
            rows.push(PoincareRow {
                n,
                m,
                t_p: sys.analytic_recurrence_time() * w,
                t_f: found(sys.waiting_time_fidelity(t_max_us, dt))?.map(|t| t * w),
                t_dphi: found(sys.waiting_time_uniform(t_max_us, dt))?.map(|t| t * w),
                t_opt: t_opt_us.map(|t| t * w),
            });
        }
    }
    Ok(rows)
}

fn poincare_task(ctx: &mut Ctx) -> Result<(), RunError> {
    let params = ctx.cfg.params();
    let block = ctx.cfg.poincare.clone().unwrap_or(crate::config::PoincareBlock {
        n_list: vec![2, 3, 4, 5],
        epsilon: 0.02,
        t_max_us: 1e9,
        t_opt_us: None,
    });
    let rows = poincare_rows(&params, &block.n_list, block.epsilon, block.t_max_us, block.t_opt_us)?;
    let p = ctx.path("poincare.json");
    formats::write_json(&p, &rows)?;
    let p = ctx.path("poincare.csv");
    formats::write_poincare_csv(&p, &rows)
}

fn qnd_task(ctx: &mut Ctx) -> Result<(), RunError> {
    let params = ctx.cfg.params();
    let q = ctx.cfg.qnd.clone().expect("validated");
    let levels = params.levels();
    let rho = thermal_state(q.nbar, levels);
    let channel = match &q.channel_json {
        Some(p) => formats::read_channel(p)?,
        None => PhononChannel::identity(levels),
    };
    let record = match (&q.pulse_csv_m, &q.pulse_csv_m_prime) {
        (Some(a), Some(b)) => {
            let pulses = vec![(q.m, formats::read_pulse_csv(a, &params)?), (q.m_prime, formats::read_pulse_csv(b, &params)?)];
            qnd_record(&rho, &q, &channel, &PropagatedMaps::new(&params, &pulses)?, "propagated")?
        }
        _ => qnd_record(&rho, &q, &channel, &IdealMaps { levels }, "ideal")?,
    };
    let p = ctx.path("qnd.json");
    formats::write_json(&p, &record)
}

fn qnd_record(
    rho: &phonon_map_core::linalg::CMatrix,
    q: &crate::config::QndBlock,
    channel: &PhononChannel,
    maps: &impl MappingUnitaries,
    kind: &'static str,
) -> Result<QndRecord, CoreError> {
    let out = run_filter_sequence(rho, q.m, q.m_prime, channel, maps)?;
    let closed = closed_form_p_f(rho, q.m, q.m_prime, channel);
    Ok(QndRecord {
        m: q.m,
        m_prime: q.m_prime,
        nbar: q.nbar,
        maps: kind,
        p_f: out.p_f,
        p_f_closed_form: closed,
        protocol_error: (out.p_f - closed).abs(),
        initial_population: initial_population_measurement(rho, q.m, maps)?,
        trace: out.trace,
    })
}

fn scaling_task(ctx: &mut Ctx) -> Result<(), RunError> {
    let params = ctx.cfg.params();
    let block = ctx.cfg.scaling.clone().expect("validated");
    let m = ctx.cfg.control.m;
    let (scenario, mode) = ctx.cfg.control.scenario.control();
    let mut search = ctx.cfg.control.search();
    let row = |n: usize, res: &OptResult| ScalingRow { n, f: res.report.f, one_minus_f: 1.0 - res.report.f, t_opt_us: params.total_time };

    let mut rows = Vec::new();
    for &n in &block.n_list {
        rows.push(row(n, &optimize_parallel(m, n, &params, &search, mode, ctx.threads)?));
    }
    let mut discrete = Vec::new();
    if block.include_discrete {
        if scenario.fields().len() != 2 {
            search.scenario = ControlScenario::CarrierRed;
        }
        for &n in block.n_list.iter().filter(|&&n| n <= 5) {
            discrete.push(row(n, &optimize_parallel(m, n, &params, &search, PulseMode::Discrete, ctx.threads)?));
        }
    }
    let record = ScalingRecord {
        scenario: ctx.cfg.control.scenario.name(),
        m,
        trend_inversions: phonon_map_core::analysis::trend_inversions(&rows),
        rows,
        discrete,
    };
    let p = ctx.path("scaling.json");
    formats::write_json(&p, &record)?;
    let p = ctx.path("scaling.csv");
    formats::write_scaling_csv(&p, &record.rows)?;
    if !record.discrete.is_empty() {
        let p = ctx.path("scaling_discrete.csv");
        formats::write_scaling_csv(&p, &record.discrete)?;
    }
    Ok(())
}
