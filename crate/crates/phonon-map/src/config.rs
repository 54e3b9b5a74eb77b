//! Experiment configuration files.
//!
//! Frequencies are given in kHz and converted to angular frequencies in
//! rad/μs (`ω = 2π·f·10⁻³`). Unknown keys are rejected.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use phonon_map_core::crab::{ControlScenario, PulseMode, SearchConfig, SimplexOptions};
use phonon_map_core::model::SystemParams;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub system: SystemBlock,
    #[serde(default)]
    pub control: ControlBlock,
    pub task: Task,
    /// Prefix of every output file name.
    #[serde(default = "default_output")]
    pub output: String,
    /// Worker threads for independent restarts; 0 picks the machine default.
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluate: Option<EvaluateBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness: Option<RobustnessBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poincare: Option<PoincareBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qnd: Option<QndBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
}

fn default_output() -> String {
    "run".into()
}

fn default_threads() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Optimize,
    Evaluate,
    Robustness,
    Poincare,
    Qnd,
    Scaling,
}

/// Defaults: η = 0.25, ω_z = 2π·1.4 MHz, Ω0 = 2π·50 kHz, T = 300 μs,
/// 1000 steps, `n_max = 14`, off-resonant terms kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemBlock {
    pub eta: f64,
    #[serde(rename = "omega_z_kHz")]
    pub omega_z_khz: f64,
    #[serde(rename = "omega_0_kHz")]
    pub omega_0_khz: f64,
    #[serde(rename = "T_us")]
    pub t_us: f64,
    pub n_steps: usize,
    pub n_max: usize,
    pub resonant_only: bool,
}

impl Default for SystemBlock {
    fn default() -> Self {
        Self { eta: 0.25, omega_z_khz: 1400.0, omega_0_khz: 50.0, t_us: 300.0, n_steps: 1000, n_max: 14, resonant_only: false }
    }
}

/// kHz → rad/μs.
pub fn khz_to_rad_per_us(f: f64) -> f64 {
    TAU * f * 1e-3
}

impl SystemBlock {
    pub fn params(&self) -> SystemParams {
        SystemParams {
            eta: self.eta,
            omega_z: khz_to_rad_per_us(self.omega_z_khz),
            omega_0: khz_to_rad_per_us(self.omega_0_khz),
            total_time: self.t_us,
            n_steps: self.n_steps,
            n_max: self.n_max,
            resonant_only: self.resonant_only,
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, why: &str| Err(ConfigError::invalid(format!("system.{key}"), why));
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad("eta", "must be finite and non-negative");
        }
        if !(self.omega_z_khz > 0.0 && self.omega_z_khz.is_finite()) {
            return bad("omega_z_kHz", "must be positive");
        }
        if !(self.omega_0_khz >= 0.0 && self.omega_0_khz.is_finite()) {
            return bad("omega_0_kHz", "must be finite and non-negative");
        }
        if !(self.t_us > 0.0 && self.t_us.is_finite()) {
            return bad("T_us", "must be positive");
        }
        if self.n_steps == 0 {
            return bad("n_steps", "must be at least 1");
        }
        if self.n_max == 0 {
            return bad("n_max", "must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "three-field")]
    ThreeField,
    #[serde(rename = "carrier+blue")]
    CarrierBlue,
    #[serde(rename = "carrier+red")]
    CarrierRed,
    /// Phase flips at constant power on carrier and red sideband.
    #[serde(rename = "discrete")]
    Discrete,
}

impl Scenario {
    pub fn control(self) -> (ControlScenario, PulseMode) {
        match self {
            Scenario::ThreeField => (ControlScenario::ThreeField, PulseMode::Continuous),
            Scenario::CarrierBlue => (ControlScenario::CarrierBlue, PulseMode::Continuous),
            Scenario::CarrierRed => (ControlScenario::CarrierRed, PulseMode::Continuous),
            Scenario::Discrete => (ControlScenario::CarrierRed, PulseMode::Discrete),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::ThreeField => "three-field",
            Scenario::CarrierBlue => "carrier+blue",
            Scenario::CarrierRed => "carrier+red",
            Scenario::Discrete => "discrete",
        }
    }
}

/// Defaults: three fields, m = 0, N = 10, K = 12, 8 restarts of 20000
/// evaluations, seed 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlBlock {
    pub scenario: Scenario,
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub restarts: usize,
    /// Evaluations per restart.
    pub budget: usize,
    pub seed: u64,
    pub init_range: f64,
    pub simplex_step: f64,
}

impl Default for ControlBlock {
    fn default() -> Self {
        let d = SearchConfig::default();
        Self {
            scenario: Scenario::ThreeField,
            m: 0,
            n: 10,
            k: d.harmonics,
            restarts: d.restarts,
            budget: d.simplex.max_evals,
            seed: d.seed,
            init_range: d.init_range,
            simplex_step: d.simplex.initial_step,
        }
    }
}

impl ControlBlock {
    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            scenario: self.scenario.control().0,
            harmonics: self.k,
            restarts: self.restarts,
            seed: self.seed,
            init_range: self.init_range,
            simplex: SimplexOptions { max_evals: self.budget, initial_step: self.simplex_step, ..SimplexOptions::default() },
        }
    }

    fn validate(&self, system: &SystemBlock) -> Result<(), ConfigError> {
        let bad = |key: &str, why: &str| Err(ConfigError::invalid(format!("control.{key}"), why));
        if self.n < 2 {
            return bad("N", "must be at least 2");
        }
        if self.n > system.n_max + 1 {
            return bad("N", "must not exceed n_max + 1");
        }
        if self.m >= self.n {
            return bad("m", "must be smaller than N");
        }
        if self.k == 0 {
            return bad("K", "must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts", "must be at least 1");
        }
        if !(self.init_range >= 0.0 && self.init_range.is_finite()) {
            return bad("init_range", "must be finite and non-negative");
        }
        if !(self.simplex_step > 0.0 && self.simplex_step.is_finite()) {
            return bad("simplex_step", "must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateBlock {
    pub pulse_csv: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessBlock {
    /// Stored pulse; without it the pulse is optimized first.
    #[serde(default)]
    pub pulse_csv: Option<PathBuf>,
    #[serde(default = "default_xi_half_width")]
    pub xi_half_width: f64,
    #[serde(default = "default_xi_points")]
    pub xi_points: usize,
}

fn default_xi_half_width() -> f64 {
    0.01
}

fn default_xi_points() -> usize {
    21
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareBlock {
    #[serde(rename = "N_list", default = "default_poincare_n")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_t_max")]
    pub t_max_us: f64,
    /// Optimized operation time to report alongside, μs.
    #[serde(rename = "T_opt_us", default)]
    pub t_opt_us: Option<f64>,
}

fn default_poincare_n() -> Vec<usize> {
    vec![2, 3, 4, 5]
}

fn default_epsilon() -> f64 {
    0.02
}

fn default_t_max() -> f64 {
    1e9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QndBlock {
    pub m: usize,
    pub m_prime: usize,
    /// Mean occupation of the thermal initial phonon state.
    #[serde(default = "default_nbar")]
    pub nbar: f64,
    /// Kraus operators on the Fock factor; identity if absent.
    #[serde(default)]
    pub channel_json: Option<PathBuf>,
    /// Pulses realizing `U_m` and `U_m'`; ideal maps if absent.
    #[serde(default)]
    pub pulse_csv_m: Option<PathBuf>,
    #[serde(default)]
    pub pulse_csv_m_prime: Option<PathBuf>,
}

fn default_nbar() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingBlock {
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    /// Also run phase-flip pulses for `N ≤ 5`.
    #[serde(default)]
    pub include_discrete: bool,
}

/// Runs `optimize` over several targets and scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub m_list: Vec<usize>,
    pub scenarios: Vec<Scenario>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(ConfigError::from_json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::invalid("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn params(&self) -> SystemParams {
        self.system.params()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.system.validate()?;
        self.control.validate(&self.system)?;
        if self.output.is_empty() || self.output.contains(['/', '\\']) {
            return Err(ConfigError::invalid("output", "must be a plain, non-empty file-name prefix"));
        }
        let levels = self.system.n_max + 1;
        match self.task {
            Task::Evaluate if self.evaluate.is_none() => {
                return Err(ConfigError::invalid("evaluate", "task evaluate needs an evaluate block"))
            }
            Task::Qnd if self.qnd.is_none() => return Err(ConfigError::invalid("qnd", "task qnd needs a qnd block")),
            Task::Scaling if self.scaling.is_none() => {
                return Err(ConfigError::invalid("scaling", "task scaling needs a scaling block"))
            }
            _ => {}
        }
        if let Some(r) = &self.robustness {
            if !(r.xi_half_width >= 0.0 && r.xi_half_width.is_finite()) {
                return Err(ConfigError::invalid("robustness.xi_half_width", "must be finite and non-negative"));
            }
            if r.xi_points % 2 == 0 {
                return Err(ConfigError::invalid("robustness.xi_points", "must be odd so that ξ = 0 is on the grid"));
            }
        }
        if let Some(p) = &self.poincare {
            if p.n_list.is_empty() || p.n_list.contains(&0) {
                return Err(ConfigError::invalid("poincare.N_list", "must be non-empty with N ≥ 1"));
            }
            if !(p.epsilon > 0.0 && p.epsilon < 1.0) {
                return Err(ConfigError::invalid("poincare.epsilon", "must lie in (0, 1)"));
            }
            if !(p.t_max_us > 0.0) {
                return Err(ConfigError::invalid("poincare.t_max_us", "must be positive"));
            }
        }
        if let Some(q) = &self.qnd {
            if q.m >= levels || q.m_prime >= levels {
                return Err(ConfigError::invalid("qnd.m", "levels must be below n_max + 1"));
            }
            if !(q.nbar >= 0.0 && q.nbar.is_finite()) {
                return Err(ConfigError::invalid("qnd.nbar", "must be finite and non-negative"));
            }
            if q.pulse_csv_m.is_some() != q.pulse_csv_m_prime.is_some() {
                return Err(ConfigError::invalid("qnd.pulse_csv_m_prime", "give pulses for both m and m_prime, or neither"));
            }
        }
        if let Some(s) = &self.scaling {
            if s.n_list.is_empty() {
                return Err(ConfigError::invalid("scaling.N_list", "must not be empty"));
            }
            if s.n_list.iter().any(|&n| n < 2 || n > levels || self.control.m >= n) {
                return Err(ConfigError::invalid("scaling.N_list", "every N needs m < N ≤ n_max + 1 and N ≥ 2"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.m_list.is_empty() || s.scenarios.is_empty() {
                return Err(ConfigError::invalid("sweep", "m_list and scenarios must be non-empty"));
            }
            if s.m_list.iter().any(|&m| m >= self.control.n) {
                return Err(ConfigError::invalid("sweep.m_list", "every m must be smaller than N"));
            }
        }
        Ok(())
    }
}
