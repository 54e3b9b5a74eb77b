//! Bundled experiment configurations.

use crate::config::ExperimentConfig;
use crate::error::ConfigError;

pub const PRESETS: [(&str, &str); 7] = [
    ("fig2a", include_str!("../presets/fig2a.json")),
    ("fig2b", include_str!("../presets/fig2b.json")),
    ("fig2c", include_str!("../presets/fig2c.json")),
    ("fig2d", include_str!("../presets/fig2d.json")),
    ("fig5", include_str!("../presets/fig5.json")),
    ("fig6", include_str!("../presets/fig6.json")),
    ("fig7", include_str!("../presets/fig7.json")),
];

pub fn text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn load(name: &str) -> Result<ExperimentConfig, ConfigError> {
    let t = text(name).ok_or_else(|| ConfigError::invalid("preset", format!("unknown preset `{name}`")))?;
    ExperimentConfig::from_json(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Scenario, Task};

    #[test]
    fn every_preset_parses() {
        for (name, _) in PRESETS {
            let c = load(name).unwrap();
            assert_eq!(c.output, name);
        }
        assert!(load("fig9").is_err());
    }

    #[test]
    fn optimize_presets_target_levels() {
        let expect = [("fig2a", 0, 300.0), ("fig2b", 1, 400.0), ("fig2c", 2, 500.0), ("fig2d", 3, 500.0)];
        for (name, m, t) in expect {
            let c = load(name).unwrap();
            assert_eq!((c.task, c.control.scenario, c.control.m, c.control.n), (Task::Optimize, Scenario::ThreeField, m, 10));
            assert_eq!(c.system.t_us, t);
        }
    }
}
