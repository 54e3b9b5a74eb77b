//! Files, configuration and the command line around `phonon-map-core`.

pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod presets;
pub mod run;

pub use config::ExperimentConfig;
pub use error::{ConfigError, RunError};
