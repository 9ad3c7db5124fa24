//! Experiment runner around the `potential-nash` solvers: config parsing,
//! replicated execution, CSV export, the paired comparison study, and the
//! bundled presets.

pub mod compare;
pub mod config;
pub mod csvio;
pub mod presets;
pub mod runner;

use std::path::Path;

use anyhow::Result;

use config::ExperimentConfig;

/// Resolves a CLI argument to a config: a preset name first, a path second.
pub fn resolve_config(arg: &str) -> Result<ExperimentConfig> {
    if let Some(cfg) = presets::get(arg) {
        return Ok(cfg);
    }
    ExperimentConfig::from_path(Path::new(arg))
}
