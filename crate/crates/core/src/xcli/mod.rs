//! Experiment runner behind the `qrand` binary.

mod commands;
pub mod config;
pub mod persist;
pub mod report;

use std::time::Instant;

pub use config::{Command, ConfigFile, ExperimentConfig, Parameters};
pub use persist::{load_ensemble, save_ensemble, write_atomic};
pub use report::{version_string, ExperimentReport, Table};

use crate::error::Result;

/// Runs one experiment and, when `config.output` is set, writes its JSON
/// and CSV reports. Guard and contract failures are recorded in the report.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let (outcome, error) = match commands::execute(config) {
        Ok(o) => (Some(o), None),
        Err(e) if commands::is_structured(&e) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let (statistics, flags, table) = match outcome {
        Some(o) => (o.statistics, o.flags, o.table),
        None => Default::default(),
    };
    let report = ExperimentReport {
        config: config.clone(),
        version: version_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        statistics,
        flags,
        error,
        table,
    };
    if let Some(path) = &config.output {
        report.write(path)?;
    }
    Ok(report)
}
