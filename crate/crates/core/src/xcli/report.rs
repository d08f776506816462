use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::persist::write_atomic;
use crate::error::Result;
use crate::stats::Summary;

/// Per-trial rows under a fixed header.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// CSV with every number printed to 17 significant digits.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| format!("{x:.16e}")))?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub statistics: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
    /// Set when a numeric guard stopped the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub table: Table,
}

pub fn version_string() -> String {
    match option_env!("QRAND_GIT_REV") {
        Some(rev) => format!("{} ({rev})", env!("CARGO_PKG_VERSION")),
        None => env!("CARGO_PKG_VERSION").to_string(),
    }
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.flags.values().all(|&f| f)
    }

    /// The seed-determined part of the report, serialized.
    pub fn statistics_json(&self) -> String {
        serde_json::to_string(&(&self.statistics, &self.flags, &self.table, &self.error))
            .expect("plain data")
    }

    /// Writes `<stem>.json` and `<stem>.csv`, each atomically.
    pub fn write(&self, output: &Path) -> Result<(PathBuf, PathBuf)> {
        let stem = match output.extension().and_then(|e| e.to_str()) {
            Some("json") | Some("csv") => output.with_extension(""),
            _ => output.to_path_buf(),
        };
        let json_path = with_suffix(&stem, "json");
        let csv_path = with_suffix(&stem, "csv");
        write_atomic(&json_path, serde_json::to_string_pretty(self)?.as_bytes())?;
        write_atomic(&csv_path, &self.table.to_csv()?)?;
        Ok((json_path, csv_path))
    }
}

fn with_suffix(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_os_string();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Adds `prefix_{mean,median,std_error,min,max}` to `stats`.
pub(crate) fn put_summary(stats: &mut BTreeMap<String, f64>, prefix: &str, values: &[f64]) {
    let s = Summary::of(values);
    stats.insert(format!("{prefix}_mean"), s.mean);
    stats.insert(format!("{prefix}_median"), s.median);
    stats.insert(format!("{prefix}_std_error"), s.std_error);
    stats.insert(format!("{prefix}_min"), s.min);
    stats.insert(format!("{prefix}_max"), s.max);
}
