//! CSV report and JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::experiment::ResultRow;
use crate::HarnessError;

/// Machine description recorded with every report.
#[derive(Clone, Debug, Serialize)]
pub struct Hardware {
    pub os: &'static str,
    pub arch: &'static str,
    pub logical_cpus: usize,
    pub cpu_model: Option<String>,
}

impl Hardware {
    pub fn detect() -> Self {
        let cpu_model = fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| s.lines().find(|l| l.starts_with("model name")).and_then(|l| l.split_once(':')).map(|(_, v)| v.trim().to_string()));
        Self {
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            logical_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            cpu_model,
        }
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    hardware: Hardware,
    rows: &'a [ResultRow],
}

/// CSV with one line per row, in field order.
pub fn to_csv(rows: &[ResultRow]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Report(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record(["kernel"]).map_err(|e| HarnessError::Report(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Report(e.to_string()))
}

pub fn to_json(cfg: &ExperimentConfig, rows: &[ResultRow]) -> Result<String, HarnessError> {
    let sidecar = Sidecar { version: env!("CARGO_PKG_VERSION"), config: cfg, hardware: Hardware::detect(), rows };
    serde_json::to_string_pretty(&sidecar).map_err(|e| HarnessError::Report(e.to_string()))
}

/// Writes `<out>.csv` and `<out>.json`; returns both paths.
pub fn write_reports(out: &Path, cfg: &ExperimentConfig, rows: &[ResultRow]) -> Result<(PathBuf, PathBuf), HarnessError> {
    let csv_path = out.with_extension("csv");
    let json_path = out.with_extension("json");
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&csv_path, to_csv(rows)?)?;
    fs::write(&json_path, to_json(cfg, rows)?)?;
    Ok((csv_path, json_path))
}
