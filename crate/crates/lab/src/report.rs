//! Report rows and their CSV/JSON encodings.

use std::fs;
use std::path::Path as FsPath;

use serde::Serialize;
use sigma_core::stats::{Rule, TestReport};

use crate::config::Settings;
use crate::error::{LabError, Result};
use crate::sim::Curve;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub experiment: String,
    pub anchor: String,
    pub check: String,
    pub target: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub stderr_multiple: f64,
    pub stderr_part: f64,
    pub grid_allowance: f64,
    pub truncation_allowance: f64,
    pub tolerance: f64,
    pub rule: &'static str,
    pub z: f64,
    pub pass: bool,
    pub n_paths: usize,
    pub dropped_paths: usize,
    pub seed: u64,
    pub config_hash: String,
    pub notes: String,
}

fn rule_name(r: Rule) -> &'static str {
    match r {
        Rule::Within => "within",
        Rule::AtLeast => "at_least",
        Rule::AtMost => "at_most",
    }
}

impl ReportRow {
    pub fn new(anchor: &str, settings: &Settings, dropped: usize, r: &TestReport) -> Self {
        ReportRow {
            experiment: settings.experiment.clone(),
            anchor: anchor.to_string(),
            check: r.name.clone(),
            target: r.target,
            estimate: r.estimate.mean,
            stderr: r.estimate.stderr,
            stderr_multiple: r.tolerance.stderr_multiple,
            stderr_part: r.tolerance.stderr_part,
            grid_allowance: r.tolerance.grid_allowance,
            truncation_allowance: r.tolerance.truncation_allowance,
            tolerance: r.tolerance.total(),
            rule: rule_name(r.rule),
            z: r.z_score,
            pass: r.pass,
            n_paths: r.estimate.n,
            dropped_paths: dropped,
            seed: settings.master_seed,
            config_hash: settings.hash(),
            notes: r.notes.join("; "),
        }
    }
}

fn create_dir(dir: &FsPath) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))
}

fn write_csv<T: Serialize>(path: &FsPath, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

/// Writes `report.csv`, `report.json` and `curves/*.csv` into `dir`.
pub fn write_report(dir: &FsPath, rows: &[ReportRow], curves: &[Curve]) -> Result<()> {
    create_dir(dir)?;
    if rows.is_empty() {
        return Err(LabError::Config("an experiment produced no report rows".into()));
    }
    write_csv(&dir.join("report.csv"), rows)?;
    let json = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(rows)?;
    text.push('\n');
    fs::write(&json, text).map_err(|e| LabError::io(&json, e))?;
    if !curves.is_empty() {
        let cdir = dir.join("curves");
        create_dir(&cdir)?;
        for c in curves {
            write_csv(&cdir.join(format!("{}.csv", c.name)), &c.points)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub experiment: String,
    pub runtime_seconds: f64,
    pub workers: usize,
}

/// Wall-clock times, kept apart from the reports so that those stay
/// reproducible byte for byte.
pub fn write_timing(dir: &FsPath, rows: &[TimingRow]) -> Result<()> {
    create_dir(dir)?;
    write_csv(&dir.join("timing.csv"), rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub status: String,
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
}

pub fn write_summary(dir: &FsPath, rows: &[SummaryRow]) -> Result<()> {
    create_dir(dir)?;
    write_csv(&dir.join("summary.csv"), rows)
}
