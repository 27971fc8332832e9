//! Runs experiments and writes their outputs.

use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use sigma_core::ensemble::Workers;

use crate::config::{resolve, ExperimentConfig, Settings, Suite};
use crate::error::{LabError, Result};
use crate::registry::{lookup, Experiment, REGISTRY};
use crate::report::{write_report, write_summary, write_timing, ReportRow, SummaryRow, TimingRow};
use crate::sim::{Ctx, Curve};

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const ERROR: i32 = 1;
    pub const FAIL: i32 = 2;
}

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SIGMA_LAB_OUT";

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from)
}

pub struct RunResult {
    pub rows: Vec<ReportRow>,
    pub curves: Vec<Curve>,
    pub seconds: f64,
}

impl RunResult {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            exit::PASS
        } else {
            exit::FAIL
        }
    }
}

pub fn execute(exp: &Experiment, settings: &Settings, workers: &Workers) -> Result<RunResult> {
    let start = Instant::now();
    let out = (exp.run)(&Ctx { settings, workers })?;
    let rows = out.rows.iter().map(|r| ReportRow::new(exp.anchor, settings, out.dropped_paths, r)).collect();
    Ok(RunResult { rows, curves: out.curves, seconds: start.elapsed().as_secs_f64() })
}

fn write_all(dir: &FsPath, name: &str, r: &RunResult, workers: &Workers) -> Result<()> {
    write_report(dir, &r.rows, &r.curves)?;
    write_timing(dir, &[TimingRow { experiment: name.into(), runtime_seconds: r.seconds, workers: workers.threads() }])
}

/// Runs one experiment into `<out>/<experiment>/`.
pub fn run(cfg: &ExperimentConfig, workers: &Workers) -> Result<RunResult> {
    let name = cfg.experiment.as_deref().ok_or_else(|| LabError::Config("no experiment named".into()))?;
    let exp = lookup(name)?;
    let settings = resolve(cfg, exp, None)?;
    let r = execute(exp, &settings, workers)?;
    let out = cfg.out_dir.clone().unwrap_or_else(default_out_dir);
    write_all(&out.join(exp.name), exp.name, &r, workers)?;
    Ok(r)
}

pub struct SuiteOutcome {
    pub summary: Vec<SummaryRow>,
    pub exit_code: i32,
}

/// Runs every registry experiment into `<out>/<suite>/<experiment>/` and
/// writes `summary.csv`. An experiment that errors is recorded and the
/// suite continues; the exit code is 1 if any errored, else 2 if any
/// check failed.
pub fn run_all(suite: Suite, base: &ExperimentConfig, workers: &Workers) -> Result<SuiteOutcome> {
    let root = base.out_dir.clone().unwrap_or_else(default_out_dir).join(suite.name());
    let mut summary = Vec::with_capacity(REGISTRY.len());
    let mut timing = Vec::with_capacity(REGISTRY.len());
    let (mut errored, mut failed) = (false, false);
    for exp in REGISTRY {
        let cfg = ExperimentConfig { experiment: Some(exp.name.into()), ..base.clone() };
        let result = resolve(&cfg, exp, Some(suite)).and_then(|s| execute(exp, &s, workers));
        let row = match result {
            Ok(r) => {
                write_report(&root.join(exp.name), &r.rows, &r.curves)?;
                timing.push(TimingRow { experiment: exp.name.into(), runtime_seconds: r.seconds, workers: workers.threads() });
                let passed = r.rows.iter().filter(|x| x.pass).count();
                failed |= !r.passed();
                SummaryRow {
                    experiment: exp.name.into(),
                    status: if r.passed() { "pass" } else { "fail" }.into(),
                    checks: r.rows.len(),
                    passed,
                    failed: r.rows.len() - passed,
                }
            }
            Err(e) => {
                errored = true;
                SummaryRow { experiment: exp.name.into(), status: format!("error: {e}"), checks: 0, passed: 0, failed: 0 }
            }
        };
        summary.push(row);
    }
    write_summary(&root, &summary)?;
    write_timing(&root, &timing)?;
    let exit_code = if errored {
        exit::ERROR
    } else if failed {
        exit::FAIL
    } else {
        exit::PASS
    };
    Ok(SuiteOutcome { summary, exit_code })
}
