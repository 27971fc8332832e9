//! Experiment configuration: file loading, CLI overrides, resolution
//! against registry defaults, and the configuration hash.

use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sigma_core::balayage::default_bandwidth;
use sigma_core::classes::{abs_martingale, drawdown, lifted_reflected, pm_combination, Decomposition};
use sigma_core::density::{DensityModel, ZeroSetInfo};
use sigma_core::identities::{LambdaSpec, PhiSpec};
use sigma_core::{make_grid, Path, TimeGrid};

use crate::error::{LabError, Result};
use crate::registry::{Experiment, Knob};

pub const DEFAULT_SEED: u64 = 20_240_607;

/// What to do with a path whose last density zero sits on the horizon.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ShiftPolicy {
    /// Discard the path and count it.
    #[default]
    Drop,
    /// Redraw the same path on a horizon doubled up to four times.
    Extend,
}

/// Named process constructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Construction {
    AbsMartingale,
    PmCombination { alpha: f64, beta: f64 },
    Drawdown,
    LiftedReflected {
        #[serde(default)]
        stop_level: Option<f64>,
    },
}

impl Construction {
    /// Builds the decomposition from the martingale driver `m` (a Brownian
    /// path from 0, independent of `D`).
    pub fn build(&self, m: &Path, zs: &ZeroSetInfo) -> sigma_core::Result<Decomposition> {
        let bw = default_bandwidth(m.grid());
        match *self {
            Construction::AbsMartingale => abs_martingale(m, zs, bw),
            Construction::PmCombination { alpha, beta } => pm_combination(m, alpha, beta, zs, bw),
            Construction::Drawdown => drawdown(m, zs),
            Construction::LiftedReflected { stop_level } => lifted_reflected(m, zs, stop_level),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Construction::AbsMartingale => "|M|".into(),
            Construction::PmCombination { alpha, beta } => format!("{alpha}M+ + {beta}M-"),
            Construction::Drawdown => "S-M".into(),
            Construction::LiftedReflected { stop_level: None } => "rho|beta|".into(),
            Construction::LiftedReflected { stop_level: Some(l) } => format!("rho|beta| stopped at {l}"),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Construction::PmCombination { alpha, beta } if !(alpha > 0.0 && beta > 0.0) => Err(LabError::Config(
                format!("pm_combination needs alpha, beta > 0, got ({alpha}, {beta})"),
            )),
            Construction::LiftedReflected { stop_level: Some(l) } if !(l > 0.0 && l.is_finite()) => {
                Err(LabError::Config(format!("stop_level must be > 0, got {l}")))
            }
            _ => Ok(()),
        }
    }
}

/// A configuration file or command line. Every field is optional; absent
/// fields take the experiment's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub n_paths: Option<usize>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub master_seed: Option<u64>,
    /// Absolute times.
    pub checkpoints: Option<Vec<f64>>,
    pub out_dir: Option<PathBuf>,
    pub policy: Option<ShiftPolicy>,
    /// Worker threads; 0 means one per core.
    pub workers: Option<usize>,
    pub density: Option<DensityModel>,
    pub construction: Option<Construction>,
    pub phi: Option<PhiSpec>,
    pub lambda: Option<LambdaSpec>,
    pub u: Option<f64>,
    pub levels: Option<Vec<f64>>,
    pub x_level: Option<f64>,
}

impl ExperimentConfig {
    /// Reads TOML, or JSON when the file ends in `.json`.
    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let parsed = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| e.to_string()),
            _ => toml::from_str(&text).map_err(|e| e.to_string()),
        };
        parsed.map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            experiment: over.experiment.or(self.experiment),
            n_paths: over.n_paths.or(self.n_paths),
            step: over.step.or(self.step),
            horizon: over.horizon.or(self.horizon),
            master_seed: over.master_seed.or(self.master_seed),
            checkpoints: over.checkpoints.or(self.checkpoints),
            out_dir: over.out_dir.or(self.out_dir),
            policy: over.policy.or(self.policy),
            workers: over.workers.or(self.workers),
            density: over.density.or(self.density),
            construction: over.construction.or(self.construction),
            phi: over.phi.or(self.phi),
            lambda: over.lambda.or(self.lambda),
            u: over.u.or(self.u),
            levels: over.levels.or(self.levels),
            x_level: over.x_level.or(self.x_level),
        }
    }
}

/// Batch sizes of `run-all`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Fast,
    Full,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Fast => "fast",
            Suite::Full => "full",
        }
    }

    /// `(n_paths, step)` for experiments that scale with the suite.
    pub fn scale(&self) -> (usize, f64) {
        match self {
            Suite::Fast => (20_000, 2e-3),
            Suite::Full => (100_000, 1e-3),
        }
    }
}

/// A fully resolved configuration. Everything that influences the report
/// lives here, and nothing else does.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub experiment: String,
    pub n_paths: usize,
    pub step: f64,
    pub horizon: f64,
    pub master_seed: u64,
    pub checkpoints: Vec<f64>,
    pub policy: ShiftPolicy,
    pub density: Option<DensityModel>,
    pub construction: Option<Construction>,
    pub phi: Option<PhiSpec>,
    pub lambda: Option<LambdaSpec>,
    pub u: Option<f64>,
    pub levels: Option<Vec<f64>>,
    pub x_level: Option<f64>,
}

impl Settings {
    pub fn grid(&self) -> sigma_core::Result<TimeGrid> {
        make_grid(self.horizon, self.step)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("settings serialize");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn config_err(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

/// Applies `cfg` on top of the experiment's defaults (scaled to `suite`
/// when given) and validates the result.
pub fn resolve(cfg: &ExperimentConfig, exp: &Experiment, suite: Option<Suite>) -> Result<Settings> {
    let d = &exp.defaults;
    let (mut n_paths, mut step) = (d.n_paths, d.step);
    if let (Some(s), true) = (suite, d.scaled) {
        (n_paths, step) = s.scale();
    }
    let n_paths = cfg.n_paths.unwrap_or(n_paths);
    let step = cfg.step.unwrap_or(step);
    let horizon = cfg.horizon.unwrap_or(d.horizon);
    if n_paths == 0 {
        return Err(config_err("n_paths must be at least 1"));
    }
    let grid = make_grid(horizon, step)?;
    let checkpoints = match &cfg.checkpoints {
        Some(c) => c.clone(),
        None => d.checkpoints.iter().map(|f| grid.time(grid.floor_index(f * horizon))).collect(),
    };
    if checkpoints.is_empty() {
        return Err(config_err("at least one checkpoint is required"));
    }
    for &t in &checkpoints {
        if !(0.0..=horizon).contains(&t) || grid.index_of(t).is_none() {
            return Err(config_err(format!("checkpoint {t} is not a grid time in [0, {horizon}]")));
        }
    }

    let reject = |knob: Knob, set: bool| -> Result<()> {
        if set && !exp.knobs.contains(&knob) {
            return Err(config_err(format!("experiment {} does not take `{}`", exp.name, knob.key())));
        }
        Ok(())
    };
    reject(Knob::Density, cfg.density.is_some())?;
    reject(Knob::Construction, cfg.construction.is_some())?;
    reject(Knob::Phi, cfg.phi.is_some())?;
    reject(Knob::Lambda, cfg.lambda.is_some())?;
    reject(Knob::U, cfg.u.is_some())?;
    reject(Knob::Levels, cfg.levels.is_some())?;
    reject(Knob::XLevel, cfg.x_level.is_some())?;

    if let Some(m) = &cfg.density {
        m.validate()?;
        m.intrinsic_index(&grid)?;
    }
    if let Some(c) = &cfg.construction {
        c.validate()?;
    }
    if let Some(p) = &cfg.phi {
        p.validate()?;
    }
    if let Some(l) = &cfg.lambda {
        l.validate()?;
    }
    if let Some(u) = cfg.u {
        if !(u > 0.0 && u.is_finite()) {
            return Err(config_err(format!("u must be > 0, got {u}")));
        }
    }
    if let Some(levels) = &cfg.levels {
        if levels.is_empty() || levels.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(config_err("levels must be a non-empty list of positive numbers"));
        }
    }
    if let (Some(x), u) = (cfg.x_level, cfg.u) {
        if x.is_nan() || x < 0.0 || u.is_some_and(|u| x >= u) {
            return Err(config_err(format!("x_level must lie in [0, u), got {x}")));
        }
    }
    Ok(Settings {
        experiment: exp.name.to_string(),
        n_paths,
        step,
        horizon,
        master_seed: cfg.master_seed.unwrap_or(DEFAULT_SEED),
        checkpoints,
        policy: cfg.policy.unwrap_or_default(),
        density: cfg.density,
        construction: cfg.construction,
        phi: cfg.phi.clone(),
        lambda: cfg.lambda,
        u: cfg.u,
        levels: cfg.levels.clone(),
        x_level: cfg.x_level,
    })
}
