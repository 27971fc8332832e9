//! Ensemble execution: per-path sampling, the degenerate-shift policy,
//! prefix growth for truncated "∞" horizons, and experiment outputs.

use serde::Serialize;
use sigma_core::density::{density_path, ensemble_weights, zero_set, DensityModel, DensitySample, ZeroSetInfo};
use sigma_core::engine::{lanes, sample_bm, SeedSpec};
use sigma_core::ensemble::Workers;
use sigma_core::stats::TestReport;
use sigma_core::{Error, Path, TimeGrid};

use crate::config::{Settings, ShiftPolicy};
use crate::error::Result;

/// Doublings of the horizon tried under [`ShiftPolicy::Extend`].
pub const MAX_EXTENSIONS: u32 = 4;

pub struct Ctx<'a> {
    pub settings: &'a Settings,
    pub workers: &'a Workers,
}

impl Ctx<'_> {
    pub fn grid(&self) -> Result<TimeGrid> {
        Ok(self.settings.grid()?)
    }

    pub fn seed(&self, path: u64) -> SeedSpec {
        SeedSpec::new(self.settings.master_seed, path)
    }
}

/// Results of the paths that were kept, in path order.
pub struct Ensemble<T> {
    pub items: Vec<T>,
    pub dropped: usize,
}

/// Runs `f` for paths `0..n` on `grid`. A degenerate shift drops the path
/// or, under the extend policy, redraws it on longer horizons first.
pub fn run_paths<T, F>(ctx: &Ctx, n: usize, grid: &TimeGrid, f: F) -> Result<Ensemble<T>>
where
    T: Send,
    F: Fn(u64, &TimeGrid) -> sigma_core::Result<T> + Sync + Send,
{
    let policy = ctx.settings.policy;
    let results = ctx.workers.try_map(n, |i| {
        let mut g = *grid;
        let mut extensions = 0;
        loop {
            match f(i, &g) {
                Ok(v) => return Ok(Some(v)),
                Err(Error::DegenerateShift { .. })
                    if policy == ShiftPolicy::Extend && extensions < MAX_EXTENSIONS =>
                {
                    extensions += 1;
                    g = TimeGrid::with_steps(g.step(), g.n_steps() * 2)?;
                }
                Err(Error::DegenerateShift { .. }) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
    })?;
    let dropped = results.iter().filter(|r| r.is_none()).count();
    Ok(Ensemble { items: results.into_iter().flatten().collect(), dropped })
}

/// Evaluates `f` on prefixes of `grid`, doubling from
/// `max(min_steps, n/8)` until it returns `Some` or the full grid is
/// reached. `f` is told whether it sees the full grid and must decide
/// there. Prefix sampling draws the same trajectory as the full grid.
pub fn grow<T>(
    grid: &TimeGrid,
    min_steps: usize,
    mut f: impl FnMut(&TimeGrid, bool) -> sigma_core::Result<Option<T>>,
) -> sigma_core::Result<T> {
    let n = grid.n_steps();
    let mut steps = min_steps.max(n / 8).clamp(1, n);
    loop {
        let full = steps == n;
        let g = if full { *grid } else { grid.truncated(steps)? };
        match f(&g, full) {
            Ok(Some(v)) => return Ok(v),
            Ok(None) if full => return Err(Error::Contract("path left undecided on the full grid".into())),
            Err(e) if full || !matches!(e, Error::DegenerateShift { .. }) => return Err(e),
            _ => {}
        }
        steps = (steps * 2).min(n);
    }
}

/// Smallest prefix length on which `model` is fully determined.
pub fn density_min_steps(model: &DensityModel, grid: &TimeGrid) -> sigma_core::Result<usize> {
    Ok(model.intrinsic_index(grid)?.map_or(1, |k| k + 1))
}

/// A density path with its zero set.
pub struct DensityDraw {
    pub sample: DensitySample,
    pub zs: ZeroSetInfo,
}

impl DensityDraw {
    pub fn new(model: &DensityModel, seed: SeedSpec, grid: &TimeGrid) -> sigma_core::Result<Self> {
        let sample = density_path(model, seed, grid)?;
        let zs = zero_set(&sample);
        Ok(DensityDraw { sample, zs })
    }

    pub fn d(&self, k: usize) -> f64 {
        self.sample.density().get(k)
    }

    pub fn terminal(&self) -> f64 {
        self.sample.terminal()
    }
}

/// Brownian driver from 0 on the martingale lane.
pub fn martingale_driver(seed: SeedSpec, grid: &TimeGrid) -> Path {
    sample_bm(grid, 0.0, seed.with_lane(lanes::MARTINGALE))
}

/// Second independent driver from 0.
pub fn auxiliary_driver(seed: SeedSpec, grid: &TimeGrid) -> Path {
    sample_bm(grid, 0.0, seed.with_lane(lanes::AUXILIARY))
}

/// The measure an ensemble average is taken under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    P,
    Pprime,
    Q,
}

pub fn weights(kind: Weighting, terminals: &[f64]) -> sigma_core::Result<Vec<f64>> {
    match kind {
        Weighting::P => Ok(vec![1.0; terminals.len()]),
        Weighting::Pprime => Ok(ensemble_weights(terminals)?.pprime),
        Weighting::Q => Ok(ensemble_weights(terminals)?.q),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub x: f64,
    pub target: f64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    pub points: Vec<CurvePoint>,
}

/// Everything an experiment reports.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<TestReport>,
    pub curves: Vec<Curve>,
    pub dropped_paths: usize,
}

impl ExperimentOutput {
    pub fn push(&mut self, r: TestReport) {
        self.rows.push(r);
    }

    pub fn extend(&mut self, rs: impl IntoIterator<Item = TestReport>) {
        self.rows.extend(rs);
    }
}

/// Turns a check that must fail into a row that passes when it does.
pub fn expect_rejection(mut r: TestReport, name: impl Into<String>) -> TestReport {
    r.name = name.into();
    r.pass = !r.pass;
    r.with_note("negative control: passes when the underlying check fails")
}

#[cfg(test)]
mod tests {
    use super::*;
    use sigma_core::make_grid;

    #[test]
    fn grow_doubles_until_decided() {
        let g = make_grid(8.0, 0.01).unwrap();
        let mut seen = Vec::new();
        let v = grow(&g, 1, |p, _| {
            seen.push(p.n_steps());
            Ok((p.n_steps() >= 300).then_some(p.n_steps()))
        })
        .unwrap();
        assert_eq!(seen, vec![100, 200, 400]);
        assert_eq!(v, 400);
    }

    #[test]
    fn grow_requires_a_decision_at_full_length() {
        let g = make_grid(1.0, 0.1).unwrap();
        assert!(grow(&g, 1, |_, _| Ok::<Option<()>, _>(None)).is_err());
    }

    #[test]
    fn grow_respects_minimum_prefix() {
        let g = make_grid(8.0, 0.01).unwrap();
        let first = std::cell::Cell::new(0);
        grow(&g, 101, |p, _| {
            if first.get() == 0 {
                first.set(p.n_steps());
            }
            Ok(Some(()))
        })
        .unwrap();
        assert_eq!(first.get(), 101);
    }
}
