//! Density martingales of a signed measure, their zero sets, and the
//! reweighted ensemble measures.
//!
//! `Q` is represented through its density `D_t = dQ/dP` on `F_t`. The zero
//! set `H = {t : D_t = 0}` is located on the grid by sign changes: a change
//! over `(t_k, t_{k+1}]` puts `t_{k+1}` into `H`. `gbar` is the last point of
//! `H` (0 when `H` is empty) and `gamma(t)` the last point of `H` at or
//! before `t`.

use serde::{Deserialize, Serialize};
use libm::erf;

use crate::engine::{lanes, sample_bm, SeedSpec};
use crate::ensemble::stable_sum;
use crate::error::{Error, Result};
use crate::grid::{Path, TimeGrid};

/// The density martingale `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityModel {
    /// `D = 1`: `Q` is the probability `P` itself.
    ConstantOne,
    /// `D_t = B_{t ∧ stop_time}` for a Brownian motion with `B_0 = start`.
    StoppedBm { start: f64, stop_time: f64 },
    /// `D_t = 2Φ((W_t + offset)/sqrt(T - t)) - 1` before `T = terminal_time`
    /// and `sign(W_T + offset)` afterwards, so `|D_T| = 1` on every path.
    ErfSign { offset: f64, terminal_time: f64 },
}

impl DensityModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DensityModel::ConstantOne => Ok(()),
            DensityModel::StoppedBm { start, stop_time } => {
                if !(start.is_finite() && start > 0.0) {
                    return Err(Error::Config(format!("stopped BM start must be > 0, got {start}")));
                }
                positive("stop_time", stop_time)
            }
            DensityModel::ErfSign { offset, terminal_time } => {
                if !(offset.is_finite() && offset > 0.0) {
                    return Err(Error::Config(format!("erf-sign offset must be > 0, got {offset}")));
                }
                positive("terminal_time", terminal_time)
            }
        }
    }

    /// Time after which the density is constant, if any.
    pub fn intrinsic_time(&self) -> Option<f64> {
        match *self {
            DensityModel::ConstantOne => None,
            DensityModel::StoppedBm { stop_time, .. } => Some(stop_time),
            DensityModel::ErfSign { terminal_time, .. } => Some(terminal_time),
        }
    }

    /// `D_0`, which equals the total mass `Q(1)`.
    pub fn initial_value(&self) -> f64 {
        match *self {
            DensityModel::ConstantOne => 1.0,
            DensityModel::StoppedBm { start, .. } => start,
            DensityModel::ErfSign { offset, terminal_time } => {
                erf(offset / (2.0 * terminal_time).sqrt())
            }
        }
    }

    /// Grid index of the intrinsic time; errors when the grid is too short
    /// or the time is not a grid point.
    pub fn intrinsic_index(&self, grid: &TimeGrid) -> Result<Option<usize>> {
        let Some(t) = self.intrinsic_time() else {
            return Ok(None);
        };
        if t > grid.horizon() * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "grid horizon {} is shorter than the density's intrinsic time {t}",
                grid.horizon()
            )));
        }
        grid.index_of(t).map(Some).ok_or_else(|| {
            Error::Config(format!("intrinsic time {t} is not a multiple of step {}", grid.step()))
        })
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be > 0, got {v}")))
    }
}

/// A sampled density path together with the Brownian driver it was built
/// from (`None` for the constant density). The driver only covers
/// `[0, intrinsic_time]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySample {
    model: DensityModel,
    density: Path,
    driver: Option<Path>,
}

impl DensitySample {
    pub fn model(&self) -> &DensityModel {
        &self.model
    }

    pub fn density(&self) -> &Path {
        &self.density
    }

    pub fn driver(&self) -> Option<&Path> {
        self.driver.as_ref()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.density.grid()
    }

    /// `D_∞`, realized as the value at the grid horizon.
    pub fn terminal(&self) -> f64 {
        self.density.terminal()
    }

    /// Observes the same trajectory on a grid `factor` times coarser.
    pub fn subsample(&self, factor: usize) -> Result<DensitySample> {
        Ok(DensitySample {
            model: self.model,
            density: self.density.subsample(factor)?,
            driver: self.driver.as_ref().map(|d| d.subsample(factor)).transpose()?,
        })
    }
}

/// Samples `D` on `grid` using the density lane of `seed`.
pub fn density_path(model: &DensityModel, seed: SeedSpec, grid: &TimeGrid) -> Result<DensitySample> {
    model.validate()?;
    let seed = seed.with_lane(lanes::DENSITY);
    let n = grid.len();
    let (density, driver) = match *model {
        DensityModel::ConstantOne => (Path::constant(*grid, 1.0), None),
        DensityModel::StoppedBm { start, .. } => {
            let k_stop = model.intrinsic_index(grid)?.unwrap_or(grid.n_steps());
            let driver = sample_bm(&grid.truncated(k_stop.max(1))?, start, seed);
            let frozen = driver.values()[k_stop];
            let mut values = driver.values()[..=k_stop].to_vec();
            values.resize(n, frozen);
            (Path::new(*grid, values)?, Some(driver))
        }
        DensityModel::ErfSign { offset, terminal_time } => {
            let k_end = model.intrinsic_index(grid)?.unwrap_or(grid.n_steps());
            let driver = sample_bm(&grid.truncated(k_end.max(1))?, 0.0, seed);
            let w = driver.values();
            let mut values = Vec::with_capacity(n);
            for (k, &wk) in w.iter().enumerate().take(k_end) {
                let remaining = terminal_time - grid.time(k);
                values.push(erf((wk + offset) / (2.0 * remaining).sqrt()));
            }
            let last = w[k_end] + offset;
            let sign = if last > 0.0 {
                1.0
            } else if last < 0.0 {
                -1.0
            } else {
                0.0
            };
            values.resize(n, sign);
            (Path::new(*grid, values)?, Some(driver))
        }
    };
    Ok(DensitySample { model: *model, density, driver })
}

/// Grid picture of `H` and the random times built from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSetInfo {
    grid: TimeGrid,
    crossings: Vec<(usize, usize)>,
    h: Vec<usize>,
    excursion_starts: Vec<usize>,
}

impl ZeroSetInfo {
    /// `H = ∅`: `gbar = 0` and `gamma ≡ 0`.
    pub fn empty(grid: TimeGrid) -> Self {
        ZeroSetInfo { grid, crossings: Vec::new(), h: Vec::new(), excursion_starts: vec![0] }
    }

    /// Applies the sign-change rule to `series`, which may be shorter than
    /// the grid (points past its end are treated as zero-free).
    pub fn from_sign_changes(grid: TimeGrid, series: &[f64]) -> Self {
        debug_assert!(series.len() <= grid.len());
        let mut crossings = Vec::new();
        let mut h: Vec<usize> = Vec::new();
        for (k, w) in series.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            if a * b <= 0.0 && !(a == 0.0 && b == 0.0) {
                crossings.push((k, k + 1));
                if h.last() != Some(&(k + 1)) {
                    h.push(k + 1);
                }
            }
        }
        let mut excursion_starts = Vec::new();
        if h.first() != Some(&0) {
            excursion_starts.push(0);
        }
        for (i, &k) in h.iter().enumerate() {
            let next_in_h = h.get(i + 1) == Some(&(k + 1));
            if !next_in_h && k < grid.n_steps() {
                excursion_starts.push(k);
            }
        }
        ZeroSetInfo { grid, crossings, h, excursion_starts }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn crossing_intervals(&self) -> &[(usize, usize)] {
        &self.crossings
    }

    pub fn h_indices(&self) -> &[usize] {
        &self.h
    }

    pub fn contains(&self, k: usize) -> bool {
        self.h.binary_search(&k).is_ok()
    }

    pub fn gbar_index(&self) -> usize {
        self.h.last().copied().unwrap_or(0)
    }

    pub fn gbar(&self) -> f64 {
        self.grid.time(self.gbar_index())
    }

    /// Index of the last `H` point at or before `k` (0 when there is none).
    pub fn gamma_index(&self, k: usize) -> usize {
        let i = self.h.partition_point(|&h| h <= k);
        if i == 0 {
            0
        } else {
            self.h[i - 1]
        }
    }

    pub fn gamma(&self, k: usize) -> f64 {
        self.grid.time(self.gamma_index(k))
    }

    /// Index of the last `H` point strictly before `k` (0 when there is none).
    pub fn gbar_before_index(&self, k: usize) -> usize {
        let i = self.h.partition_point(|&h| h < k);
        if i == 0 {
            0
        } else {
            self.h[i - 1]
        }
    }

    pub fn gbar_before(&self, k: usize) -> f64 {
        self.grid.time(self.gbar_before_index(k))
    }

    /// Left endpoints of the grid components of the complement of `H`.
    pub fn excursion_start_indices(&self) -> &[usize] {
        &self.excursion_starts
    }

    pub fn excursion_starts(&self) -> Vec<f64> {
        self.excursion_starts.iter().map(|&k| self.grid.time(k)).collect()
    }

    /// Half-open index ranges `[start, end)` between consecutive points of
    /// `{0} ∪ H`; every grid index lies in exactly one block.
    pub fn blocks(&self) -> Blocks<'_> {
        Blocks { h: &self.h, next: 0, pos: 0, len: self.grid.len() }
    }
}

/// Iterator returned by [`ZeroSetInfo::blocks`].
pub struct Blocks<'a> {
    h: &'a [usize],
    next: usize,
    pos: usize,
    len: usize,
}

impl Iterator for Blocks<'_> {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        if self.pos >= self.len {
            return None;
        }
        let start = self.pos;
        while self.next < self.h.len() && self.h[self.next] <= start {
            self.next += 1;
        }
        let end = self.h.get(self.next).copied().unwrap_or(self.len);
        self.pos = end;
        Some((start, end))
    }
}

/// Locates `H` for a sampled density. The erf-sign density vanishes exactly
/// when its driver crosses `-offset`, so that variant is detected on the
/// driver and never through the normal CDF.
pub fn zero_set(sample: &DensitySample) -> ZeroSetInfo {
    let grid = *sample.grid();
    match (sample.model, sample.driver.as_ref()) {
        (DensityModel::ConstantOne, _) => ZeroSetInfo::empty(grid),
        (DensityModel::ErfSign { offset, .. }, Some(w)) => {
            let shifted: Vec<f64> = w.values().iter().map(|v| v + offset).collect();
            ZeroSetInfo::from_sign_changes(grid, &shifted)
        }
        _ => ZeroSetInfo::from_sign_changes(grid, sample.density.values()),
    }
}

/// Per-path weights realizing `E`, `E'` and `Q` over an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleWeights {
    /// `|D_∞|` per path.
    pub raw: Vec<f64>,
    /// Empirical mean of `raw`.
    pub normalizer: f64,
    /// `|D_∞| / E|D_∞|`: weights of `P' = |D_∞|/E|D_∞| · P`.
    pub pprime: Vec<f64>,
    /// Signed `D_∞`: `Q(Z) = E[D_∞ Z]`.
    pub q: Vec<f64>,
}

pub fn ensemble_weights(terminals: &[f64]) -> Result<EnsembleWeights> {
    if terminals.is_empty() {
        return Err(Error::EmptyInput("density terminal values"));
    }
    let raw: Vec<f64> = terminals.iter().map(|d| d.abs()).collect();
    let normalizer = stable_sum(raw.iter().copied()) / raw.len() as f64;
    if normalizer == 0.0 {
        return Err(Error::DegenerateMeasure);
    }
    let pprime = raw.iter().map(|r| r / normalizer).collect();
    Ok(EnsembleWeights { raw, normalizer, pprime, q: terminals.to_vec() })
}

/// The two (Q,P)-martingales built from a driver independent of `D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MartingaleKind {
    /// The driver `W` itself.
    IndependentBm,
    /// `exp(W_t - t/2)`.
    Exponential,
}

/// Independence of the driver from `D` makes `M·D` a `P`-martingale.
pub fn qp_martingale(kind: MartingaleKind, driver: &Path) -> Path {
    match kind {
        MartingaleKind::IndependentBm => driver.clone(),
        MartingaleKind::Exponential => {
            let g = *driver.grid();
            let values = driver
                .values()
                .iter()
                .enumerate()
                .map(|(k, w)| (w - 0.5 * g.time(k)).exp())
                .collect();
            Path::from_parts(g, values)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn constant_density_has_no_zeros() {
        let g = make_grid(1.0, 0.1).unwrap();
        let s = density_path(&DensityModel::ConstantOne, SeedSpec::new(1, 0), &g).unwrap();
        assert!(s.density().values().iter().all(|&v| v == 1.0));
        let zs = zero_set(&s);
        assert!(zs.h_indices().is_empty());
        assert_eq!(zs.gbar(), 0.0);
        assert!((0..g.len()).all(|k| zs.gamma(k) == 0.0));
    }

    #[test]
    fn hand_worked_sign_changes() {
        let g = make_grid(3.0, 1.0).unwrap();
        let zs = ZeroSetInfo::from_sign_changes(g, &[1.0, 0.5, -0.2, 0.3]);
        assert_eq!(zs.crossing_intervals(), &[(1, 2), (2, 3)]);
        assert_eq!(zs.h_indices(), &[2, 3]);
        assert_eq!(zs.gbar(), 3.0);
        assert_eq!(zs.gamma(2), 2.0);
        assert_eq!(zs.gamma(1), 0.0);
        assert_eq!(zs.gbar_before(3), 2.0);
        assert_eq!(zs.gbar_before(2), 0.0);
        assert_eq!(zs.excursion_start_indices(), &[0]);
        let blocks: Vec<_> = zs.blocks().collect();
        assert_eq!(blocks, vec![(0, 2), (2, 3), (3, 4)]);
    }

    #[test]
    fn both_zero_is_not_a_crossing() {
        let g = make_grid(3.0, 1.0).unwrap();
        let zs = ZeroSetInfo::from_sign_changes(g, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(zs.crossing_intervals(), &[(0, 1), (2, 3)]);
        assert_eq!(zs.h_indices(), &[1, 3]);
        assert_eq!(zs.excursion_start_indices(), &[0, 1]);
    }

    #[test]
    fn erf_sign_initial_value() {
        let m = DensityModel::ErfSign { offset: 1.0, terminal_time: 1.0 };
        let g = make_grid(2.0, 0.01).unwrap();
        let s = density_path(&m, SeedSpec::new(5, 3), &g).unwrap();
        let expected = 0.682_689_492_137_085_9; // 2Φ(1) - 1
        assert!((s.density().initial() - expected).abs() < 1e-12, "{}", s.density().initial());
        assert!((m.initial_value() - expected).abs() < 1e-12);
        let k_t = g.index_of(1.0).unwrap();
        assert!(s.density().values()[k_t..].iter().all(|v| v.abs() == 1.0));
    }

    #[test]
    fn stopped_bm_freezes() {
        let m = DensityModel::StoppedBm { start: 1.0, stop_time: 0.5 };
        let g = make_grid(1.0, 0.01).unwrap();
        let s = density_path(&m, SeedSpec::new(5, 3), &g).unwrap();
        let d = s.density().values();
        assert_eq!(d[0], 1.0);
        assert!(d[50..].iter().all(|&v| v == d[50]));
        assert!(d[..50].windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn short_horizon_is_a_configuration_error() {
        let g = make_grid(0.5, 0.01).unwrap();
        let m = DensityModel::StoppedBm { start: 1.0, stop_time: 1.0 };
        assert!(matches!(density_path(&m, SeedSpec::new(1, 1), &g), Err(Error::Config(_))));
    }

    #[test]
    fn weights_arithmetic() {
        let w = ensemble_weights(&[2.0, 0.0, 1.0]).unwrap();
        assert_eq!(w.normalizer, 1.0);
        assert_eq!(w.pprime, vec![2.0, 0.0, 1.0]);
        assert_eq!(w.q, vec![2.0, 0.0, 1.0]);
        let signed = ensemble_weights(&[1.0, -1.0, -1.0, 1.0]).unwrap();
        assert!(signed.pprime.iter().all(|&p| p == 1.0));
        assert_eq!(ensemble_weights(&[0.0, 0.0]), Err(Error::DegenerateMeasure));
        assert!(matches!(ensemble_weights(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn martingales_from_driver() {
        let g = make_grid(1.0, 0.25).unwrap();
        let w = sample_bm(&g, 0.0, SeedSpec::new(2, 2));
        assert_eq!(qp_martingale(MartingaleKind::IndependentBm, &w), w);
        let e = qp_martingale(MartingaleKind::Exponential, &w);
        assert_eq!(e.initial(), 1.0);
        assert!((e.get(4) - (w.get(4) - 0.5).exp()).abs() < 1e-15);
    }
}
