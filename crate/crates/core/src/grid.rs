//! Uniform time grids and real-valued sample paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DIVISIBILITY_TOL: f64 = 1e-9;

/// Uniform grid `{0, step, 2 step, ..., n_steps step}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    step: f64,
    horizon: f64,
    n_steps: usize,
}

/// Builds the grid `{0, step, ..., horizon}`; `horizon / step` must be an
/// integer up to a relative rounding tolerance of `1e-9`.
pub fn make_grid(horizon: f64, step: f64) -> Result<TimeGrid> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Config(format!("step must be positive, got {step}")));
    }
    let ratio = horizon / step;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > DIVISIBILITY_TOL * n.max(1.0) {
        return Err(Error::Config(format!(
            "horizon {horizon} is not an integer multiple of step {step}"
        )));
    }
    Ok(TimeGrid { step, horizon, n_steps: n as usize })
}

impl TimeGrid {
    /// Grid with `n_steps` steps of size `step`.
    pub fn with_steps(step: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::Config("grid needs at least one step".into()));
        }
        make_grid(step * n_steps as f64, step).map(|mut g| {
            g.n_steps = n_steps;
            g
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(move |k| self.time(k))
    }

    /// Index of the grid point equal to `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let r = t / self.step;
        let k = r.round();
        if k < 0.0 || k > self.n_steps as f64 || (r - k).abs() > DIVISIBILITY_TOL * k.max(1.0) {
            None
        } else {
            Some(k as usize)
        }
    }

    /// Largest grid index whose time does not exceed `t` (clamped to the grid).
    pub fn floor_index(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        match self.index_of(t) {
            Some(k) => k,
            None => ((t / self.step).floor() as usize).min(self.n_steps),
        }
    }

    /// The first `n_steps` steps of this grid.
    pub fn truncated(&self, n_steps: usize) -> Result<Self> {
        if n_steps == 0 || n_steps > self.n_steps {
            return Err(Error::Config(format!(
                "cannot truncate a {}-step grid to {n_steps} steps",
                self.n_steps
            )));
        }
        Ok(TimeGrid { step: self.step, horizon: self.step * n_steps as f64, n_steps })
    }

    /// Every `factor`-th point of this grid.
    pub fn coarsened(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return Err(Error::Config(format!(
                "cannot coarsen {} steps by a factor {factor}",
                self.n_steps
            )));
        }
        Ok(TimeGrid {
            step: self.step * factor as f64,
            horizon: self.horizon,
            n_steps: self.n_steps / factor,
        })
    }
}

/// Real process sampled at every point of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl Path {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Contract(format!(
                "path has {} values but the grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite path value at index {k}")));
        }
        Ok(Path { grid, values })
    }

    /// Skips validation; callers guarantee length and finiteness.
    pub(crate) fn from_parts(grid: TimeGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Path { grid, values }
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Self {
        Path { grid, values: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Path::new(grid, grid.times().map(f).collect())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn initial(&self) -> f64 {
        self.values[0]
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Value at the last grid point not after `t`.
    pub fn at_time(&self, t: f64) -> f64 {
        self.values[self.grid.floor_index(t)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Path> {
        Path::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two paths on the same grid.
    pub fn zip_with(&self, other: &Path, f: impl Fn(f64, f64) -> f64) -> Result<Path> {
        self.require_same_grid(other)?;
        Path::new(
            self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    /// Keeps every `factor`-th sample: the same trajectory observed on a coarser grid.
    pub fn subsample(&self, factor: usize) -> Result<Path> {
        let grid = self.grid.coarsened(factor)?;
        Ok(Path { grid, values: self.values.iter().step_by(factor).copied().collect() })
    }

    pub fn truncated(&self, n_steps: usize) -> Result<Path> {
        let grid = self.grid.truncated(n_steps)?;
        Ok(Path { grid, values: self.values[..=n_steps].to_vec() })
    }

    pub(crate) fn require_same_grid(&self, other: &Path) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Contract("paths live on different grids".into()));
        }
        Ok(())
    }

    /// Largest absolute pointwise difference.
    pub fn sup_distance(&self, other: &Path) -> Result<f64> {
        self.require_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
    }
}
