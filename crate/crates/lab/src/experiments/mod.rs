//! Experiment bodies. Each turns a [`Ctx`](crate::sim::Ctx) into report rows.

pub mod algebra;
pub mod calculus;
pub mod characterization;
pub mod classes;
pub mod density;
pub mod passage;

use sigma_core::stats::{flatness_test, TestReport};
use sigma_core::TimeGrid;

use crate::error::Result;

pub(crate) fn checkpoint_indices(grid: &TimeGrid, checkpoints: &[f64]) -> Vec<usize> {
    checkpoints.iter().map(|&t| grid.floor_index(t)).collect()
}

/// `per_path[p]` holds `series × checkpoints` values, series-major. One
/// flatness row per series.
pub(crate) fn flatness_rows(
    names: &[String],
    checkpoints: &[f64],
    per_path: &[Vec<f64>],
    weights: &[f64],
) -> Result<Vec<TestReport>> {
    let nc = checkpoints.len();
    names
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let values: Vec<Vec<f64>> =
                (0..nc).map(|c| per_path.iter().map(|r| r[s * nc + c]).collect()).collect();
            Ok(flatness_test(checkpoints, &values, weights)?.to_test_report(name.clone()))
        })
        .collect()
}

pub(crate) fn column<T>(items: &[T], f: impl Fn(&T) -> f64) -> Vec<f64> {
    items.iter().map(f).collect()
}

/// A count that must be zero.
pub(crate) fn zero_count(name: impl Into<String>, count: usize, n: usize) -> TestReport {
    TestReport::exact(name, 0.0, count as f64, n)
}
