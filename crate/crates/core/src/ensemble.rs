//! Ensemble execution with worker-count independent results.
//!
//! Paths are evaluated in parallel, collected in path-index order, and every
//! cross-path reduction runs sequentially over that order.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Thread pool used to evaluate per-path closures.
pub struct Workers {
    pool: rayon::ThreadPool,
}

impl Workers {
    /// `0` means one worker per available core.
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
        Ok(Workers { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Evaluates `f(i)` for `i in 0..n` and returns the results in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..n as u64).into_par_iter().map(&f).collect())
    }

    /// Like [`Workers::map`] but stops at the first error (in index order).
    pub fn try_map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }
}

impl Default for Workers {
    fn default() -> Self {
        Workers::new(0).expect("default worker pool")
    }
}

/// Neumaier-compensated sum in iteration order.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if f64::abs(sum) >= f64::abs(v) {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}
