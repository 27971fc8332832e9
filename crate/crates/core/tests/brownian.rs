//! Distributional checks of the Brownian sampler against closed forms.

use sigma_core::engine::{sample_bm, sample_independent_pair, SeedSpec};
use sigma_core::make_grid;

const SEED: u64 = 7;

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn normal_cdf(x: f64, mean: f64, var: f64) -> f64 {
    0.5 * libm::erfc(-(x - mean) / (2.0 * var).sqrt())
}

#[test]
fn terminal_second_moment_is_horizon() {
    let grid = make_grid(1.0, 0.01).unwrap();
    let sq: Vec<f64> = (0..100_000).map(|i| sample_bm(&grid, 0.0, SeedSpec::new(SEED, i)).terminal().powi(2)).collect();
    let (mean, se) = mean_and_stderr(&sq);
    assert!((mean - 1.0).abs() <= 3.0 * se, "E[B_1^2] = {mean} +- {se}");
}

#[test]
fn pair_is_uncorrelated() {
    let grid = make_grid(1.0, 0.01).unwrap();
    let n = 100_000;
    let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n as u64 {
        let (a, b) = sample_independent_pair(&grid, (0.0, 0.0), SeedSpec::new(SEED, i));
        xs.push(a.terminal());
        ys.push(b.terminal());
    }
    let (mx, _) = mean_and_stderr(&xs);
    let (my, _) = mean_and_stderr(&ys);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let corr = cov / (vx * vy).sqrt();
    assert!(corr.abs() <= 3.0 / (n as f64).sqrt(), "correlation {corr}");
}

#[test]
fn marginal_is_gaussian() {
    let grid = make_grid(1.0, 0.01).unwrap();
    let (start, t) = (0.5, 0.5);
    let k = grid.index_of(t).unwrap();
    let n = 10_000;
    let mut sample: Vec<f64> = (0..n).map(|i| sample_bm(&grid, start, SeedSpec::new(SEED, i)).get(k)).collect();
    sample.sort_by(f64::total_cmp);
    let stat = sample
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let f = normal_cdf(x, start, t);
            (f - j as f64 / n as f64).abs().max((((j + 1) as f64) / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(stat < 1.63 / (n as f64).sqrt(), "KS statistic {stat}");
}

#[test]
fn increments_are_uncorrelated_across_lags() {
    let grid = make_grid(1.0, 0.01).unwrap();
    let n_paths: usize = 2_000;
    let incs: Vec<Vec<f64>> = (0..n_paths)
        .map(|i| sample_bm(&grid, 0.0, SeedSpec::new(SEED, i as u64)).values().windows(2).map(|w| w[1] - w[0]).collect())
        .collect();
    let total = (n_paths * grid.n_steps()) as f64;
    let var = incs.iter().flatten().map(|d| d * d).sum::<f64>() / total;
    for lag in 1..=3 {
        let cov: f64 = incs.iter().map(|v| v.windows(lag + 1).map(|w| w[0] * w[lag]).sum::<f64>()).sum::<f64>()
            / total;
        let rho = cov / var;
        assert!(rho.abs() <= 3.0 / total.sqrt(), "lag {lag}: autocorrelation {rho}");
    }
}

#[test]
fn increment_variance_is_step() {
    let grid = make_grid(1.0, 0.004).unwrap();
    let p = sample_bm(&grid, 0.0, SeedSpec::new(SEED, 0));
    let qv: f64 = p.values().windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    // Realized QV of one path has std sqrt(2 step) around the horizon.
    assert!((qv - 1.0).abs() < 4.0 * (2.0 * grid.step()).sqrt(), "qv {qv}");
}
