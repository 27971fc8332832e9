use sigma_core::balayage::{q_bracket, q_local_time, Functional, PathFunctional};
use sigma_core::density::ZeroSetInfo;
use sigma_core::engine::{sample_bm, SeedSpec};
use sigma_core::stats::ks_test;
use sigma_core::{make_grid, Path};

const SEED: u64 = 23;

/// Local time at 0 from the number of sign changes on a grid of step `dt`:
/// `sqrt(pi dt / 2) · #crossings`.
fn crossing_local_time(values: &[f64], dt: f64) -> f64 {
    let crossings = values.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
    (std::f64::consts::PI * dt / 2.0).sqrt() * crossings as f64
}

#[test]
fn kernel_local_time_of_reflected_bm_matches_mean_and_crossings() {
    let grid = make_grid(1.0, 1e-3).unwrap();
    let bw = grid.step().sqrt();
    let n = 4_000;
    let (mut kernel, mut crossing) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n as u64 {
        let b = sample_bm(&grid, 0.0, SeedSpec::new(SEED, i));
        let x = b.map(f64::abs).unwrap();
        let lt = q_local_time(&x, 0.0, &ZeroSetInfo::empty(grid), bw).unwrap();
        kernel.push(lt.path.terminal());
        crossing.push(crossing_local_time(b.values(), grid.step()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let se = |v: &[f64]| {
        let m = mean(v);
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0) / v.len() as f64).sqrt()
    };
    let target = (2.0 / std::f64::consts::PI).sqrt();
    assert!((mean(&kernel) - target).abs() <= 3.0 * se(&kernel) + 0.05, "kernel E L = {}", mean(&kernel));
    assert!((mean(&crossing) - target).abs() <= 3.0 * se(&crossing) + 0.05, "crossing E L = {}", mean(&crossing));
}

#[test]
fn local_time_at_exit_of_unit_band_is_exponential() {
    let grid = make_grid(8.0, 1e-3).unwrap();
    let bw = grid.step().sqrt();
    let n = 3_000;
    let sample: Vec<f64> = (0..n as u64)
        .map(|i| {
            let b = sample_bm(&grid, 0.0, SeedSpec::new(SEED, i));
            let exit = b.values().iter().position(|v| v.abs() >= 1.0).unwrap_or(grid.n_steps());
            let x = b.truncated(exit).unwrap().map(f64::abs).unwrap();
            Functional::LocalTime { level: 0.0, bandwidth: bw }.apply(&x).terminal()
        })
        .collect();
    let ks = ks_test(&sample, &vec![1.0; n], |x| 1.0 - (-x.max(0.0)).exp(), 0.03).unwrap();
    assert!(ks.pass, "KS {} vs critical {}", ks.statistic, ks.critical);
}

#[test]
fn bracket_of_bm_is_elapsed_time() {
    let grid = make_grid(1.0, 1e-3).unwrap();
    let zs = ZeroSetInfo::empty(grid);
    let n = 400;
    let qvs: Vec<f64> = (0..n)
        .map(|i| {
            let b = sample_bm(&grid, 0.0, SeedSpec::new(SEED, i));
            let qv = q_bracket(&b, &zs).unwrap().terminal();
            // Brute force on the same path.
            let brute: f64 = b.values().windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
            assert!((qv - brute).abs() < 1e-12);
            qv
        })
        .collect();
    let mean = qvs.iter().sum::<f64>() / n as f64;
    let sd = (qvs.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    assert!((mean - 1.0).abs() < 0.05, "mean realized bracket {mean}");
    let expected_sd = (2.0 * grid.step()).sqrt();
    assert!((sd / expected_sd - 1.0).abs() < 0.2, "spread {sd} vs {expected_sd}");
}

#[test]
fn local_time_functional_is_adapted() {
    let f = Functional::LocalTime { level: 0.0, bandwidth: 0.1 };
    assert!(f.is_adapted());
    let grid = make_grid(1.0, 0.1).unwrap();
    let x = Path::from_fn(grid, |t| t - 0.5).unwrap();
    let full = f.apply(&x);
    let part = f.apply(&x.truncated(5).unwrap());
    assert_eq!(&full.values()[..6], part.values());
}
