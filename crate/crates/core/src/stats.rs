//! Weighted Monte Carlo estimates, pass/fail reports, flatness and
//! Kolmogorov–Smirnov tests.

use serde::{Deserialize, Serialize};

use crate::ensemble::stable_sum;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
}

impl McEstimate {
    pub fn from_parts(n: usize, mean: f64, stderr: f64) -> Self {
        McEstimate { n, mean, stderr, ci95: (mean - 1.96 * stderr, mean + 1.96 * stderr) }
    }

    /// Plain sample mean with `stderr = sd / sqrt(n)`.
    pub fn from_samples(v: &[f64]) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::EmptyInput("samples"));
        }
        let n = v.len();
        let mean = stable_sum(v.iter().copied()) / n as f64;
        let var = if n > 1 {
            stable_sum(v.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64
        } else {
            0.0
        };
        Ok(Self::from_parts(n, mean, (var / n as f64).sqrt()))
    }
}

/// `Σ w_i v_i / n` with the stderr of the products `w_i v_i`. With `P'`
/// weights (mean 1) this estimates `E'`; with signed `D_∞` weights it
/// estimates `Q`.
pub fn weighted_mean(values: &[f64], weights: &[f64]) -> Result<McEstimate> {
    if values.len() != weights.len() {
        return Err(Error::Contract(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    let products: Vec<f64> = values.iter().zip(weights).map(|(v, w)| v * w).collect();
    McEstimate::from_samples(&products)
}

/// The parts of a tolerance: `k·stderr + grid + truncation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub stderr_multiple: f64,
    pub stderr_part: f64,
    pub grid_allowance: f64,
    pub truncation_allowance: f64,
}

impl Tolerance {
    pub fn total(&self) -> f64 {
        self.stderr_part + self.grid_allowance + self.truncation_allowance
    }
}

/// How an estimate is compared with its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `|mean - target| ≤ tolerance`.
    Within,
    /// `mean ≥ target`; used for convergence ratios.
    AtLeast,
    /// `mean ≤ target`.
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub target: f64,
    pub estimate: McEstimate,
    pub tolerance: Tolerance,
    pub rule: Rule,
    pub z_score: f64,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl TestReport {
    /// Pass iff `|mean - target| ≤ k·stderr + grid + truncation`.
    pub fn new(
        name: impl Into<String>,
        target: f64,
        estimate: McEstimate,
        stderr_multiple: f64,
        grid_allowance: f64,
        truncation_allowance: f64,
    ) -> Self {
        let tolerance = Tolerance {
            stderr_multiple,
            stderr_part: stderr_multiple * estimate.stderr,
            grid_allowance,
            truncation_allowance,
        };
        let diff = estimate.mean - target;
        let z_score = if estimate.stderr > 0.0 {
            diff / estimate.stderr
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::MAX
        };
        TestReport {
            name: name.into(),
            target,
            estimate,
            tolerance,
            rule: Rule::Within,
            z_score,
            pass: diff.abs() <= tolerance.total(),
            notes: Vec::new(),
        }
    }

    /// A deterministic quantity that must equal `target` exactly, such as
    /// a count of violations.
    pub fn exact(name: impl Into<String>, target: f64, value: f64, n: usize) -> Self {
        TestReport::new(name, target, McEstimate::from_parts(n, value, 0.0), 0.0, 0.0, 0.0)
    }

    /// Passes iff `value ≤ threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64, n: usize) -> Self {
        let mut r = TestReport::new(name, threshold, McEstimate::from_parts(n, value, 0.0), 0.0, 0.0, 0.0);
        r.rule = Rule::AtMost;
        r.pass = value <= threshold;
        r
    }

    /// Passes iff `value ≥ threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64, n: usize) -> Self {
        let mut r = TestReport::new(name, threshold, McEstimate::from_parts(n, value, 0.0), 0.0, 0.0, 0.0);
        r.rule = Rule::AtLeast;
        r.pass = value >= threshold;
        r
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub checkpoints: Vec<f64>,
    pub estimates: Vec<McEstimate>,
    /// Largest `|m_i - m_j| / sqrt(se_i^2 + se_j^2)` over checkpoint pairs.
    pub max_z: f64,
    /// Pair attaining `max_z`.
    pub worst_pair: (usize, usize),
    pub pass: bool,
}

/// Threshold on the pairwise flatness z-score.
pub const FLATNESS_Z: f64 = 4.0;

impl FlatnessReport {
    /// The worst pair as a [`TestReport`] on the difference of means.
    pub fn to_test_report(&self, name: impl Into<String>) -> TestReport {
        let (i, j) = self.worst_pair;
        let (a, b) = (self.estimates[i], self.estimates[j]);
        let se = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
        let est = McEstimate::from_parts(a.n.min(b.n), a.mean - b.mean, se);
        let mut r = TestReport::new(name, 0.0, est, FLATNESS_Z, 0.0, 0.0);
        r.pass = self.pass;
        r.with_note(format!(
            "checkpoints t={} vs t={}, max z {:.3}",
            self.checkpoints[i], self.checkpoints[j], self.max_z
        ))
    }
}

/// Weighted means of a process at each checkpoint; flat iff every pairwise
/// z-score is below 4. `values[c][p]` is path `p` at checkpoint `c`.
pub fn flatness_test(checkpoints: &[f64], values: &[Vec<f64>], weights: &[f64]) -> Result<FlatnessReport> {
    if checkpoints.len() != values.len() {
        return Err(Error::Contract("one value column per checkpoint is required".into()));
    }
    if checkpoints.is_empty() {
        return Err(Error::EmptyInput("checkpoints"));
    }
    let estimates = values.iter().map(|v| weighted_mean(v, weights)).collect::<Result<Vec<_>>>()?;
    let (mut max_z, mut worst_pair) = (0.0_f64, (0, 0));
    for i in 0..estimates.len() {
        for j in i + 1..estimates.len() {
            let (a, b) = (estimates[i], estimates[j]);
            let diff = (a.mean - b.mean).abs();
            let se = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
            let z = if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            if z > max_z || (i, j) == (0, 1) {
                max_z = z;
                worst_pair = (i, j);
            }
        }
    }
    Ok(FlatnessReport {
        checkpoints: checkpoints.to_vec(),
        estimates,
        max_z,
        worst_pair,
        pass: max_z < FLATNESS_Z,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub n_effective: f64,
    pub critical: f64,
    pub pass: bool,
}

/// 1% critical constant of the one-sample KS statistic.
pub const KS_CRITICAL_1PCT: f64 = 1.63;

/// Weighted KS statistic against `cdf`; passes iff it is below
/// `1.63 / sqrt(n_eff) + allowance` with `n_eff = (Σw)^2 / Σw^2`.
pub fn ks_test(sample: &[f64], weights: &[f64], cdf: impl Fn(f64) -> f64, allowance: f64) -> Result<KsResult> {
    if sample.len() != weights.len() {
        return Err(Error::Contract("sample and weights differ in length".into()));
    }
    if sample.is_empty() {
        return Err(Error::EmptyInput("KS sample"));
    }
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::Contract("KS weights must be finite and nonnegative".into()));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(Error::DegenerateSample("NaN in KS sample".into()));
    }
    let total = stable_sum(weights.iter().copied());
    if total <= 0.0 {
        return Err(Error::DegenerateSample("KS weights sum to zero".into()));
    }
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.sort_by(|&i, &j| sample[i].total_cmp(&sample[j]));
    let mut stat = 0.0_f64;
    let mut below = 0.0;
    let mut k = 0;
    while k < order.len() {
        let x = sample[order[k]];
        let mut mass = 0.0;
        while k < order.len() && sample[order[k]] == x {
            mass += weights[order[k]];
            k += 1;
        }
        let f = cdf(x);
        let before = below / total;
        below += mass;
        let after = below / total;
        stat = stat.max((f - before).abs()).max((after - f).abs());
    }
    let sum_sq = stable_sum(weights.iter().map(|w| w * w));
    let n_effective = total * total / sum_sq;
    let critical = KS_CRITICAL_1PCT / n_effective.sqrt() + allowance;
    Ok(KsResult { statistic: stat, n_effective, critical, pass: stat < critical })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_weights_give_sample_mean() {
        let e = weighted_mean(&[1.0, 2.0, 3.0, 4.0], &[1.0; 4]).unwrap();
        assert_eq!(e.mean, 2.5);
        assert!((e.stderr - (5.0_f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!((e.ci95.1 - e.mean - 1.96 * e.stderr).abs() < 1e-15);
        assert!(matches!(weighted_mean(&[], &[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn report_rule() {
        let e = McEstimate::from_parts(100, 0.5, 0.01);
        assert!(TestReport::new("a", 0.529, e, 3.0, 0.0, 0.0).pass);
        assert!(!TestReport::new("b", 0.531, e, 3.0, 0.0, 0.0).pass);
        let r = TestReport::new("c", 0.549, e, 3.0, 0.02, 0.0);
        assert!(r.pass);
        assert!((r.z_score + 4.9).abs() < 1e-9);
    }

    #[test]
    fn flatness_of_constant_and_drift() {
        let w = vec![1.0; 50];
        let cps = [0.25, 0.5, 1.0];
        let flat: Vec<Vec<f64>> = cps.iter().map(|_| vec![2.0; 50]).collect();
        let r = flatness_test(&cps, &flat, &w).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_z, 0.0);
        let noisy: Vec<Vec<f64>> = cps
            .iter()
            .map(|t| (0..50).map(|i| t + if i % 2 == 0 { 0.01 } else { -0.01 }).collect())
            .collect();
        assert!(!flatness_test(&cps, &noisy, &w).unwrap().pass);
    }

    #[test]
    fn ks_detects_shift() {
        let n = 2000;
        let exp_cdf = |x: f64| if x <= 0.0 { 0.0 } else { 1.0 - (-x).exp() };
        let sample: Vec<f64> = (0..n).map(|i| -(1.0 - (i as f64 + 0.5) / n as f64).ln()).collect();
        let w = vec![1.0; n];
        let good = ks_test(&sample, &w, exp_cdf, 0.0).unwrap();
        assert!(good.pass && good.statistic < 1e-3);
        let shifted: Vec<f64> = sample.iter().map(|x| x + 0.5).collect();
        assert!(!ks_test(&shifted, &w, exp_cdf, 0.0).unwrap().pass);
        assert!(ks_test(&sample, &vec![-1.0; n], exp_cdf, 0.0).is_err());
        assert!(matches!(ks_test(&sample, &vec![0.0; n], exp_cdf, 0.0), Err(Error::DegenerateSample(_))));
    }
}
