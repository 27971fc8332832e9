//! Closed-form targets and per-path event outcomes for the maximal,
//! first-passage, `A_∞` and Lévy-type identities.
//!
//! "∞" horizons are realized by truncation. Each per-path [`Outcome`]
//! records how much of its indicator could still change after the grid
//! horizon; its weighted mean is reported as the truncation allowance.

use serde::{Deserialize, Serialize};

use crate::ensemble::stable_sum;
use crate::error::{Error, Result};
use crate::stats::{ks_test, weighted_mean, KsResult, McEstimate, TestReport};

/// One piece of a piecewise-constant `φ`; `value: None` means `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiStep {
    pub from: f64,
    #[serde(default)]
    pub value: Option<f64>,
}

/// A positive Borel function `φ` with closed-form `I(u) = ∫_0^u dz/φ(z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiSpec {
    Constant { c: f64 },
    /// `φ(z) = a e^z`.
    Exponential { a: f64 },
    /// `φ(z) = value` on `[from_i, from_{i+1})`; the first piece starts at 0.
    Table { steps: Vec<PhiStep> },
}

impl PhiSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PhiSpec::Constant { c } if !(*c > 0.0) => Err(Error::Config(format!("phi constant must be > 0, got {c}"))),
            PhiSpec::Exponential { a } if !(*a > 0.0 && a.is_finite()) => {
                Err(Error::Config(format!("phi exponential rate must be > 0, got {a}")))
            }
            PhiSpec::Table { steps } => {
                if steps.first().map(|s| s.from) != Some(0.0) {
                    return Err(Error::Config("phi table must start at 0".into()));
                }
                if steps.windows(2).any(|w| !(w[1].from > w[0].from)) {
                    return Err(Error::Config("phi table breakpoints must increase".into()));
                }
                if steps.iter().any(|s| s.value.is_some_and(|v| !(v > 0.0))) {
                    return Err(Error::Config("phi table values must be > 0".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn phi(&self, z: f64) -> f64 {
        match self {
            PhiSpec::Constant { c } => *c,
            PhiSpec::Exponential { a } => a * z.exp(),
            PhiSpec::Table { steps } => {
                let i = steps.partition_point(|s| s.from <= z).max(1) - 1;
                steps[i].value.unwrap_or(f64::INFINITY)
            }
        }
    }

    /// `I(u) = ∫_0^u dz/φ(z)`; `u = ∞` is allowed.
    pub fn integral(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match self {
            PhiSpec::Constant { c } => u / c,
            PhiSpec::Exponential { a } => -(-u).exp_m1() / a,
            PhiSpec::Table { steps } => {
                let mut acc = 0.0;
                for (i, s) in steps.iter().enumerate() {
                    let end = steps.get(i + 1).map_or(f64::INFINITY, |n| n.from).min(u);
                    if end <= s.from {
                        break;
                    }
                    if let Some(v) = s.value {
                        acc += (end - s.from) / v;
                    }
                }
                acc
            }
        }
    }

    pub fn integral_inf(&self) -> f64 {
        self.integral(f64::INFINITY)
    }

    /// Level from which `φ = ∞` for good, if any.
    pub fn infinite_from(&self) -> Option<f64> {
        match self {
            PhiSpec::Table { steps } => steps.last().filter(|s| s.value.is_none()).map(|s| s.from),
            _ => None,
        }
    }

    /// `F(x) = 1 - exp(-∫_x^∞ dz/φ)`.
    #[allow(non_snake_case)]
    pub fn F_of(&self, x: f64) -> f64 {
        let tail = self.integral_inf() - self.integral(x);
        -(-tail).exp_m1()
    }

    /// `f = F' = -(1 - F)/φ`.
    pub fn f_of(&self, x: f64) -> f64 {
        -(1.0 - self.F_of(x)) / self.phi(x)
    }

    /// `F_u(x) = 1 - exp(-∫_x^u dz/φ)` for `x < u`, 0 beyond.
    #[allow(non_snake_case)]
    pub fn Fu_of(&self, x: f64, u: f64) -> f64 {
        if x >= u {
            return 0.0;
        }
        -(-(self.integral(u) - self.integral(x))).exp_m1()
    }

    pub fn fu_of(&self, x: f64, u: f64) -> f64 {
        if x >= u {
            return 0.0;
        }
        -(1.0 - self.Fu_of(x, u)) / self.phi(x)
    }

    /// `M^u = F_u(A) - f_u(A) X`.
    pub fn m_u(&self, a: f64, x: f64, u: f64) -> f64 {
        self.Fu_of(a, u) - self.fu_of(a, u) * x
    }
}

/// `λ(x) = E'[X_∞ | A_∞ = x]` with closed-form survival
/// `S(x) = exp(-∫_0^x dz/λ(z))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaSpec {
    Constant { lambda: f64 },
    /// `λ(z) = a + b z`.
    Affine { a: f64, b: f64 },
}

impl LambdaSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LambdaSpec::Constant { lambda } if !(lambda > 0.0) => {
                Err(Error::Config(format!("lambda must be > 0, got {lambda}")))
            }
            LambdaSpec::Affine { a, b } if !(a > 0.0 && b >= 0.0) => {
                Err(Error::Config(format!("affine lambda needs a > 0, b >= 0, got ({a}, {b})")))
            }
            _ => Ok(()),
        }
    }

    pub fn lambda(&self, z: f64) -> f64 {
        match *self {
            LambdaSpec::Constant { lambda } => lambda,
            LambdaSpec::Affine { a, b } => a + b * z,
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match *self {
            LambdaSpec::Constant { lambda } => (-x / lambda).exp(),
            LambdaSpec::Affine { a, b: 0.0 } => (-x / a).exp(),
            LambdaSpec::Affine { a, b } => (a / (a + b * x)).powf(1.0 / b),
        }
    }
}

/// A per-path event value in `[0, 1]` and how much of it the truncated
/// horizon left open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub value: f64,
    pub undecided: f64,
}

impl Outcome {
    pub const YES: Outcome = Outcome { value: 1.0, undecided: 0.0 };
    pub const NO: Outcome = Outcome { value: 0.0, undecided: 0.0 };

    pub fn is_decided(&self) -> bool {
        self.undecided == 0.0
    }
}

/// `{∃t in the window: X_t > φ_cut(A_t)}` along a path observed from
/// `gbar`, where `φ_cut = ∞` from `cut = min(u, infinite_from)` on. The
/// window closes for good once `A ≥ cut`.
pub fn passage_outcome(x: &[f64], a: &[f64], phi: &PhiSpec, u: Option<f64>) -> Outcome {
    let cut = match (u, phi.infinite_from()) {
        (Some(u), Some(z)) => u.min(z),
        (Some(u), None) => u,
        (None, Some(z)) => z,
        (None, None) => f64::INFINITY,
    };
    for (&xk, &ak) in x.iter().zip(a) {
        if ak >= cut {
            return Outcome::NO;
        }
        if xk > phi.phi(ak) {
            return Outcome::YES;
        }
    }
    Outcome { value: 0.0, undecided: 1.0 }
}

/// `{sup_t X_t > level}` for `X = exp(W - t/2)` observed from `gbar`,
/// given `ln X` on the grid.
///
/// `ln X` is a unit-volatility Brownian motion with drift, so the value is
/// the exact conditional probability that the continuous path crosses
/// `level` given its grid values (Brownian-bridge crossing between
/// samples). The truncation bound on the remainder is `(X_T / level) ∧ 1`
/// times the probability of no crossing so far, by the maximal inequality.
pub fn gbm_sup_outcome(log_x: &[f64], level: f64, step: f64) -> Outcome {
    let b = level.ln();
    if log_x.iter().any(|&y| y > b) {
        return Outcome::YES;
    }
    let mut log_survive = 0.0;
    for w in log_x.windows(2) {
        let e = -2.0 * (b - w[0]) * (b - w[1]) / step;
        if e > -745.0 {
            log_survive += (-e.exp()).ln_1p();
        }
    }
    let survive = log_survive.exp();
    let last = log_x.last().map_or(0.0, |y| (y - b).exp().min(1.0));
    Outcome { value: 1.0 - survive, undecided: survive * last }
}

/// Grid-only version of [`gbm_sup_outcome`]: the indicator that some grid
/// value of `ln X` exceeds `ln level`.
pub fn grid_sup_outcome(log_x: &[f64], level: f64) -> Outcome {
    let b = level.ln();
    if log_x.iter().any(|&y| y > b) {
        Outcome::YES
    } else {
        let last = log_x.last().map_or(0.0, |y| (y - b).exp().min(1.0));
        Outcome { value: 0.0, undecided: last }
    }
}

/// `{∀t ∈ [T_from, T_u]: S_t - X_t ≤ φ(S_t)}` for a path started at 0,
/// with `T_z = inf{t: S_t > z}`. Past `T_u` the condition is vacuous
/// (`φ_u = ∞`), so reaching `S > u` decides the event.
pub fn levy_outcome(x: &[f64], phi: &PhiSpec, from: f64, u: f64) -> Outcome {
    let mut s = f64::NEG_INFINITY;
    for &xk in x {
        s = s.max(xk);
        if s > u {
            return Outcome::YES;
        }
        if s > from && s < u && s - xk > phi.phi(s) {
            return Outcome::NO;
        }
    }
    Outcome { value: 1.0, undecided: 1.0 }
}

/// Weighted mean of outcome values and the `|w|`-weighted mean of the
/// undecided parts.
pub fn outcome_estimate(outcomes: &[Outcome], weights: &[f64]) -> Result<(McEstimate, f64)> {
    let values: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
    let est = weighted_mean(&values, weights)?;
    let open = stable_sum(outcomes.iter().zip(weights).map(|(o, w)| o.undecided * w.abs()));
    Ok((est, open / outcomes.len() as f64))
}

/// Event frequency against a closed-form target.
pub fn frequency_check(
    name: &str,
    outcomes: &[Outcome],
    weights: &[f64],
    target: f64,
    grid_allowance: f64,
) -> Result<TestReport> {
    let (est, trunc) = outcome_estimate(outcomes, weights)?;
    Ok(TestReport::new(name, target, est, 3.0, grid_allowance, trunc))
}

/// First-passage law: target `1 - exp(-I(u))`, or `1 - exp(-I(∞))` when
/// `u` is absent (a lower-bound check when `I(∞) = ∞`).
pub fn passage_estimate_check(
    name: &str,
    outcomes: &[Outcome],
    weights: &[f64],
    phi: &PhiSpec,
    u: Option<f64>,
    grid_allowance: f64,
) -> Result<TestReport> {
    phi.validate()?;
    let i = u.map_or_else(|| phi.integral_inf(), |u| phi.integral(u));
    let target = -(-i).exp_m1();
    let mut r = frequency_check(name, outcomes, weights, target, grid_allowance)?;
    if i.is_infinite() {
        r = r.with_note("I(inf) is infinite: truncation makes this a lower-bound check");
    }
    Ok(r)
}

/// Paired difference `w (1{event} - side)` against 0, for identities whose
/// right-hand side is itself an ensemble average.
pub fn paired_check(
    name: &str,
    outcomes: &[Outcome],
    sides: &[f64],
    weights: &[f64],
    grid_allowance: f64,
) -> Result<TestReport> {
    if sides.len() != outcomes.len() {
        return Err(Error::Contract("one right-hand side per path is required".into()));
    }
    let diffs: Vec<f64> = outcomes.iter().zip(sides).map(|(o, s)| o.value - s).collect();
    let est = weighted_mean(&diffs, weights)?;
    let (_, trunc) = outcome_estimate(outcomes, weights)?;
    Ok(TestReport::new(name, 0.0, est, 3.0, grid_allowance, trunc))
}

/// Doob maximal identity at each level: the weighted frequency of
/// `{sup_{t ≥ gbar} X_t > a}` against the weighted mean of `(X_gbar/a) ∧ 1`,
/// both from the same ensemble. Pass iff the two agree within three
/// combined standard errors plus the truncation allowance.
pub fn doob_maximal_check(
    name: &str,
    outcomes_per_level: &[Vec<Outcome>],
    x_gbar: &[f64],
    weights: &[f64],
    levels: &[f64],
) -> Result<Vec<TestReport>> {
    if outcomes_per_level.len() != levels.len() {
        return Err(Error::Contract("one outcome column per level is required".into()));
    }
    let mut out = Vec::with_capacity(levels.len());
    for (outcomes, &level) in outcomes_per_level.iter().zip(levels) {
        let (lhs, trunc) = outcome_estimate(outcomes, weights)?;
        let rhs_values: Vec<f64> = x_gbar.iter().map(|x| (x / level).min(1.0)).collect();
        let rhs = weighted_mean(&rhs_values, weights)?;
        let se = (lhs.stderr * lhs.stderr + rhs.stderr * rhs.stderr).sqrt();
        let est = McEstimate::from_parts(lhs.n, lhs.mean - rhs.mean, se);
        let r = TestReport::new(format!("{name} a={level}"), 0.0, est, 3.0, 0.0, trunc).with_note(format!(
            "P'(sup > a) = {:.5} vs E'[(X_gbar/a) ^ 1] = {:.5}",
            lhs.mean, rhs.mean
        ));
        out.push(r);
    }
    Ok(out)
}

/// Survival of `A_∞` at each `x` and a weighted KS test of the whole law.
#[allow(clippy::too_many_arguments)]
pub fn a_infinity_check(
    name: &str,
    terminal_a: &[f64],
    weights: &[f64],
    lambda: &LambdaSpec,
    x_grid: &[f64],
    grid_allowance: f64,
    ks_allowance: f64,
    open: &[f64],
) -> Result<(Vec<TestReport>, KsResult)> {
    lambda.validate()?;
    let trunc = if open.is_empty() {
        0.0
    } else {
        stable_sum(open.iter().zip(weights).map(|(o, w)| o * w.abs())) / open.len() as f64
    };
    let mut reports = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let ind: Vec<f64> = terminal_a.iter().map(|&a| f64::from(u8::from(a > x))).collect();
        let est = weighted_mean(&ind, weights)?;
        reports.push(TestReport::new(
            format!("{name} x={x}"),
            lambda.survival(x),
            est,
            3.0,
            grid_allowance,
            trunc,
        ));
    }
    let ks = ks_test(terminal_a, weights, |x| 1.0 - lambda.survival(x), ks_allowance + trunc)?;
    Ok((reports, ks))
}

/// Lévy-type identity: target `Q(1) exp(-∫_from^u dz/φ)` for the signed
/// frequency of the no-large-drawdown event.
#[allow(clippy::too_many_arguments)]
pub fn levy_corollary_check(
    name: &str,
    outcomes: &[Outcome],
    q_weights: &[f64],
    q_one: f64,
    phi: &PhiSpec,
    from: f64,
    u: f64,
    grid_allowance: f64,
) -> Result<TestReport> {
    phi.validate()?;
    let target = q_one * (-(phi.integral(u) - phi.integral(from))).exp();
    frequency_check(name, outcomes, q_weights, target, grid_allowance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> PhiSpec {
        PhiSpec::Table {
            steps: vec![
                PhiStep { from: 0.0, value: Some(1.0) },
                PhiStep { from: 0.5, value: Some(2.0) },
                PhiStep { from: 1.0, value: None },
            ],
        }
    }

    #[test]
    fn phi_integrals() {
        assert_eq!(PhiSpec::Constant { c: 1.0 }.integral(1.0), 1.0);
        assert!(PhiSpec::Constant { c: 1.0 }.integral_inf().is_infinite());
        let e = PhiSpec::Exponential { a: 1.0 };
        assert!((e.integral_inf() - 1.0).abs() < 1e-15);
        assert!((e.integral(1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        let t = table();
        assert!((t.integral_inf() - 0.75).abs() < 1e-15);
        assert!((t.integral(0.75) - 0.625).abs() < 1e-15);
        assert_eq!(t.infinite_from(), Some(1.0));
        assert_eq!(t.phi(0.2), 1.0);
        assert_eq!(t.phi(0.5), 2.0);
        assert!(t.phi(3.0).is_infinite());
    }

    #[test]
    fn f_is_derivative_of_f_capital() {
        for phi in [PhiSpec::Exponential { a: 1.5 }, table()] {
            for x in [0.1, 0.3, 0.7] {
                let h = 1e-6;
                let num = (phi.F_of(x + h) - phi.F_of(x - h)) / (2.0 * h);
                assert!((num - phi.f_of(x)).abs() < 1e-6, "{phi:?} at {x}");
                let numu = (phi.Fu_of(x + h, 0.9) - phi.Fu_of(x - h, 0.9)) / (2.0 * h);
                assert!((numu - phi.fu_of(x, 0.9)).abs() < 1e-6);
            }
        }
        let c = PhiSpec::Constant { c: 1.0 };
        assert_eq!(c.Fu_of(1.0, 1.0), 0.0);
        assert_eq!(c.fu_of(2.0, 1.0), 0.0);
        assert!((c.m_u(0.0, 0.0, 1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn phi_validation() {
        assert!(PhiSpec::Constant { c: 0.0 }.validate().is_err());
        let bad = PhiSpec::Table { steps: vec![PhiStep { from: 0.5, value: Some(1.0) }] };
        assert!(bad.validate().is_err());
        assert!(table().validate().is_ok());
    }

    #[test]
    fn lambda_survival() {
        let c = LambdaSpec::Constant { lambda: 1.0 };
        assert_eq!(c.survival(0.0), 1.0);
        assert!((c.survival(1.0) - (-1.0f64).exp()).abs() < 1e-15);
        let a = LambdaSpec::Affine { a: 1.0, b: 1.0 };
        assert!((a.survival(1.0) - 0.5).abs() < 1e-15);
        assert_eq!(LambdaSpec::Affine { a: 2.0, b: 0.0 }.survival(2.0), (-1.0f64).exp());
    }

    #[test]
    fn passage_outcomes() {
        let phi = PhiSpec::Constant { c: 1.0 };
        assert_eq!(passage_outcome(&[0.0, 0.5, 1.2], &[0.0, 0.1, 0.2], &phi, Some(1.0)), Outcome::YES);
        assert_eq!(passage_outcome(&[0.0, 0.5, 1.2], &[0.0, 1.0, 1.0], &phi, Some(1.0)), Outcome::NO);
        assert!(!passage_outcome(&[0.0, 0.5], &[0.0, 0.1], &phi, Some(1.0)).is_decided());
        let never = PhiSpec::Table { steps: vec![PhiStep { from: 0.0, value: None }] };
        assert_eq!(passage_outcome(&[5.0], &[0.0], &never, None), Outcome::NO);
    }

    #[test]
    fn levy_outcomes() {
        let phi = PhiSpec::Constant { c: 1.0 };
        assert_eq!(levy_outcome(&[0.0, 0.5, 1.1], &phi, 0.0, 1.0), Outcome::YES);
        assert_eq!(levy_outcome(&[0.0, 0.5, -0.6], &phi, 0.0, 1.0), Outcome::NO);
        assert_eq!(levy_outcome(&[0.0, 0.4, -0.7, 1.2], &phi, 0.5, 1.0), Outcome::YES);
        let open = levy_outcome(&[0.0, 0.3], &phi, 0.0, 1.0);
        assert_eq!((open.value, open.undecided), (1.0, 1.0));
    }

    #[test]
    fn doob_outcomes() {
        let ln = |v: &[f64]| v.iter().map(|x: &f64| x.ln()).collect::<Vec<_>>();
        assert_eq!(gbm_sup_outcome(&ln(&[1.0, 2.5]), 2.0, 0.01), Outcome::YES);
        let o = gbm_sup_outcome(&ln(&[1.0, 1.9, 1.0]), 2.0, 0.01);
        let p = (-2.0 * (2f64.ln()) * (2f64.ln() - 1.9f64.ln()) / 0.01).exp();
        let survive = (1.0 - p) * (1.0 - p);
        assert!((o.value - (1.0 - survive)).abs() < 1e-12);
        assert!((o.undecided - 0.5 * survive).abs() < 1e-12);
        assert_eq!(grid_sup_outcome(&ln(&[1.0, 1.9, 1.0]), 2.0).value, 0.0);
    }

    #[test]
    fn trivial_targets() {
        let never = PhiSpec::Table { steps: vec![PhiStep { from: 0.0, value: None }] };
        let outcomes = vec![Outcome::NO; 10];
        let w = vec![1.0; 10];
        let r = passage_estimate_check("inf", &outcomes, &w, &never, None, 0.0).unwrap();
        assert_eq!((r.target, r.estimate.mean, r.pass), (0.0, 0.0, true));
        let yes = vec![Outcome::YES; 10];
        let q = vec![0.6; 10];
        let huge = PhiSpec::Constant { c: 1e300 };
        let r = levy_corollary_check("big", &yes, &q, 0.6, &huge, 0.0, 1.0, 0.0).unwrap();
        assert!(r.pass && (r.estimate.mean - 0.6).abs() < 1e-15);
    }
}
