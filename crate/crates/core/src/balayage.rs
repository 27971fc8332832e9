//! The shift `X̃ = X_{·+gbar}`, the balayage operator `rho`, and the
//! `Q`-integrals built on it.
//!
//! `rho` restarts a path functional at every zero of `D`: on the block
//! `[h_i, h_{i+1})` the functional is evaluated on `X` restricted to that
//! block, and the output is forced to 0 at the points of `H`.

use crate::density::ZeroSetInfo;
use crate::error::{Error, Result};
use crate::grid::{Path, TimeGrid};

/// An adapted rule turning a path segment into a value process on it.
///
/// `eval` receives the segment values and must fill `out` (same length)
/// so that `out[j]` depends on `seg[..=j]` only.
pub trait PathFunctional {
    fn eval(&self, seg: &[f64], step: f64, out: &mut [f64]);

    fn is_adapted(&self) -> bool {
        true
    }
}

impl<T: PathFunctional + ?Sized> PathFunctional for &T {
    fn eval(&self, seg: &[f64], step: f64, out: &mut [f64]) {
        (**self).eval(seg, step, out)
    }

    fn is_adapted(&self) -> bool {
        (**self).is_adapted()
    }
}

/// `sgn` with `sgn(0) = -1`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Integrands of the form `h(X_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrand {
    One,
    Sign { level: f64 },
    Above { level: f64 },
    AtOrBelow { level: f64 },
}

impl Integrand {
    pub fn at(&self, x: f64) -> f64 {
        match *self {
            Integrand::One => 1.0,
            Integrand::Sign { level } => sgn(x - level),
            Integrand::Above { level } => f64::from(u8::from(x > level)),
            Integrand::AtOrBelow { level } => f64::from(u8::from(x <= level)),
        }
    }
}

/// Built-in functionals. All start from 0 on an empty segment except
/// `Constant` and `RunningSup`, which starts from the segment's first value.
#[derive(Debug, Clone, PartialEq)]
pub enum Functional {
    Constant(f64),
    /// `X_u - X_s`.
    Increment,
    /// `max_{s ≤ v ≤ u} X_v`.
    RunningSup,
    /// Realized quadratic variation `Σ (ΔX)^2`.
    QuadraticVariation,
    /// Left-point sum `Σ h(X_k) ΔX_k`.
    Integral(Integrand),
    /// Occupation-kernel local time at `level`:
    /// `(1/(2 bw)) Σ (ΔX_k)^2 1{|X_k - level| < bw}`.
    LocalTime { level: f64, bandwidth: f64 },
    Scale(f64, Box<Functional>),
    Sum(Box<Functional>, Box<Functional>),
    Product(Box<Functional>, Box<Functional>),
}

impl Functional {
    pub fn scale(self, c: f64) -> Functional {
        Functional::Scale(c, Box::new(self))
    }

    pub fn plus(self, other: Functional) -> Functional {
        Functional::Sum(Box::new(self), Box::new(other))
    }

    pub fn times(self, other: Functional) -> Functional {
        Functional::Product(Box::new(self), Box::new(other))
    }

    /// Evaluates on a whole path.
    pub fn apply(&self, x: &Path) -> Path {
        let mut out = vec![0.0; x.len()];
        self.eval(x.values(), x.grid().step(), &mut out);
        Path::from_parts(*x.grid(), out)
    }
}

fn running_sum(seg: &[f64], out: &mut [f64], term: impl Fn(f64, f64) -> f64) {
    let mut acc = 0.0;
    out[0] = 0.0;
    for j in 1..seg.len() {
        acc += term(seg[j - 1], seg[j] - seg[j - 1]);
        out[j] = acc;
    }
}

impl PathFunctional for Functional {
    fn eval(&self, seg: &[f64], step: f64, out: &mut [f64]) {
        debug_assert_eq!(seg.len(), out.len());
        if seg.is_empty() {
            return;
        }
        match self {
            Functional::Constant(c) => out.fill(*c),
            Functional::Increment => {
                let x0 = seg[0];
                for (o, x) in out.iter_mut().zip(seg) {
                    *o = x - x0;
                }
            }
            Functional::RunningSup => {
                let mut m = f64::NEG_INFINITY;
                for (o, &x) in out.iter_mut().zip(seg) {
                    m = m.max(x);
                    *o = m;
                }
            }
            Functional::QuadraticVariation => running_sum(seg, out, |_, dx| dx * dx),
            Functional::Integral(h) => running_sum(seg, out, |x, dx| h.at(x) * dx),
            Functional::LocalTime { level, bandwidth } => {
                let (a, bw) = (*level, *bandwidth);
                let mass = step / (2.0 * bw);
                running_sum(seg, out, |x, _| if (x - a).abs() < bw { mass } else { 0.0 })
            }
            Functional::Scale(c, f) => {
                f.eval(seg, step, out);
                for o in out.iter_mut() {
                    *o *= c;
                }
            }
            Functional::Sum(f, g) => {
                let mut tmp = vec![0.0; seg.len()];
                f.eval(seg, step, out);
                g.eval(seg, step, &mut tmp);
                for (o, t) in out.iter_mut().zip(&tmp) {
                    *o += t;
                }
            }
            Functional::Product(f, g) => {
                let mut tmp = vec![0.0; seg.len()];
                f.eval(seg, step, out);
                g.eval(seg, step, &mut tmp);
                for (o, t) in out.iter_mut().zip(&tmp) {
                    *o *= t;
                }
            }
        }
    }
}

/// Left-point integral `Σ g(X_k) ΔX_k` for an arbitrary `g`.
pub struct IntegralOf<F>(pub F);

impl<F: Fn(f64) -> f64> PathFunctional for IntegralOf<F> {
    fn eval(&self, seg: &[f64], _step: f64, out: &mut [f64]) {
        if !seg.is_empty() {
            running_sum(seg, out, |x, dx| (self.0)(x) * dx);
        }
    }
}

/// Bracket integral `Σ g(X_k) (ΔX_k)^2` for an arbitrary `g`.
pub struct BracketIntegralOf<F>(pub F);

impl<F: Fn(f64) -> f64> PathFunctional for BracketIntegralOf<F> {
    fn eval(&self, seg: &[f64], _step: f64, out: &mut [f64]) {
        if !seg.is_empty() {
            running_sum(seg, out, |x, dx| (self.0)(x) * dx * dx);
        }
    }
}

/// Probes adaptedness by evaluating on two segments that share a prefix
/// and checking the outputs agree on it.
fn probe_adapted(phi: &impl PathFunctional) -> bool {
    const PREFIX: usize = 5;
    const PROBE_STEP: f64 = 0.01;
    let a = [0.0, 0.3, -0.2, 0.5, 0.1, 0.4, -0.6, 0.9, 0.2];
    let mut b = a;
    for (k, v) in b.iter_mut().enumerate().skip(PREFIX) {
        *v = -1.5 * *v + k as f64;
    }
    let (mut oa, mut ob) = ([0.0; 9], [0.0; 9]);
    phi.eval(&a, PROBE_STEP, &mut oa);
    phi.eval(&b, PROBE_STEP, &mut ob);
    oa[..PREFIX].iter().zip(&ob[..PREFIX]).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// `X̃_t = X_{gbar + t}` on the grid `{0, ..., horizon - gbar}`.
pub fn shift(x: &Path, zs: &ZeroSetInfo) -> Result<Path> {
    check_grid(x, zs)?;
    let g = zs.gbar_index();
    let n = x.grid().n_steps();
    if g >= n {
        return Err(Error::DegenerateShift { gbar: zs.gbar(), horizon: x.grid().horizon() });
    }
    let grid = TimeGrid::with_steps(x.grid().step(), n - g)?;
    Ok(Path::from_parts(grid, x.values()[g..].to_vec()))
}

fn check_grid(x: &Path, zs: &ZeroSetInfo) -> Result<()> {
    if x.grid() != zs.grid() {
        return Err(Error::Contract("path and zero set live on different grids".into()));
    }
    Ok(())
}

/// Restart-at-zero lift of `phi`: 0 on `H`, otherwise `phi` evaluated on
/// `X` over `[gamma_t, t]`.
pub fn rho(phi: &impl PathFunctional, x: &Path, zs: &ZeroSetInfo) -> Result<Path> {
    check_grid(x, zs)?;
    if !phi.is_adapted() || !probe_adapted(phi) {
        return Err(Error::Contract("rho requires an adapted functional".into()));
    }
    let mut out = vec![0.0; x.len()];
    let xs = x.values();
    for (s, e) in zs.blocks() {
        phi.eval(&xs[s..e], x.grid().step(), &mut out[s..e]);
        if zs.contains(s) {
            out[s] = 0.0;
        }
    }
    Ok(Path::from_parts(*x.grid(), out))
}

/// `Q`-stochastic integral of `h(X)` against `X`.
pub fn q_integral(h: Integrand, x: &Path, zs: &ZeroSetInfo) -> Result<Path> {
    rho(&Functional::Integral(h), x, zs)
}

/// `Q`-stochastic integral of a given integrand path against `X`, with
/// left-point sums restarted on each block.
pub fn q_integral_path(h: &Path, x: &Path, zs: &ZeroSetInfo) -> Result<Path> {
    check_grid(x, zs)?;
    x.require_same_grid(h)?;
    let (hv, xv) = (h.values(), x.values());
    let mut out = vec![0.0; x.len()];
    for (s, e) in zs.blocks() {
        let mut acc = 0.0;
        for j in s + 1..e {
            acc += hv[j - 1] * (xv[j] - xv[j - 1]);
            out[j] = acc;
        }
    }
    Ok(Path::from_parts(*x.grid(), out))
}

/// `[X]^Q`: realized quadratic variation restarted at each zero of `D`.
pub fn q_bracket(x: &Path, zs: &ZeroSetInfo) -> Result<Path> {
    rho(&Functional::QuadraticVariation, x, zs)
}

/// Default kernel bandwidth `sqrt(step)`.
pub fn default_bandwidth(grid: &TimeGrid) -> f64 {
    grid.step().sqrt()
}

/// `Q`-local time of `X` at a level.
#[derive(Debug, Clone, PartialEq)]
pub struct QLocalTime {
    pub level: f64,
    pub path: Path,
}

pub fn q_local_time(x: &Path, level: f64, zs: &ZeroSetInfo, bandwidth: f64) -> Result<QLocalTime> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::Config(format!("bandwidth must be > 0, got {bandwidth}")));
    }
    let path = rho(&Functional::LocalTime { level, bandwidth }, x, zs)?;
    Ok(QLocalTime { level, path })
}

/// Which Tanaka identity to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TanakaForm {
    /// `|X_t - a| = |X_γ - a| + ∫ sgn(X - a) dX + L^a`.
    Abs,
    /// `(X_t - a)^+ = (X_γ - a)^+ + ∫ 1{X > a} dX + L^a / 2`.
    Plus,
    /// `(X_t - a)^- = (X_γ - a)^- - ∫ 1{X ≤ a} dX + L^a / 2`.
    Minus,
}

/// Pointwise gap `|LHS_t - RHS_t|` in a signed Tanaka formula, with the
/// local time estimated at bandwidth `sqrt(step)`.
pub fn tanaka_residual_path(x: &Path, level: f64, zs: &ZeroSetInfo, form: TanakaForm) -> Result<Path> {
    let bw = default_bandwidth(x.grid());
    let lt = q_local_time(x, level, zs, bw)?.path;
    let (g, integral, lt_coef): (fn(f64) -> f64, Path, f64) = match form {
        TanakaForm::Abs => (f64::abs, q_integral(Integrand::Sign { level }, x, zs)?, 1.0),
        TanakaForm::Plus => (|y| y.max(0.0), q_integral(Integrand::Above { level }, x, zs)?, 0.5),
        TanakaForm::Minus => {
            let i = q_integral(Integrand::AtOrBelow { level }, x, zs)?;
            (|y| (-y).max(0.0), i.map(|v| -v)?, 0.5)
        }
    };
    let xv = x.values();
    let gap = (0..x.len())
        .map(|k| {
            let lhs = g(xv[k] - level);
            let rhs = g(xv[zs.gamma_index(k)] - level) + integral.get(k) + lt_coef * lt.get(k);
            (lhs - rhs).abs()
        })
        .collect();
    Ok(Path::from_parts(*x.grid(), gap))
}

/// Sup-norm residual of [`tanaka_residual_path`].
pub fn tanaka_residual(x: &Path, level: f64, zs: &ZeroSetInfo, form: TanakaForm) -> Result<f64> {
    Ok(sup(&tanaka_residual_path(x, level, zs, form)?))
}

fn sup(p: &Path) -> f64 {
    p.values().iter().fold(0.0, |m, v| m.max(*v))
}

/// A scalar function with analytic first and second derivatives.
pub trait C2 {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItoFunction {
    Linear,
    Square,
    Cos,
}

impl C2 for ItoFunction {
    fn value(&self, x: f64) -> f64 {
        match self {
            ItoFunction::Linear => x,
            ItoFunction::Square => x * x,
            ItoFunction::Cos => x.cos(),
        }
    }

    fn d1(&self, x: f64) -> f64 {
        match self {
            ItoFunction::Linear => 1.0,
            ItoFunction::Square => 2.0 * x,
            ItoFunction::Cos => -x.sin(),
        }
    }

    fn d2(&self, x: f64) -> f64 {
        match self {
            ItoFunction::Linear => 0.0,
            ItoFunction::Square => 2.0,
            ItoFunction::Cos => -x.cos(),
        }
    }
}

/// Pointwise gap in `F(X_t) = F(X_γ) + ∫ F'(X) dX + ½ ∫ F''(X) d[X]`,
/// all integrals taken in the `Q` sense.
pub fn ito_residual_path<F: C2>(f: &F, x: &Path, zs: &ZeroSetInfo) -> Result<Path> {
    let drift = rho(&IntegralOf(|y| f.d1(y)), x, zs)?;
    let bracket = rho(&BracketIntegralOf(|y| f.d2(y)), x, zs)?;
    let xv = x.values();
    let gap = (0..x.len())
        .map(|k| {
            let lhs = f.value(xv[k]);
            let rhs = f.value(xv[zs.gamma_index(k)]) + drift.get(k) + 0.5 * bracket.get(k);
            (lhs - rhs).abs()
        })
        .collect();
    Ok(Path::from_parts(*x.grid(), gap))
}

/// Sup-norm residual of [`ito_residual_path`].
pub fn ito_residual<F: C2>(f: &F, x: &Path, zs: &ZeroSetInfo) -> Result<f64> {
    Ok(sup(&ito_residual_path(f, x, zs)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn ramp() -> Path {
        let g = make_grid(4.0, 1.0).unwrap();
        Path::new(g, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    fn zs_with(h_signs: &[f64]) -> ZeroSetInfo {
        let g = make_grid((h_signs.len() - 1) as f64, 1.0).unwrap();
        ZeroSetInfo::from_sign_changes(g, h_signs)
    }

    #[test]
    fn shift_by_index() {
        let x = ramp();
        let zs = zs_with(&[1.0, 1.0, -1.0, -1.0, -1.0]);
        assert_eq!(zs.gbar(), 2.0);
        assert_eq!(shift(&x, &zs).unwrap().values(), &[2.0, 3.0, 4.0]);
        let none = ZeroSetInfo::empty(*x.grid());
        assert_eq!(shift(&x, &none).unwrap(), x);
    }

    #[test]
    fn shift_without_room_is_degenerate() {
        let zs = zs_with(&[1.0, 1.0, 1.0, 1.0, -1.0]);
        assert!(matches!(shift(&ramp(), &zs), Err(Error::DegenerateShift { .. })));
    }

    #[test]
    fn constant_lifts_to_indicator_of_complement() {
        let x = ramp();
        let zs = zs_with(&[1.0, -1.0, -1.0, 1.0, 1.0]);
        let u = rho(&Functional::Constant(1.0), &x, &zs).unwrap();
        assert_eq!(u.values(), &[1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn integral_of_one_telescopes() {
        let x = ramp();
        let zs = zs_with(&[1.0, 1.0, -1.0, -1.0, -1.0]);
        let i = q_integral(Integrand::One, &x, &zs).unwrap();
        assert_eq!(i.values(), &[0.0, 1.0, 0.0, 1.0, 2.0]);
        let zero = rho(&Functional::Integral(Integrand::One).scale(0.0), &x, &zs).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn running_sup_restarts() {
        let g = make_grid(5.0, 1.0).unwrap();
        let m = Path::new(g, vec![0.0, 2.0, 1.0, 0.5, 0.7, 0.6]).unwrap();
        let zs = ZeroSetInfo::from_sign_changes(g, &[1.0, 1.0, 1.0, -1.0, -1.0, -1.0]);
        let s = rho(&Functional::RunningSup, &m, &zs).unwrap();
        assert_eq!(s.values(), &[0.0, 2.0, 2.0, 0.0, 0.7, 0.7]);
    }

    struct Lookahead;

    impl PathFunctional for Lookahead {
        fn eval(&self, seg: &[f64], _step: f64, out: &mut [f64]) {
            let last = *seg.last().unwrap();
            out.fill(last);
        }
    }

    #[test]
    fn non_adapted_functional_is_rejected() {
        let x = ramp();
        let zs = ZeroSetInfo::empty(*x.grid());
        assert!(matches!(rho(&Lookahead, &x, &zs), Err(Error::Contract(_))));
    }

    #[test]
    fn constant_path_residuals_vanish() {
        let g = make_grid(1.0, 0.01).unwrap();
        let x = Path::constant(g, 0.3);
        let zs = ZeroSetInfo::from_sign_changes(g, &Path::from_fn(g, |t| 0.5 - t).unwrap().into_values());
        for form in [TanakaForm::Abs, TanakaForm::Plus, TanakaForm::Minus] {
            assert_eq!(tanaka_residual(&x, 0.0, &zs, form).unwrap(), 0.0);
        }
        for f in [ItoFunction::Linear, ItoFunction::Square, ItoFunction::Cos] {
            assert_eq!(ito_residual(&f, &x, &zs).unwrap(), 0.0);
        }
        assert!(q_bracket(&x, &zs).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bandwidth_must_be_positive() {
        let x = ramp();
        let zs = ZeroSetInfo::empty(*x.grid());
        assert!(matches!(q_local_time(&x, 0.0, &zs, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn far_level_has_no_local_time() {
        let x = ramp();
        let zs = ZeroSetInfo::empty(*x.grid());
        let lt = q_local_time(&x, 100.0, &zs, 0.5).unwrap();
        assert!(lt.path.values().iter().all(|&v| v == 0.0));
    }
}
