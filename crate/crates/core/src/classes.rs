//! Processes of class `Σ(H)` and `Σ_s(H)` with explicit decompositions
//! `X = N + A`, membership checks, and the characterization processes.

use serde::{Deserialize, Serialize};

use crate::balayage::{sgn, shift, Functional, PathFunctional};
use crate::density::ZeroSetInfo;
use crate::error::{Error, Result};
use crate::grid::{Path, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassTag {
    SigmaH,
    SigmaSH,
    ClassicalSigma,
}

/// Hypotheses carried alongside a decomposition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub h_subset_zeros_of_x: bool,
    pub a_gbar_zero: bool,
    pub class_d: bool,
}

/// Whether `X = N + A` holds up to rounding or only up to estimator error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exactness {
    Exact,
    Estimator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub x: Path,
    pub n: Path,
    pub a: Path,
    pub class_tag: ClassTag,
    pub flags: Flags,
    /// Scale of `X` near the support of `dA`; the support tolerance is
    /// multiplied by it.
    pub band_scale: f64,
    pub exactness: Exactness,
    pub warnings: Vec<String>,
}

impl Decomposition {
    pub fn grid(&self) -> &TimeGrid {
        self.x.grid()
    }

    /// `sup_t |X_t - N_t - A_t|`.
    pub fn identity_gap(&self) -> f64 {
        let (x, n, a) = (self.x.values(), self.n.values(), self.a.values());
        (0..x.len()).map(|k| (x[k] - n[k] - a[k]).abs()).fold(0.0, f64::max)
    }

    /// The same triple observed from `gbar` on, as a classical decomposition.
    pub fn shifted(&self, zs: &ZeroSetInfo) -> Result<Decomposition> {
        Ok(Decomposition {
            x: shift(&self.x, zs)?,
            n: shift(&self.n, zs)?,
            a: shift(&self.a, zs)?,
            class_tag: ClassTag::ClassicalSigma,
            flags: self.flags,
            band_scale: self.band_scale,
            exactness: self.exactness,
            warnings: Vec::new(),
        })
    }
}

/// Flags read off a `Σ(H)` path: whether `X` vanishes on `H` and `A` at
/// `gbar`.
fn observed_flags(x: &[f64], a: &[f64], zs: &ZeroSetInfo) -> Flags {
    Flags {
        h_subset_zeros_of_x: zs.h_indices().iter().all(|&h| x[h] == 0.0),
        a_gbar_zero: a[zs.gbar_index()] == 0.0,
        class_d: true,
    }
}

fn require_start_zero(m: &Path, what: &str) -> Result<()> {
    if m.initial() != 0.0 {
        return Err(Error::Contract(format!("{what} requires M_0 = 0, got {}", m.initial())));
    }
    Ok(())
}

fn check_grid(m: &Path, zs: &ZeroSetInfo) -> Result<()> {
    if m.grid() != zs.grid() {
        return Err(Error::Contract("path and zero set live on different grids".into()));
    }
    Ok(())
}

/// `|M| = ∫ sgn(M) dM + L^0(M)` with the kernel local time.
pub fn abs_martingale(m: &Path, zs: &ZeroSetInfo, bandwidth: f64) -> Result<Decomposition> {
    require_start_zero(m, "abs_martingale")?;
    pm_combination(m, 1.0, 1.0, zs, bandwidth)
}

/// `α M^+ + β M^-` with `A = (α+β)/2 · L^0(M)`.
pub fn pm_combination(
    m: &Path,
    alpha: f64,
    beta: f64,
    zs: &ZeroSetInfo,
    bandwidth: f64,
) -> Result<Decomposition> {
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::Config(format!("alpha and beta must be > 0, got ({alpha}, {beta})")));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::Config(format!("bandwidth must be > 0, got {bandwidth}")));
    }
    require_start_zero(m, "pm_combination")?;
    check_grid(m, zs)?;
    let mv = m.values();
    let x: Vec<f64> = mv.iter().map(|&v| alpha * v.max(0.0) + beta * (-v).max(0.0)).collect();
    let mut n = vec![0.0; mv.len()];
    let mut acc = 0.0;
    for k in 1..mv.len() {
        let h = if mv[k - 1] > 0.0 { alpha } else { -beta };
        acc += h * (mv[k] - mv[k - 1]);
        n[k] = acc;
    }
    let lt = Functional::LocalTime { level: 0.0, bandwidth }.apply(m);
    let coef = 0.5 * (alpha + beta);
    let a: Vec<f64> = lt.values().iter().map(|l| coef * l).collect();
    let g = *m.grid();
    let flags = observed_flags(&x, &a, zs);
    Ok(Decomposition {
        x: Path::from_parts(g, x),
        n: Path::from_parts(g, n),
        a: Path::from_parts(g, a),
        class_tag: ClassTag::SigmaH,
        flags,
        band_scale: alpha.max(beta),
        exactness: Exactness::Estimator,
        warnings: Vec::new(),
    })
}

/// Drawdown `S - M`: `N = -M`, `A = S`.
pub fn drawdown(m: &Path, zs: &ZeroSetInfo) -> Result<Decomposition> {
    require_start_zero(m, "drawdown")?;
    check_grid(m, zs)?;
    let s = Functional::RunningSup.apply(m);
    let g = *m.grid();
    let x: Vec<f64> = s.values().iter().zip(m.values()).map(|(s, m)| s - m).collect();
    let flags = observed_flags(&x, s.values(), zs);
    Ok(Decomposition {
        x: Path::from_parts(g, x),
        n: Path::from_parts(g, m.values().iter().map(|v| -v).collect()),
        a: s,
        class_tag: ClassTag::SigmaH,
        flags,
        band_scale: 1.0,
        exactness: Exactness::Exact,
        warnings: Vec::new(),
    })
}

/// Which component of the reflected piece to emit.
#[derive(Clone, Copy)]
enum Part {
    X,
    N,
    A,
}

/// `|β|` for `β = W - W_start` on a block, optionally frozen once `|β|`
/// reaches `stop_level`, with its discrete Tanaka decomposition
/// `|β| = Σ sgn(β) Δβ + L`.
struct ReflectedPiece {
    stop_level: Option<f64>,
    part: Part,
}

impl PathFunctional for ReflectedPiece {
    fn eval(&self, seg: &[f64], _step: f64, out: &mut [f64]) {
        if seg.is_empty() {
            return;
        }
        let w0 = seg[0];
        let (mut n, mut l, mut prev) = (0.0, 0.0, 0.0_f64);
        let mut stopped = false;
        out[0] = 0.0;
        for j in 1..seg.len() {
            if !stopped {
                let cur = seg[j] - w0;
                let db = cur - prev;
                let dn = sgn(prev) * db;
                n += dn;
                l += (cur.abs() - prev.abs()) - dn;
                prev = cur;
                if let Some(level) = self.stop_level {
                    stopped = cur.abs() >= level;
                }
            }
            out[j] = match self.part {
                Part::X => prev.abs(),
                Part::N => n,
                Part::A => l,
            };
        }
    }
}

/// Reflected Brownian motion restarted after every zero of `D` and lifted
/// by `rho`: `X = ρ(|β|)`, `A = ρ(L^0(β))`, `N = X - A` on each block.
pub fn lifted_reflected(w: &Path, zs: &ZeroSetInfo, stop_level: Option<f64>) -> Result<Decomposition> {
    if let Some(level) = stop_level {
        if !(level > 0.0 && level.is_finite()) {
            return Err(Error::Config(format!("stop_level must be > 0, got {level}")));
        }
    }
    check_grid(w, zs)?;
    if zs.gbar_index() >= w.grid().n_steps() {
        return Err(Error::DegenerateShift { gbar: zs.gbar(), horizon: w.grid().horizon() });
    }
    let lift = |part| crate::balayage::rho(&ReflectedPiece { stop_level, part }, w, zs);
    Ok(Decomposition {
        x: lift(Part::X)?,
        n: lift(Part::N)?,
        a: lift(Part::A)?,
        class_tag: ClassTag::SigmaSH,
        flags: Flags { h_subset_zeros_of_x: true, a_gbar_zero: true, class_d: true },
        band_scale: 1.0,
        exactness: Exactness::Exact,
        warnings: Vec::new(),
    })
}

/// Index blocks on which a product is assembled: the whole path for
/// `Σ(H)`, the restart blocks for `Σ_s(H)`.
fn assembly_blocks(tag: ClassTag, zs: &ZeroSetInfo, len: usize) -> Vec<(usize, usize)> {
    match tag {
        ClassTag::SigmaSH => zs.blocks().collect(),
        _ => vec![(0, len)],
    }
}

fn product_pair(p: &Decomposition, q: &Decomposition, zs: &ZeroSetInfo) -> Decomposition {
    let g = *p.grid();
    let len = g.len();
    let (x1, n1, a1) = (p.x.values(), p.n.values(), p.a.values());
    let (x2, n2, a2) = (q.x.values(), q.n.values(), q.a.values());
    let (mut x, mut n, mut a) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let (mut cross, mut qv1, mut qv2) = (0.0, 0.0, 0.0);
    for (s, e) in assembly_blocks(p.class_tag, zs, len) {
        x[s] = x1[s] * x2[s];
        let (mut nn, mut aa) = (0.0, 0.0);
        for k in s..e - 1 {
            // Discrete product rule Δ(X¹X²) = X¹_{k+1} ΔX² + X²_k ΔX¹.
            let (dn1, dn2) = (n1[k + 1] - n1[k], n2[k + 1] - n2[k]);
            let (da1, da2) = (a1[k + 1] - a1[k], a2[k + 1] - a2[k]);
            nn += x1[k + 1] * dn2 + x2[k] * dn1;
            aa += x1[k + 1] * da2 + x2[k] * da1;
            x[k + 1] = x1[k + 1] * x2[k + 1];
            n[k + 1] = nn;
            a[k + 1] = aa;
            cross += dn1 * dn2;
            qv1 += dn1 * dn1;
            qv2 += dn2 * dn2;
        }
    }
    let mut warnings = [p.warnings.clone(), q.warnings.clone()].concat();
    let corr = if qv1 > 0.0 && qv2 > 0.0 { cross / (qv1 * qv2).sqrt() } else { 0.0 };
    if corr.abs() > BRACKET_DIAGNOSTIC {
        warnings.push(format!("martingale parts not orthogonal: normalized bracket {corr:.3}"));
    }
    let sup = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Decomposition {
        x: Path::from_parts(g, x),
        n: Path::from_parts(g, n),
        a: Path::from_parts(g, a),
        class_tag: p.class_tag,
        flags: Flags {
            h_subset_zeros_of_x: p.flags.h_subset_zeros_of_x || q.flags.h_subset_zeros_of_x,
            a_gbar_zero: p.flags.a_gbar_zero && q.flags.a_gbar_zero,
            class_d: p.flags.class_d && q.flags.class_d,
        },
        band_scale: sup(x1) * q.band_scale + sup(x2) * p.band_scale,
        exactness: if p.exactness == Exactness::Exact && q.exactness == Exactness::Exact {
            Exactness::Exact
        } else {
            Exactness::Estimator
        },
        warnings,
    }
}

/// Threshold on `|[N¹,N²]| / sqrt([N¹][N²])` above which a product records
/// a non-orthogonality warning.
pub const BRACKET_DIAGNOSTIC: f64 = 0.25;

/// `Π X^i`, assembled by integration by parts.
pub fn product(ds: &[Decomposition], zs: &ZeroSetInfo) -> Result<Decomposition> {
    let first = ds.first().ok_or(Error::EmptyInput("product factors"))?;
    for d in ds {
        if d.class_tag != first.class_tag {
            return Err(Error::Contract("product factors carry different class tags".into()));
        }
        if d.grid() != first.grid() {
            return Err(Error::Contract("product factors live on different grids".into()));
        }
        if d.a.initial() != 0.0 || d.n.initial() != 0.0 {
            return Err(Error::Contract("product factors need A_0 = N_0 = 0".into()));
        }
    }
    if first.class_tag == ClassTag::SigmaSH {
        check_grid(&first.x, zs)?;
    }
    let mut acc = first.clone();
    for d in &ds[1..] {
        acc = product_pair(&acc, d, zs);
    }
    Ok(acc)
}

/// Bounded test functions `f` with antiderivative `F`, `F(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Zero,
    One,
    /// `1{x < c}`, `F(x) = min(x, c)`.
    IndicatorBelow { c: f64 },
    /// `min(x, c)`.
    CappedIdentity { c: f64 },
    /// `f(x) = x`, `F(x) = x^2/2`.
    Identity,
}

impl TestFunction {
    pub fn f(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Zero => 0.0,
            TestFunction::One => 1.0,
            TestFunction::IndicatorBelow { c } => f64::from(u8::from(x < c)),
            TestFunction::CappedIdentity { c } => x.min(c),
            TestFunction::Identity => x,
        }
    }

    pub fn antiderivative(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Zero => 0.0,
            TestFunction::One => x,
            TestFunction::IndicatorBelow { c } => x.min(c),
            TestFunction::CappedIdentity { c } => {
                if x < c {
                    0.5 * x * x
                } else {
                    0.5 * c * c + c * (x - c)
                }
            }
            TestFunction::Identity => 0.5 * x * x,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            TestFunction::Zero => "0".into(),
            TestFunction::One => "1".into(),
            TestFunction::IndicatorBelow { c } => format!("1{{x<{c}}}"),
            TestFunction::CappedIdentity { c } => format!("min(x,{c})"),
            TestFunction::Identity => "x".into(),
        }
    }
}

/// `f(A) X` with increasing part `F(A)`. For `Σ_s(H)` this is the
/// `Q`-integral `∫ f(A) dA`, evaluated in closed form.
pub fn scaled_by_f(d: &Decomposition, f: &TestFunction) -> Result<Decomposition> {
    let av = d.a.values();
    let fa: Vec<f64> = av.iter().map(|&a| f.f(a)).collect();
    if let Some(v) = fa.iter().find(|v| **v < 0.0) {
        return Err(Error::Contract(format!("scaled_by_f needs f >= 0, saw {v}")));
    }
    let g = *d.grid();
    let x: Vec<f64> = fa.iter().zip(d.x.values()).map(|(f, x)| f * x).collect();
    if d.class_tag == ClassTag::SigmaSH && f.f(0.0) != 0.0 {
        return Err(Error::Contract("scaled_by_f on Σ_s(H) needs f(0) = 0".into()));
    }
    // A restarts from 0 on every block, so F(A) is the Q-integral of f(A) dA.
    let a: Vec<f64> = av.iter().map(|&a| f.antiderivative(a)).collect();
    let sup_f = fa.iter().fold(0.0_f64, |m, v| m.max(*v));
    let n: Vec<f64> = x.iter().zip(&a).map(|(x, a)| x - a).collect();
    Ok(Decomposition {
        x: Path::from_parts(g, x),
        n: Path::from_parts(g, n),
        a: Path::from_parts(g, a),
        class_tag: d.class_tag,
        flags: d.flags,
        band_scale: d.band_scale * sup_f.max(f64::MIN_POSITIVE),
        exactness: d.exactness,
        warnings: d.warnings.clone(),
    })
}

/// Mass of `dA` off its permitted support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportCheck {
    pub violation_mass: f64,
    pub total_mass: f64,
}

impl SupportCheck {
    pub fn ratio(&self) -> f64 {
        if self.total_mass > 0.0 {
            self.violation_mass / self.total_mass
        } else {
            0.0
        }
    }
}

/// Largest `violation_mass / total_mass` accepted by [`verify_membership`].
pub const SUPPORT_RATIO_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport {
    pub tag: ClassTag,
    pub support: SupportCheck,
    pub identity_gap: f64,
    pub failures: Vec<String>,
    /// Check of the shifted triple as a classical decomposition, when the
    /// class or its flags call for one.
    pub shifted: Option<Box<MembershipReport>>,
}

impl MembershipReport {
    /// Invariants hold and the support ratio is within
    /// [`SUPPORT_RATIO_LIMIT`], here and for the shifted triple.
    pub fn pass(&self) -> bool {
        self.invariants_hold()
            && self.support.ratio() <= SUPPORT_RATIO_LIMIT
            && self.shifted.as_ref().is_none_or(|s| s.pass())
    }

    /// Every check except the support ratio, which is noisy on a single
    /// path and is meant to be aggregated over an ensemble.
    pub fn invariants_hold(&self) -> bool {
        self.failures.is_empty() && self.shifted.as_ref().is_none_or(|s| s.invariants_hold())
    }
}

fn rounding_slack(v: &[f64]) -> f64 {
    1e-9 * (1.0 + v.iter().fold(0.0_f64, |m, x| m.max(x.abs())))
}

/// Checks every invariant of `d` and the support of `dA`. An increment
/// over `[t_k, t_{k+1}]` is permitted when `min(X_k, X_{k+1})` is within
/// `support_tolerance · band_scale` of 0, or (for `Σ(H)`) when an endpoint
/// lies in `H`. `Σ_s(H)` only constrains increments after `gbar`.
pub fn verify_membership(d: &Decomposition, zs: &ZeroSetInfo, support_tolerance: f64) -> MembershipReport {
    let mut failures = Vec::new();
    let (x, n, a) = (d.x.values(), d.n.values(), d.a.values());
    let slack = rounding_slack(x).max(rounding_slack(a));
    let identity_gap = d.identity_gap();
    if d.exactness == Exactness::Exact && identity_gap > slack {
        failures.push(format!("X != N + A: gap {identity_gap:e}"));
    }
    if let Some(v) = x.iter().find(|v| **v < -slack) {
        failures.push(format!("X negative: {v}"));
    }
    let gbar = zs.gbar_index();
    let monotone_from = match d.class_tag {
        ClassTag::SigmaSH => {
            let leak = zs.h_indices().iter().find(|&&h| n[h] != 0.0 || a[h] != 0.0);
            if let Some(h) = leak {
                failures.push(format!("N or A not null on H at index {h}"));
            }
            gbar
        }
        ClassTag::SigmaH | ClassTag::ClassicalSigma => {
            if n[0] != 0.0 || a[0] != 0.0 {
                failures.push("N_0 and A_0 must vanish".into());
            }
            0
        }
    };
    if let Some(k) = (monotone_from..a.len() - 1).find(|&k| a[k + 1] < a[k] - slack) {
        failures.push(format!("A decreases at index {k}"));
    }
    let band = support_tolerance * d.band_scale;
    let (mut violation, mut total) = (0.0, 0.0);
    for k in monotone_from..a.len() - 1 {
        let da = a[k + 1] - a[k];
        if da <= 0.0 {
            continue;
        }
        total += da;
        let near_zero = x[k].min(x[k + 1]) <= band;
        let on_h = d.class_tag == ClassTag::SigmaH && (zs.contains(k) || zs.contains(k + 1));
        if !(near_zero || on_h) {
            violation += da;
        }
    }
    let support = SupportCheck { violation_mass: violation, total_mass: total };

    let wants_shift = match d.class_tag {
        ClassTag::SigmaSH => true,
        ClassTag::SigmaH => d.flags.h_subset_zeros_of_x && d.flags.a_gbar_zero,
        ClassTag::ClassicalSigma => false,
    };
    let shifted = if wants_shift && gbar < d.grid().n_steps() {
        if d.class_tag == ClassTag::SigmaH && (x[gbar].abs() > slack || a[gbar] != 0.0) {
            failures.push("flags claim X_gbar = A_gbar = 0 but the path disagrees".into());
        }
        d.shifted(zs).ok().map(|s| {
            let empty = ZeroSetInfo::empty(*s.grid());
            Box::new(verify_membership(&s, &empty, support_tolerance))
        })
    } else {
        None
    };
    MembershipReport { tag: d.class_tag, support, identity_gap, failures, shifted }
}

/// `F(A_t) - f(A_t) X_t`.
pub fn characterization_process(d: &Decomposition, f: &TestFunction) -> Result<Path> {
    if d.class_tag == ClassTag::SigmaSH {
        return Err(Error::Contract("characterization_process expects a Σ(H) decomposition".into()));
    }
    let v = d
        .a
        .values()
        .iter()
        .zip(d.x.values())
        .map(|(&a, &x)| f.antiderivative(a) - f.f(a) * x)
        .collect();
    Ok(Path::from_parts(*d.grid(), v))
}

/// `Q∫ f(A) dA - ρ(f(A_{gbar+·})) X`, with the integral against the
/// restarted finite-variation `A` taken in closed form as `F(A)`.
pub fn sigma_s_characterization_process(d: &Decomposition, f: &TestFunction, zs: &ZeroSetInfo) -> Result<Path> {
    if d.class_tag != ClassTag::SigmaSH {
        return Err(Error::Contract("sigma_s_characterization_process expects Σ_s(H)".into()));
    }
    check_grid(&d.x, zs)?;
    let g = *d.grid();
    let v = (0..g.len())
        .map(|k| {
            if zs.contains(k) {
                return 0.0;
            }
            let a = d.a.get(k);
            f.antiderivative(a) - f.f(a) * d.x.get(k)
        })
        .collect();
    Ok(Path::from_parts(g, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{sample_bm, SeedSpec};
    use crate::grid::make_grid;

    fn bm(seed: u64) -> Path {
        sample_bm(&make_grid(1.0, 1e-3).unwrap(), 0.0, SeedSpec::new(seed, 0))
    }

    #[test]
    fn zero_martingale() {
        let g = make_grid(1.0, 0.1).unwrap();
        let m = Path::constant(g, 0.0);
        let d = abs_martingale(&m, &ZeroSetInfo::empty(g), 0.1).unwrap();
        for p in [&d.x, &d.n] {
            assert!(p.values().iter().all(|&v| v == 0.0));
        }
        // The kernel assumes unit volatility, so a frozen path at the level
        // accrues occupation time.
        for (k, a) in d.a.values().iter().enumerate() {
            assert!((a - g.time(k) / 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn abs_requires_start_at_zero() {
        let g = make_grid(1.0, 0.1).unwrap();
        let m = Path::constant(g, 1.0);
        assert!(matches!(abs_martingale(&m, &ZeroSetInfo::empty(g), 0.1), Err(Error::Contract(_))));
    }

    #[test]
    fn pm_with_unit_weights_is_abs() {
        let m = bm(3);
        let zs = ZeroSetInfo::empty(*m.grid());
        let bw = default_bw(&m);
        assert_eq!(pm_combination(&m, 1.0, 1.0, &zs, bw).unwrap(), abs_martingale(&m, &zs, bw).unwrap());
        assert!(matches!(pm_combination(&m, 2.0, 0.0, &zs, bw), Err(Error::Config(_))));
    }

    fn default_bw(m: &Path) -> f64 {
        m.grid().step().sqrt()
    }

    #[test]
    fn monotone_drawdown_is_flat() {
        let g = make_grid(1.0, 0.25).unwrap();
        let m = Path::new(g, vec![0.0, 0.1, 0.3, 0.4, 0.9]).unwrap();
        let d = drawdown(&m, &ZeroSetInfo::empty(g)).unwrap();
        assert!(d.x.values().iter().all(|&v| v == 0.0));
        assert_eq!(d.a, m);
    }

    #[test]
    fn drawdown_membership_and_negative_control() {
        let m = bm(4);
        let zs = ZeroSetInfo::empty(*m.grid());
        let d = drawdown(&m, &zs).unwrap();
        let r = verify_membership(&d, &zs, default_bw(&m));
        assert!(r.pass(), "{:?}", r.failures);
        assert_eq!(r.support.violation_mass, 0.0);

        let mut bad = d.clone();
        let g = *m.grid();
        let ramp: Vec<f64> = d
            .a
            .values()
            .iter()
            .enumerate()
            .map(|(k, a)| a + 0.5 * g.time(k))
            .collect();
        bad.a = Path::new(g, ramp).unwrap();
        let r = verify_membership(&bad, &zs, default_bw(&m));
        assert!(!r.pass());
        assert!(r.support.violation_mass > 0.0);
    }

    #[test]
    fn reflected_under_constant_density_is_classical() {
        let w = bm(5);
        let zs = ZeroSetInfo::empty(*w.grid());
        let d = lifted_reflected(&w, &zs, None).unwrap();
        for (x, v) in d.x.values().iter().zip(w.values()) {
            assert_eq!(*x, v.abs());
        }
        assert!(d.identity_gap() < 1e-12);
        let r = verify_membership(&d, &zs, default_bw(&w));
        assert!(r.pass(), "{:?}", r.failures);
        assert!(r.shifted.unwrap().pass());
    }

    #[test]
    fn reflected_lift_is_null_on_h() {
        let w = bm(6);
        let g = *w.grid();
        let signs = Path::from_fn(g, |t| (12.0 * t).cos()).unwrap();
        let zs = ZeroSetInfo::from_sign_changes(g, signs.values());
        assert!(!zs.h_indices().is_empty());
        let d = lifted_reflected(&w, &zs, Some(1.0)).unwrap();
        for &h in zs.h_indices() {
            assert_eq!((d.x.get(h), d.n.get(h), d.a.get(h)), (0.0, 0.0, 0.0));
        }
        let r = verify_membership(&d, &zs, default_bw(&w));
        assert!(r.pass(), "{:?}", r.failures);
    }

    #[test]
    fn single_factor_product_is_identity() {
        let m = bm(7);
        let zs = ZeroSetInfo::empty(*m.grid());
        let d = drawdown(&m, &zs).unwrap();
        assert_eq!(product(std::slice::from_ref(&d), &zs).unwrap(), d);
    }

    #[test]
    fn product_rejects_nonzero_start_and_mixed_tags() {
        let m = bm(8);
        let g = *m.grid();
        let zs = ZeroSetInfo::empty(g);
        let d = drawdown(&m, &zs).unwrap();
        let mut one = d.clone();
        one.x = Path::constant(g, 1.0);
        one.n = Path::constant(g, 0.0);
        one.a = Path::constant(g, 1.0);
        assert!(matches!(product(&[d.clone(), one], &zs), Err(Error::Contract(_))));
        let r = lifted_reflected(&m, &zs, None).unwrap();
        assert!(matches!(product(&[d, r], &zs), Err(Error::Contract(_))));
    }

    #[test]
    fn product_of_drawdowns_is_a_member() {
        let (m1, m2) = (bm(9), bm(10));
        let zs = ZeroSetInfo::empty(*m1.grid());
        let p = product(&[drawdown(&m1, &zs).unwrap(), drawdown(&m2, &zs).unwrap()], &zs).unwrap();
        let r = verify_membership(&p, &zs, default_bw(&m1));
        assert!(r.pass(), "{:?}", r.failures);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn scaling_by_one_and_by_identity() {
        let m = bm(11);
        let zs = ZeroSetInfo::empty(*m.grid());
        let d = drawdown(&m, &zs).unwrap();
        let same = scaled_by_f(&d, &TestFunction::One).unwrap();
        assert_eq!((same.x.values(), same.a.values()), (d.x.values(), d.a.values()));
        let sq = scaled_by_f(&d, &TestFunction::Identity).unwrap();
        for (a2, a) in sq.a.values().iter().zip(d.a.values()) {
            assert_eq!(*a2, 0.5 * a * a);
        }
        assert!(verify_membership(&sq, &zs, default_bw(&m)).pass());
    }

    #[test]
    fn characterization_reductions() {
        let m = bm(12);
        let zs = ZeroSetInfo::empty(*m.grid());
        let d = drawdown(&m, &zs).unwrap();
        let zero = characterization_process(&d, &TestFunction::Zero).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        let neg_n = characterization_process(&d, &TestFunction::One).unwrap();
        for (c, n) in neg_n.values().iter().zip(d.n.values()) {
            assert!((c + n).abs() < 1e-12);
        }
        let r = lifted_reflected(&m, &zs, None).unwrap();
        let s = sigma_s_characterization_process(&r, &TestFunction::One, &zs).unwrap();
        for (c, n) in s.values().iter().zip(r.n.values()) {
            assert!((c + n).abs() < 1e-9);
        }
        assert!(sigma_s_characterization_process(&d, &TestFunction::One, &zs).is_err());
    }

    #[test]
    fn antiderivatives_match_numerically() {
        let fs = [
            TestFunction::One,
            TestFunction::IndicatorBelow { c: 1.0 },
            TestFunction::CappedIdentity { c: 1.0 },
            TestFunction::Identity,
        ];
        for f in fs {
            let n = 200_000;
            let h = 2.0 / n as f64;
            let riemann: f64 = (0..n).map(|i| f.f((i as f64 + 0.5) * h) * h).sum();
            assert!((riemann - f.antiderivative(2.0)).abs() < 1e-6, "{}", f.label());
        }
    }
}
