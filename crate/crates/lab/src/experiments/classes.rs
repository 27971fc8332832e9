use sigma_core::balayage::default_bandwidth;
use sigma_core::classes::{
    drawdown, product, scaled_by_f, verify_membership, ClassTag, Decomposition, MembershipReport,
    TestFunction, SUPPORT_RATIO_LIMIT,
};
use sigma_core::density::{DensityModel, ZeroSetInfo};
use sigma_core::engine::SeedSpec;
use sigma_core::stats::TestReport;
use sigma_core::{make_grid, Error, Path, TimeGrid};

use super::characterization::{model_label, ERF_SIGN, STOPPED};
use super::{checkpoint_indices, flatness_rows, zero_count};
use crate::config::Construction;
use crate::error::Result;
use crate::sim::{auxiliary_driver, expect_rejection, martingale_driver, run_paths, Ctx, DensityDraw, ExperimentOutput};

/// Slope of the ramp added to `X` and `A` in the corrupted control.
const RAMP: f64 = 0.5;

#[derive(Clone, Copy)]
enum Recipe {
    Plain(Construction),
    DrawdownProduct,
    ScaledByX(Construction),
}

impl Recipe {
    fn label(&self) -> String {
        match self {
            Recipe::Plain(c) => c.label(),
            Recipe::DrawdownProduct => "(S-M)(S'-M')".into(),
            Recipe::ScaledByX(c) => format!("A*({})", c.label()),
        }
    }

    fn build(&self, seed: SeedSpec, grid: &TimeGrid, zs: &ZeroSetInfo) -> sigma_core::Result<Decomposition> {
        let m = martingale_driver(seed, grid);
        match self {
            Recipe::Plain(c) => c.build(&m, zs),
            Recipe::DrawdownProduct => product(&[drawdown(&m, zs)?, drawdown(&auxiliary_driver(seed, grid), zs)?], zs),
            Recipe::ScaledByX(c) => scaled_by_f(&c.build(&m, zs)?, &TestFunction::Identity),
        }
    }
}

const LIFTED: Construction = Construction::LiftedReflected { stop_level: None };
const PM: Construction = Construction::PmCombination { alpha: 2.0, beta: 0.5 };

fn membership_cases() -> Vec<(Recipe, DensityModel)> {
    use DensityModel::ConstantOne;
    vec![
        (Recipe::Plain(Construction::AbsMartingale), ConstantOne),
        (Recipe::Plain(Construction::AbsMartingale), STOPPED),
        (Recipe::Plain(PM), ConstantOne),
        (Recipe::Plain(PM), STOPPED),
        (Recipe::Plain(Construction::Drawdown), ConstantOne),
        (Recipe::Plain(Construction::Drawdown), STOPPED),
        (Recipe::Plain(LIFTED), ConstantOne),
        (Recipe::Plain(LIFTED), ERF_SIGN),
        (Recipe::DrawdownProduct, ConstantOne),
        (Recipe::ScaledByX(Construction::Drawdown), ConstantOne),
        (Recipe::ScaledByX(LIFTED), ERF_SIGN),
    ]
}

/// Outcome of the shifted check of one path.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Shifted {
    NotApplicable,
    Pass,
    Fail,
}

struct CaseResult {
    coarse: (f64, f64),
    fine: (f64, f64),
    shifted_support: (f64, f64),
    invariants: bool,
    shifted: Shifted,
    first_failure: Option<String>,
}

fn shifted_status(r: &MembershipReport) -> Shifted {
    match &r.shifted {
        None => Shifted::NotApplicable,
        Some(s) if s.invariants_hold() => Shifted::Pass,
        Some(_) => Shifted::Fail,
    }
}

fn support_parts(r: &MembershipReport) -> (f64, f64) {
    (r.support.violation_mass, r.support.total_mass)
}

fn ratio((v, t): (f64, f64)) -> f64 {
    if t > 0.0 {
        v / t
    } else {
        0.0
    }
}

fn total<'a>(parts: impl Iterator<Item = (f64, f64)> + 'a) -> (f64, f64) {
    parts.fold((0.0, 0.0), |(v, t), (a, b)| (v + a, t + b))
}

fn corrupt(d: &Decomposition) -> sigma_core::Result<Decomposition> {
    let g = *d.grid();
    let ramp = |p: &Path| Path::new(g, g.times().zip(p.values()).map(|(t, v)| v + RAMP * t).collect());
    Ok(Decomposition { x: ramp(&d.x)?, a: ramp(&d.a)?, ..d.clone() })
}

/// Class membership of every construction, the refinement behavior of the
/// support check, the shifted checks and a corrupted control. Each path
/// is drawn at half the configured step; the configured step is its
/// every-other-point subsample.
pub fn membership(ctx: &Ctx) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let coarse_grid = ctx.grid()?;
    let fine_grid = make_grid(coarse_grid.horizon(), coarse_grid.step() / 2.0)?;
    let tolerance = default_bandwidth(&coarse_grid);
    let cases = membership_cases();
    let ens = run_paths(ctx, s.n_paths, &fine_grid, |i, g| {
        let seed = ctx.seed(i);
        let mut results = Vec::with_capacity(cases.len());
        let mut corrupted = (0.0, 0.0, false);
        for (recipe, model) in &cases {
            let fine_draw = DensityDraw::new(model, seed, g)?;
            let coarse_sample = fine_draw.sample.subsample(2)?;
            let coarse_zs = sigma_core::density::zero_set(&coarse_sample);
            let fine = recipe.build(seed, g, &fine_draw.zs)?;
            let coarse = recipe.build(seed, coarse_sample.grid(), &coarse_zs)?;
            let rc = verify_membership(&coarse, &coarse_zs, tolerance);
            let rf = verify_membership(&fine, &fine_draw.zs, tolerance);
            if matches!(recipe, Recipe::Plain(Construction::Drawdown)) && *model == DensityModel::ConstantOne {
                let bad = verify_membership(&corrupt(&coarse)?, &coarse_zs, tolerance);
                corrupted = (bad.support.violation_mass, bad.support.total_mass, bad.pass());
            }
            results.push(CaseResult {
                coarse: support_parts(&rc),
                fine: support_parts(&rf),
                shifted_support: rc.shifted.as_deref().map_or((0.0, 0.0), support_parts),
                invariants: rc.invariants_hold(),
                shifted: shifted_status(&rc),
                first_failure: rc.failures.first().cloned(),
            });
        }
        Ok((results, corrupted))
    })?;
    let n = ens.items.len();
    let mut out = ExperimentOutput { dropped_paths: ens.dropped, ..Default::default() };
    for (c, (recipe, model)) in cases.iter().enumerate() {
        let label = format!("{} under {}", recipe.label(), model_label(model));
        let per: Vec<&CaseResult> = ens.items.iter().map(|(r, _)| &r[c]).collect();
        let coarse = ratio(total(per.iter().map(|r| r.coarse)));
        let fine = ratio(total(per.iter().map(|r| r.fine)));
        out.push(TestReport::at_most(format!("{label}: support violation ratio"), coarse, SUPPORT_RATIO_LIMIT, n));
        let failing = per.iter().filter(|r| !r.invariants).count();
        let mut row = zero_count(format!("{label}: paths failing the class invariants"), failing, n);
        if let Some(msg) = per.iter().find_map(|r| r.first_failure.clone()) {
            row = row.with_note(format!("first failure: {msg}"));
        }
        out.push(row);
        out.push(
            TestReport::at_most(
                format!("{label}: violation ratio at half step, tolerance fixed"),
                fine,
                coarse / 2.0,
                n,
            )
            .with_note(format!("ratio {coarse:.3e} at step {}, {fine:.3e} at half", coarse_grid.step())),
        );
        let checked = per.iter().filter(|r| r.shifted != Shifted::NotApplicable).count();
        let failed = per.iter().filter(|r| r.shifted == Shifted::Fail).count();
        out.push(
            zero_count(format!("{label}: shifted triples failing the classical invariants"), failed, n)
                .with_note(format!("shifted check applies on {checked} of {n} paths")),
        );
        if checked > 0 {
            out.push(TestReport::at_most(
                format!("{label}: shifted support violation ratio"),
                ratio(total(per.iter().map(|r| r.shifted_support))),
                SUPPORT_RATIO_LIMIT,
                checked,
            ));
        }
    }
    let corrupted = total(ens.items.iter().map(|(_, c)| (c.0, c.1)));
    let passing = ens.items.iter().filter(|(_, c)| c.2).count();
    out.push(expect_rejection(
        TestReport::at_most("corrupted", ratio(corrupted), SUPPORT_RATIO_LIMIT, n),
        format!("negative control: S-M with {RAMP}t added to X and A violates the support"),
    ));
    out.push(zero_count("negative control: corrupted paths passing membership", passing, n));
    Ok(out)
}

struct ProductPath {
    invariants: bool,
    violation: (f64, f64),
    flat: Vec<f64>,
    single_mismatch: usize,
    warnings: usize,
    same_driver_warnings: usize,
}

fn mismatches(a: &Path, b: &Path) -> usize {
    a.values().iter().zip(b.values()).filter(|(x, y)| x != y).count()
}

/// Products of orthogonal class members, assembled by integration by parts.
pub fn products(ctx: &Ctx) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let grid = ctx.grid()?;
    let cps = checkpoint_indices(&grid, &s.checkpoints);
    let tolerance = default_bandwidth(&grid);
    let cases = [
        (Construction::Drawdown, DensityModel::ConstantOne),
        (Construction::Drawdown, STOPPED),
        (LIFTED, ERF_SIGN),
    ];
    let mut out = ExperimentOutput::default();
    for (construction, model) in &cases {
        let ens = run_paths(ctx, s.n_paths, &grid, |i, g| {
            let seed = ctx.seed(i);
            let draw = DensityDraw::new(model, seed, g)?;
            let (m1, m2) = (martingale_driver(seed, g), auxiliary_driver(seed, g));
            let (d1, d2) = (construction.build(&m1, &draw.zs)?, construction.build(&m2, &draw.zs)?);
            let p = product(&[d1.clone(), d2], &draw.zs)?;
            let r = verify_membership(&p, &draw.zs, tolerance);
            let single = product(std::slice::from_ref(&d1), &draw.zs)?;
            let same = product(&[d1.clone(), d1.clone()], &draw.zs)?;
            Ok(ProductPath {
                invariants: r.invariants_hold(),
                violation: support_parts(&r),
                flat: cps.iter().map(|&k| draw.d(k) * p.n.get(k)).collect(),
                single_mismatch: mismatches(&single.x, &d1.x) + mismatches(&single.n, &d1.n) + mismatches(&single.a, &d1.a),
                warnings: p.warnings.len(),
                same_driver_warnings: usize::from(same.warnings.is_empty()),
            })
        })?;
        out.dropped_paths += ens.dropped;
        let n = ens.items.len();
        let label = format!("{} x {} under {}", construction.label(), construction.label(), model_label(model));
        let sum = |f: fn(&ProductPath) -> usize| ens.items.iter().map(f).sum::<usize>();
        out.push(zero_count(
            format!("{label}: paths failing the class invariants"),
            sum(|p| usize::from(!p.invariants)),
            n,
        ));
        out.push(TestReport::at_most(
            format!("{label}: support violation ratio"),
            ratio(total(ens.items.iter().map(|p| p.violation))),
            SUPPORT_RATIO_LIMIT,
            n,
        ));
        let flat: Vec<Vec<f64>> = ens.items.iter().map(|p| p.flat.clone()).collect();
        out.extend(flatness_rows(&[format!("{label}: E[D_t N_t] flat")], &s.checkpoints, &flat, &vec![1.0; n])?);
        out.push(zero_count(format!("{label}: one-factor product differs from its factor"), sum(|p| p.single_mismatch), n));
        out.push(zero_count(format!("{label}: orthogonality warnings for independent drivers"), sum(|p| p.warnings), n));
        out.push(zero_count(
            format!("{label}: shared driver without an orthogonality warning"),
            sum(|p| p.same_driver_warnings),
            n,
        ));
    }
    let constant = Path::constant(grid, 1.0);
    let bogus = Decomposition {
        x: constant.clone(),
        n: constant,
        a: Path::constant(grid, 0.0),
        ..drawdown(&Path::constant(grid, 0.0), &ZeroSetInfo::empty(grid))?
    };
    let rejected = matches!(product(&[bogus.clone(), bogus], &ZeroSetInfo::empty(grid)), Err(Error::Contract(_)));
    out.push(TestReport::exact("X = N = 1 factor rejected as a contract error", 1.0, f64::from(u8::from(rejected)), 1));
    Ok(out)
}

struct ScaledPath {
    invariants: Vec<bool>,
    support: Vec<(f64, f64)>,
    a_mismatch: usize,
    unit_mismatch: usize,
    flat: Vec<f64>,
}

/// `f(A)X` with increasing part `F(A)`.
pub fn scaled_f(ctx: &Ctx) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let grid = ctx.grid()?;
    let cps = checkpoint_indices(&grid, &s.checkpoints);
    let tolerance = default_bandwidth(&grid);
    let bounded = [TestFunction::IndicatorBelow { c: 1.0 }, TestFunction::CappedIdentity { c: 1.0 }, TestFunction::Identity];
    let vanishing = [TestFunction::Identity, TestFunction::CappedIdentity { c: 1.0 }];
    let cases: [(Construction, DensityModel, &[TestFunction]); 3] = [
        (Construction::Drawdown, DensityModel::ConstantOne, &bounded),
        (Construction::Drawdown, STOPPED, &bounded),
        (LIFTED, ERF_SIGN, &vanishing),
    ];
    let mut out = ExperimentOutput::default();
    for (construction, model, fs) in &cases {
        let ens = run_paths(ctx, s.n_paths, &grid, |i, g| {
            let seed = ctx.seed(i);
            let draw = DensityDraw::new(model, seed, g)?;
            let d = construction.build(&martingale_driver(seed, g), &draw.zs)?;
            let mut r = ScaledPath {
                invariants: Vec::new(),
                support: Vec::new(),
                a_mismatch: 0,
                unit_mismatch: 0,
                flat: Vec::new(),
            };
            for f in fs.iter() {
                let sd = scaled_by_f(&d, f)?;
                let m = verify_membership(&sd, &draw.zs, tolerance);
                r.invariants.push(m.invariants_hold());
                r.support.push(support_parts(&m));
                r.a_mismatch += sd.a.values().iter().zip(d.a.values()).filter(|(a2, a)| **a2 != f.antiderivative(**a)).count();
                if *f == TestFunction::Identity {
                    r.a_mismatch += sd.a.values().iter().zip(d.a.values()).filter(|(a2, a)| **a2 != 0.5 * **a * **a).count();
                }
                r.flat.extend(cps.iter().map(|&k| draw.d(k) * sd.n.get(k)));
            }
            if d.class_tag != ClassTag::SigmaSH {
                let unit = scaled_by_f(&d, &TestFunction::One)?;
                r.unit_mismatch = mismatches(&unit.x, &d.x) + mismatches(&unit.a, &d.a);
            }
            Ok(r)
        })?;
        out.dropped_paths += ens.dropped;
        let n = ens.items.len();
        let label = format!("{} under {}", construction.label(), model_label(model));
        for (j, f) in fs.iter().enumerate() {
            let failing = ens.items.iter().filter(|r| !r.invariants[j]).count();
            out.push(zero_count(format!("{label}, f={}: paths failing the class invariants", f.label()), failing, n));
            out.push(TestReport::at_most(
                format!("{label}, f={}: support violation ratio", f.label()),
                ratio(total(ens.items.iter().map(|r| r.support[j]))),
                SUPPORT_RATIO_LIMIT,
                n,
            ));
        }
        out.push(zero_count(
            format!("{label}: increasing part differs from F(A)"),
            ens.items.iter().map(|r| r.a_mismatch).sum(),
            n,
        ));
        if matches!(construction, Construction::Drawdown) {
            out.push(zero_count(
                format!("{label}: f = 1 changes X or A"),
                ens.items.iter().map(|r| r.unit_mismatch).sum(),
                n,
            ));
        }
        let names: Vec<String> =
            fs.iter().map(|f| format!("{label}, f={}: E[D_t N_t] flat for f(A)X", f.label())).collect();
        let flat: Vec<Vec<f64>> = ens.items.iter().map(|r| r.flat.clone()).collect();
        out.extend(flatness_rows(&names, &s.checkpoints, &flat, &vec![1.0; n])?);
    }
    Ok(out)
}
