use sigma_core::balayage::{ito_residual, ito_residual_path, tanaka_residual, tanaka_residual_path, ItoFunction, TanakaForm};
use sigma_core::density::{zero_set, DensityModel, ZeroSetInfo};
use sigma_core::stats::TestReport;
use sigma_core::Path;

use super::characterization::{model_label, ERF_SIGN};
use super::zero_count;
use crate::error::Result;
use crate::sim::{martingale_driver, run_paths, Ctx, DensityDraw, ExperimentOutput};

/// Coarsening factors; the configured step is the finest.
const FACTORS: [usize; 3] = [4, 2, 1];
/// Required improvement of the median residual per halving of the step.
const HALVING_RATIO: f64 = 1.2;
/// Residuals of discretely exact identities must stay at rounding level.
const ROUNDING_FLOOR: f64 = 1e-9;
const LEVEL: f64 = 0.0;
const CONSTANT: f64 = 0.7;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Observations of one path at every step in [`FACTORS`], from the same
/// randomness.
struct Refinements {
    levels: Vec<(Path, ZeroSetInfo)>,
}

fn refinements(ctx: &Ctx, model: &DensityModel, i: u64, g: &sigma_core::TimeGrid) -> sigma_core::Result<Refinements> {
    let draw = DensityDraw::new(model, ctx.seed(i), g)?;
    let w = martingale_driver(ctx.seed(i), g);
    let levels = FACTORS
        .iter()
        .map(|&f| {
            let sample = draw.sample.subsample(f)?;
            Ok((w.subsample(f)?, zero_set(&sample)))
        })
        .collect::<sigma_core::Result<_>>()?;
    Ok(Refinements { levels })
}

struct PathResiduals {
    /// `[check][factor]`.
    sup: Vec<Vec<f64>>,
    constant: f64,
    on_h: usize,
    triangle: usize,
}

fn halving_rows(ctx: &Ctx, label: &str, per_check: &[Vec<f64>]) -> Vec<TestReport> {
    let step = ctx.settings.step;
    let medians: Vec<f64> = per_check.iter().cloned().map(median).collect();
    let desc = FACTORS
        .iter()
        .zip(&medians)
        .map(|(f, m)| format!("step {}: {m:.4e}", step * *f as f64))
        .collect::<Vec<_>>()
        .join(", ");
    (0..FACTORS.len() - 1)
        .map(|j| {
            let (coarse, fine) = (step * FACTORS[j] as f64, step * FACTORS[j + 1] as f64);
            let ratio = medians[j] / medians[j + 1];
            TestReport::at_least(
                format!("{label}: median sup residual ratio, step {coarse} -> {fine}"),
                ratio,
                HALVING_RATIO,
                per_check[j].len(),
            )
            .with_note(format!("medians {desc}"))
        })
        .collect()
}

fn floor_row(ctx: &Ctx, label: &str, per_check: &[Vec<f64>]) -> TestReport {
    let step = ctx.settings.step;
    let medians: Vec<f64> = per_check.iter().cloned().map(median).collect();
    let worst = medians.iter().fold(0.0_f64, |m, v| m.max(*v));
    let desc = FACTORS
        .iter()
        .zip(&medians)
        .map(|(f, m)| format!("step {}: {m:.3e}", step * *f as f64))
        .collect::<Vec<_>>()
        .join(", ");
    TestReport::at_most(
        format!("{label}: median sup residual at rounding level at every step"),
        worst,
        ROUNDING_FLOOR,
        per_check[0].len(),
    )
    .with_note(format!("the discrete identity is exact; medians {desc}"))
}

fn transpose(items: &[PathResiduals], checks: usize) -> Vec<Vec<Vec<f64>>> {
    (0..checks)
        .map(|c| (0..FACTORS.len()).map(|f| items.iter().map(|r| r.sup[c][f]).collect()).collect())
        .collect()
}

fn tanaka(ctx: &Ctx, form: TanakaForm, name: &str) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let grid = ctx.grid()?;
    let model = s.density.unwrap_or(ERF_SIGN);
    let ens = run_paths(ctx, s.n_paths, &grid, |i, g| {
        let r = refinements(ctx, &model, i, g)?;
        let mut sup = vec![Vec::new()];
        let (mut on_h, mut triangle) = (0, 0);
        for (x, zs) in &r.levels {
            let gap = tanaka_residual_path(x, LEVEL, zs, form)?;
            sup[0].push(gap.values().iter().fold(0.0_f64, |m, v| m.max(*v)));
            on_h += zs.h_indices().iter().filter(|&&h| gap.get(h) != 0.0).count();
            if form == TanakaForm::Abs {
                let plus = tanaka_residual(x, LEVEL, zs, TanakaForm::Plus)?;
                let minus = tanaka_residual(x, LEVEL, zs, TanakaForm::Minus)?;
                let slack = 1e-12 * (1.0 + x.values().iter().fold(0.0_f64, |m, v| m.max(v.abs())));
                triangle += usize::from(sup[0][sup[0].len() - 1] > plus + minus + slack);
            }
        }
        let (x, zs) = &r.levels[FACTORS.len() - 1];
        let constant = tanaka_residual(&Path::constant(*x.grid(), CONSTANT), LEVEL, zs, form)?;
        Ok(PathResiduals { sup, constant, on_h, triangle })
    })?;
    let n = ens.items.len();
    let label = format!("{name} under {}", model_label(&model));
    let cols = transpose(&ens.items, 1);
    let mut out = ExperimentOutput { dropped_paths: ens.dropped, ..Default::default() };
    out.extend(halving_rows(ctx, &label, &cols[0]));
    let worst_constant = ens.items.iter().fold(0.0_f64, |m, r| m.max(r.constant));
    out.push(TestReport::exact(format!("constant path X = {CONSTANT}, a = {LEVEL}: residual"), 0.0, worst_constant, n));
    out.push(zero_count(format!("{label}: nonzero residual on H"), ens.items.iter().map(|r| r.on_h).sum(), n));
    if form == TanakaForm::Abs {
        out.push(zero_count(
            "residual_abs > residual_plus + residual_minus",
            ens.items.iter().map(|r| r.triangle).sum(),
            n,
        ));
    }
    Ok(out)
}

pub fn tanaka_abs(ctx: &Ctx) -> Result<ExperimentOutput> {
    tanaka(ctx, TanakaForm::Abs, "|X - a|")
}

pub fn tanaka_plus(ctx: &Ctx) -> Result<ExperimentOutput> {
    tanaka(ctx, TanakaForm::Plus, "(X - a)^+")
}

pub fn tanaka_minus(ctx: &Ctx) -> Result<ExperimentOutput> {
    tanaka(ctx, TanakaForm::Minus, "(X - a)^-")
}

const ITO_FUNCTIONS: [(ItoFunction, &str); 3] =
    [(ItoFunction::Linear, "F(x) = x"), (ItoFunction::Square, "F(x) = x^2"), (ItoFunction::Cos, "F(x) = cos x")];

pub fn ito(ctx: &Ctx) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let grid = ctx.grid()?;
    let model = s.density.unwrap_or(ERF_SIGN);
    let ens = run_paths(ctx, s.n_paths, &grid, |i, g| {
        let r = refinements(ctx, &model, i, g)?;
        let mut sup = vec![Vec::new(); ITO_FUNCTIONS.len()];
        let mut on_h = 0;
        for (x, zs) in &r.levels {
            for (c, (f, _)) in ITO_FUNCTIONS.iter().enumerate() {
                let gap = ito_residual_path(f, x, zs)?;
                sup[c].push(gap.values().iter().fold(0.0_f64, |m, v| m.max(*v)));
                on_h += zs.h_indices().iter().filter(|&&h| gap.get(h) != 0.0).count();
            }
        }
        let (x, zs) = &r.levels[FACTORS.len() - 1];
        let c = Path::constant(*x.grid(), CONSTANT);
        let constant = ITO_FUNCTIONS
            .iter()
            .map(|(f, _)| ito_residual(f, &c, zs))
            .collect::<sigma_core::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0_f64, f64::max);
        Ok(PathResiduals { sup, constant, on_h, triangle: 0 })
    })?;
    let n = ens.items.len();
    let cols = transpose(&ens.items, ITO_FUNCTIONS.len());
    let mut out = ExperimentOutput { dropped_paths: ens.dropped, ..Default::default() };
    for (c, (f, name)) in ITO_FUNCTIONS.iter().enumerate() {
        let label = format!("{name} under {}", model_label(&model));
        match f {
            ItoFunction::Linear | ItoFunction::Square => out.push(floor_row(ctx, &label, &cols[c])),
            ItoFunction::Cos => out.extend(halving_rows(ctx, &label, &cols[c])),
        }
    }
    let worst_constant = ens.items.iter().fold(0.0_f64, |m, r| m.max(r.constant));
    out.push(TestReport::exact(format!("constant path X = {CONSTANT}: residual for every F"), 0.0, worst_constant, n));
    out.push(zero_count("nonzero residual on H for any F", ens.items.iter().map(|r| r.on_h).sum(), n));
    Ok(out)
}
