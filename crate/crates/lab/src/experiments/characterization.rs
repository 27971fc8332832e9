use sigma_core::classes::{characterization_process, sigma_s_characterization_process, TestFunction};
use sigma_core::density::{qp_martingale, DensityModel, MartingaleKind};
use sigma_core::stats::{flatness_test, weighted_mean, TestReport};

use super::{checkpoint_indices, flatness_rows, zero_count};
use crate::config::Construction;
use crate::error::Result;
use crate::sim::{
    expect_rejection, martingale_driver, run_paths, weights, Ctx, DensityDraw, ExperimentOutput, Weighting,
};

pub(crate) const STOPPED: DensityModel = DensityModel::StoppedBm { start: 1.0, stop_time: 1.0 };
pub(crate) const ERF_SIGN: DensityModel = DensityModel::ErfSign { offset: 1.0, terminal_time: 1.0 };

pub(crate) fn model_label(m: &DensityModel) -> String {
    match *m {
        DensityModel::ConstantOne => "D=1".into(),
        DensityModel::StoppedBm { start, stop_time } => format!("stopped BM({start},{stop_time})"),
        DensityModel::ErfSign { offset, terminal_time } => format!("erf-sign({offset},{terminal_time})"),
    }
}

/// Slope of the drifted negative control.
const DRIFT: f64 = 0.1;

/// Flatness of `D_t (F(A_t) - f(A_t) X_t)` for every density, construction
/// and `f`, plus a drifted negative control on the first combination.
fn characterization_suite(ctx: &Ctx, fs: &[TestFunction]) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let grid = ctx.grid()?;
    let models = s.density.map_or_else(|| vec![DensityModel::ConstantOne, STOPPED], |m| vec![m]);
    let constructions =
        s.construction.map_or_else(|| vec![Construction::Drawdown, Construction::AbsMartingale], |c| vec![c]);
    let cps = checkpoint_indices(&grid, &s.checkpoints);
    let mut out = ExperimentOutput::default();
    for (mi, model) in models.iter().enumerate() {
        let ens = run_paths(ctx, s.n_paths, &grid, |i, g| {
            let draw = DensityDraw::new(model, ctx.seed(i), g)?;
            let m = martingale_driver(ctx.seed(i), g);
            let mut row = Vec::with_capacity((constructions.len() * fs.len() + 1) * cps.len());
            for c in &constructions {
                let d = c.build(&m, &draw.zs)?;
                for f in fs {
                    let y = characterization_process(&d, f)?;
                    row.extend(cps.iter().map(|&k| draw.d(k) * y.get(k)));
                }
            }
            if mi == 0 {
                let first = row[..cps.len()].to_vec();
                row.extend(first.iter().zip(&cps).map(|(v, &k)| v + draw.d(k) * DRIFT * g.time(k)));
            }
            Ok(row)
        })?;
        out.dropped_paths += ens.dropped;
        let mut names: Vec<String> = constructions
            .iter()
            .flat_map(|c| fs.iter().map(move |f| format!("{}: {}, f={}", model_label(model), c.label(), f.label())))
            .collect();
        if mi == 0 {
            names.push("drifted".into());
        }
        let ones = vec![1.0; ens.items.len()];
        let mut rows = flatness_rows(&names, &s.checkpoints, &ens.items, &ones)?;
        if mi == 0 {
            let drifted = rows.pop().expect("drifted row");
            out.push(expect_rejection(
                drifted,
                format!("negative control: first process plus {DRIFT}t is not flat"),
            ));
        }
        out.extend(rows);
    }
    Ok(out)
}

pub fn t1_characterization(ctx: &Ctx) -> Result<ExperimentOutput> {
    characterization_suite(
        ctx,
        &[TestFunction::One, TestFunction::IndicatorBelow { c: 1.0 }, TestFunction::CappedIdentity { c: 1.0 }],
    )
}

pub fn r1_ui_martingale(ctx: &Ctx) -> Result<ExperimentOutput> {
    characterization_suite(ctx, &[TestFunction::IndicatorBelow { c: 1.0 }, TestFunction::IndicatorBelow { c: 0.5 }])
}

pub fn sigma_s_characterization(ctx: &Ctx) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let grid = ctx.grid()?;
    let models = s.density.map_or_else(|| vec![ERF_SIGN, DensityModel::ConstantOne], |m| vec![m]);
    let fs = [TestFunction::One, TestFunction::IndicatorBelow { c: 1.0 }, TestFunction::CappedIdentity { c: 1.0 }];
    let cps = checkpoint_indices(&grid, &s.checkpoints);
    let construction = Construction::LiftedReflected { stop_level: None };
    let mut out = ExperimentOutput::default();
    for model in &models {
        let ens = run_paths(ctx, s.n_paths, &grid, |i, g| {
            let draw = DensityDraw::new(model, ctx.seed(i), g)?;
            let m = martingale_driver(ctx.seed(i), g);
            let d = construction.build(&m, &draw.zs)?;
            let mut row = Vec::with_capacity((fs.len() + 1) * cps.len());
            for f in &fs {
                let y = sigma_s_characterization_process(&d, f, &draw.zs)?;
                row.extend(cps.iter().map(|&k| draw.d(k) * y.get(k)));
            }
            row.extend(cps.iter().map(|&k| draw.d(k) * d.n.get(k)));
            Ok(row)
        })?;
        out.dropped_paths += ens.dropped;
        let label = model_label(model);
        let mut names: Vec<String> = fs
            .iter()
            .map(|f| format!("{label}: {}, f={}", construction.label(), f.label()))
            .collect();
        names.push(format!("{label}: N of {}", construction.label()));
        let ones = vec![1.0; ens.items.len()];
        out.extend(flatness_rows(&names, &s.checkpoints, &ens.items, &ones)?);
    }
    Ok(out)
}

/// Shifted checkpoints for the `P'`-martingale check, as offsets from gbar.
const SHIFT_OFFSETS: [f64; 4] = [0.0, 0.25, 0.5, 1.0];

pub fn q_martingale(ctx: &Ctx) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let grid = ctx.grid()?;
    let cps = checkpoint_indices(&grid, &s.checkpoints);
    let offsets: Vec<usize> = SHIFT_OFFSETS.iter().map(|&t| grid.floor_index(t)).collect();
    let mut out = ExperimentOutput::default();
    for model in [DensityModel::ConstantOne, STOPPED, ERF_SIGN] {
        let label = model_label(&model);
        let reach = model.intrinsic_index(&grid)?.unwrap_or(0) + offsets[offsets.len() - 1];
        if reach > grid.n_steps() {
            return Err(crate::error::LabError::Config(format!(
                "q-martingale needs horizon >= intrinsic time + {}",
                SHIFT_OFFSETS[SHIFT_OFFSETS.len() - 1]
            )));
        }
        let ens = run_paths(ctx, s.n_paths, &grid, |i, g| {
            let draw = DensityDraw::new(&model, ctx.seed(i), g)?;
            let w = martingale_driver(ctx.seed(i), g);
            let expo = qp_martingale(MartingaleKind::Exponential, &w);
            let bm = qp_martingale(MartingaleKind::IndependentBm, &w);
            let mut row = Vec::with_capacity(3 * cps.len());
            row.extend(cps.iter().map(|&k| draw.d(k)));
            row.extend(cps.iter().map(|&k| draw.d(k) * expo.get(k)));
            row.extend(cps.iter().map(|&k| draw.d(k) * bm.get(k)));
            let gb = draw.zs.gbar_index();
            let shifted: Vec<f64> = offsets.iter().map(|&o| expo.get(gb + o)).collect();
            Ok((row, shifted, draw.terminal()))
        })?;
        out.dropped_paths += ens.dropped;
        let n = ens.items.len();
        let ones = vec![1.0; n];
        let terminals: Vec<f64> = ens.items.iter().map(|e| e.2).collect();
        let rows: Vec<Vec<f64>> = ens.items.iter().map(|e| e.0.clone()).collect();
        let names = [
            format!("{label}: E[D_t] flat"),
            format!("{label}: E[D_t exp(W_t - t/2)] flat"),
            format!("{label}: E[D_t W_t] flat"),
        ];
        out.extend(flatness_rows(&names, &s.checkpoints, &rows, &ones)?);

        let pprime = weights(Weighting::Pprime, &terminals)?;
        let shifted: Vec<Vec<f64>> =
            (0..offsets.len()).map(|c| ens.items.iter().map(|e| e.1[c]).collect()).collect();
        out.push(
            flatness_test(&SHIFT_OFFSETS, &shifted, &pprime)?
                .to_test_report(format!("{label}: E'[M_(gbar+t)] flat for M = exp(W - t/2)")),
        );

        let q = weights(Weighting::Q, &terminals)?;
        out.push(TestReport::new(
            format!("{label}: Q(1) = D_0"),
            model.initial_value(),
            weighted_mean(&ones, &q)?,
            3.0,
            0.0,
            0.0,
        ));
        if matches!(model, DensityModel::ErfSign { .. }) {
            let off = pprime.iter().filter(|&&w| w != 1.0).count();
            out.push(zero_count(format!("{label}: P' weights different from 1"), off, n));
        }
    }
    Ok(out)
}
