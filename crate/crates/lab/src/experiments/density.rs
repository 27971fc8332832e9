use sigma_core::density::DensityModel;
use sigma_core::stats::{weighted_mean, TestReport};

use super::{checkpoint_indices, column, flatness_rows, zero_count};
use crate::error::Result;
use crate::sim::{run_paths, Ctx, DensityDraw, ExperimentOutput};

/// Probability that `D` has a zero before its intrinsic time: the
/// driver hits the level `-offset` (or 0 from `start`).
pub(crate) fn zero_probability(model: &DensityModel) -> f64 {
    match *model {
        DensityModel::ConstantOne => 0.0,
        DensityModel::StoppedBm { start, stop_time } => libm::erfc(start / (2.0 * stop_time).sqrt()),
        DensityModel::ErfSign { offset, terminal_time } => libm::erfc(offset / (2.0 * terminal_time).sqrt()),
    }
}

struct ZeroStats {
    hit: f64,
    gamma_after_gbar: usize,
    gamma_order: usize,
    h_beyond_gbar: usize,
    d: Vec<f64>,
}

pub fn zero_set(ctx: &Ctx) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let grid = ctx.grid()?;
    let model = s.density.unwrap_or(DensityModel::StoppedBm { start: 1.0, stop_time: 1.0 });
    let cps = checkpoint_indices(&grid, &s.checkpoints);
    let ens = run_paths(ctx, s.n_paths, &grid, |i, g| {
        let draw = DensityDraw::new(&model, ctx.seed(i), g)?;
        let zs = &draw.zs;
        let gb = zs.gbar_index();
        let n = g.len();
        Ok(ZeroStats {
            hit: f64::from(u8::from(gb > 0)),
            gamma_after_gbar: (gb..n).filter(|&k| zs.gamma_index(k) != gb).count(),
            gamma_order: (0..n)
                .filter(|&k| zs.gamma_index(k) > k || (k > 0 && zs.gamma_index(k) < zs.gamma_index(k - 1)))
                .count(),
            h_beyond_gbar: zs.h_indices().iter().filter(|&&h| h > gb).count(),
            d: cps.iter().map(|&k| draw.d(k)).collect(),
        })
    })?;
    let n = ens.items.len();
    let ones = vec![1.0; n];
    let mut out = ExperimentOutput { dropped_paths: ens.dropped, ..Default::default() };
    let hits = column(&ens.items, |z| z.hit);
    out.push(TestReport::new(
        "P(gbar > 0)",
        zero_probability(&model),
        weighted_mean(&hits, &ones)?,
        3.0,
        0.01,
        0.0,
    ));
    let sum = |f: fn(&ZeroStats) -> usize| ens.items.iter().map(f).sum::<usize>();
    out.push(zero_count("gamma(gbar + s) != gbar", sum(|z| z.gamma_after_gbar), n));
    out.push(zero_count("gamma(t) > t or gamma decreasing", sum(|z| z.gamma_order), n));
    out.push(zero_count("H points beyond gbar", sum(|z| z.h_beyond_gbar), n));
    let d_rows: Vec<Vec<f64>> = ens.items.into_iter().map(|z| z.d).collect();
    out.extend(flatness_rows(&["E[D_t] flat".to_string()], &s.checkpoints, &d_rows, &ones)?);
    Ok(out)
}
