use sigma_core::balayage::{
    default_bandwidth, q_bracket as bracket, q_integral, q_local_time, rho, shift, Functional, Integrand,
};
use sigma_core::density::{DensityModel, ZeroSetInfo};
use sigma_core::stats::{weighted_mean, McEstimate, TestReport};
use sigma_core::{Path, TimeGrid};

use super::characterization::{model_label, ERF_SIGN};
use super::{checkpoint_indices, column, flatness_rows, zero_count};
use crate::error::Result;
use crate::sim::{martingale_driver, run_paths, Ctx, DensityDraw, ExperimentOutput};

const A: f64 = 1.5;
const B: f64 = -0.75;

fn pairs(grid: &TimeGrid) -> [(Functional, Functional); 3] {
    let bw = default_bandwidth(grid);
    [
        (Functional::RunningSup, Functional::QuadraticVariation),
        (Functional::Integral(Integrand::Sign { level: 0.0 }), Functional::LocalTime { level: 0.0, bandwidth: bw }),
        (Functional::Increment, Functional::Constant(2.0)),
    ]
}

#[derive(Default)]
struct AlgebraCounts {
    linearity: usize,
    positivity: usize,
    product: usize,
    defining: usize,
    null_on_h: usize,
    monotone: usize,
    unit: usize,
}

fn mismatches(u: &Path, v: &Path) -> usize {
    u.values().iter().zip(v.values()).filter(|(a, b)| a != b).count()
}

fn off_zero_on_h(u: &Path, zs: &ZeroSetInfo) -> usize {
    zs.h_indices().iter().filter(|&&h| u.get(h) != 0.0).count()
}

fn decreasing_after(u: &Path, from: usize) -> usize {
    u.values()[from..].windows(2).filter(|w| w[1] < w[0]).count()
}

fn algebra_counts(x: &Path, zs: &ZeroSetInfo) -> sigma_core::Result<AlgebraCounts> {
    let mut c = AlgebraCounts::default();
    let g = zs.gbar_index();
    let shifted = shift(x, zs)?;
    let first = usize::from(zs.contains(g));
    for (phi, psi) in pairs(x.grid()) {
        let (rp, rq) = (rho(&phi, x, zs)?, rho(&psi, x, zs)?);
        let lin = rho(&phi.clone().scale(A).plus(psi.clone().scale(B)), x, zs)?;
        let lin_parts = rp.zip_with(&rq, |p, q| A * p + B * q)?;
        c.linearity += mismatches(&lin, &lin_parts);
        let prod = rho(&phi.clone().times(psi.clone()), x, zs)?;
        c.product += mismatches(&prod, &rp.zip_with(&rq, |p, q| p * q)?);
        for sq in [phi.clone().times(phi.clone()), psi.clone().times(psi.clone())] {
            c.positivity += rho(&sq, x, zs)?.values().iter().filter(|v| **v < 0.0).count();
        }
        for (f, u) in [(&phi, &rp), (&psi, &rq)] {
            let v = f.apply(&shifted);
            c.defining += (first..v.len()).filter(|&k| u.get(g + k) != v.get(k)).count();
            c.null_on_h += off_zero_on_h(u, zs);
        }
    }
    for f in [Functional::QuadraticVariation, Functional::LocalTime { level: 0.0, bandwidth: 0.1 }] {
        c.positivity += rho(&f, x, zs)?.values().iter().filter(|v| **v < 0.0).count();
    }
    let qb = bracket(x, zs)?;
    let lt = q_local_time(x, 0.0, zs, default_bandwidth(x.grid()))?.path;
    c.null_on_h += off_zero_on_h(&q_integral(Integrand::Sign { level: 0.0 }, x, zs)?, zs)
        + off_zero_on_h(&qb, zs)
        + off_zero_on_h(&lt, zs);
    c.monotone += decreasing_after(&qb, g) + decreasing_after(&lt, g);
    let unit = rho(&Functional::Constant(1.0), x, zs)?;
    c.unit += (0..unit.len())
        .filter(|&k| unit.get(k) != if zs.contains(k) { 0.0 } else { 1.0 })
        .count();
    Ok(c)
}

pub fn rho_algebra(ctx: &Ctx) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let grid = ctx.grid()?;
    let ens = run_paths(ctx, s.n_paths, &grid, |i, g| {
        let draw = DensityDraw::new(&ERF_SIGN, ctx.seed(i), g)?;
        let x = martingale_driver(ctx.seed(i), g);
        Ok((algebra_counts(&x, &draw.zs)?, draw.zs.h_indices().len()))
    })?;
    let n = ens.items.len();
    let sum = |f: fn(&AlgebraCounts) -> usize| ens.items.iter().map(|(c, _)| f(c)).sum::<usize>();
    let zeros: usize = ens.items.iter().map(|(_, h)| h).sum();
    let note = format!("{n} paths under {}, {zeros} points of H in total", model_label(&ERF_SIGN));
    let mut out = ExperimentOutput { dropped_paths: ens.dropped, ..Default::default() };
    out.push(zero_count("linearity rho(a phi + b psi) = a rho(phi) + b rho(psi)", sum(|c| c.linearity), n).with_note(note));
    out.push(zero_count("positivity of rho on nonnegative functionals", sum(|c| c.positivity), n));
    out.push(zero_count("product rho(phi psi) = rho(phi) rho(psi)", sum(|c| c.product), n));
    out.push(zero_count("defining property rho(phi)_(gbar+t) = phi(shifted X)_t", sum(|c| c.defining), n));
    out.push(zero_count("rho, Q-integral, Q-bracket, Q-local time null on H", sum(|c| c.null_on_h), n));
    out.push(zero_count("Q-bracket and Q-local time non-decreasing after gbar", sum(|c| c.monotone), n));
    out.push(zero_count("rho(1) = 1 off H and 0 on H", sum(|c| c.unit), n));
    Ok(out)
}

struct BracketStats {
    at_one: f64,
    flat: Vec<f64>,
    null_on_h: usize,
    monotone: usize,
}

pub fn q_bracket(ctx: &Ctx) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let grid = ctx.grid()?;
    let cps = checkpoint_indices(&grid, &s.checkpoints);
    let t1 = grid.floor_index(1.0_f64.min(grid.horizon()));
    let mut out = ExperimentOutput::default();
    for model in [DensityModel::ConstantOne, ERF_SIGN] {
        let label = model_label(&model);
        let ens = run_paths(ctx, s.n_paths, &grid, |i, g| {
            let draw = DensityDraw::new(&model, ctx.seed(i), g)?;
            let w = martingale_driver(ctx.seed(i), g);
            let x = rho(&Functional::Increment, &w, &draw.zs)?;
            let qb = bracket(&x, &draw.zs)?;
            Ok(BracketStats {
                at_one: qb.get(t1),
                flat: cps.iter().map(|&k| draw.d(k) * (x.get(k) * x.get(k) - qb.get(k))).collect(),
                null_on_h: off_zero_on_h(&qb, &draw.zs),
                monotone: decreasing_after(&qb, draw.zs.gbar_index()),
            })
        })?;
        out.dropped_paths += ens.dropped;
        let n = ens.items.len();
        let ones = vec![1.0; n];
        if model == DensityModel::ConstantOne {
            let t = grid.time(t1);
            let at_one = column(&ens.items, |b| b.at_one);
            let mean = weighted_mean(&at_one, &ones)?;
            out.push(TestReport::new(format!("{label}: E[X]_t = t at t={t}"), t, mean, 3.0, 0.05, 0.0));
            let sd = mean.stderr * (n as f64).sqrt();
            let sd_est = McEstimate::from_parts(n, sd, sd / (2.0 * (n as f64 - 1.0)).sqrt());
            out.push(TestReport::new(
                format!("{label}: sd of realized bracket = sqrt(2 step t)"),
                (2.0 * grid.step() * t).sqrt(),
                sd_est,
                3.0,
                0.0,
                0.0,
            ));
        }
        let flat: Vec<Vec<f64>> = ens.items.iter().map(|b| b.flat.clone()).collect();
        out.extend(flatness_rows(&[format!("{label}: E[D_t (X_t^2 - [X]^Q_t)] flat")], &s.checkpoints, &flat, &ones)?);
        out.push(zero_count(
            format!("{label}: [X]^Q null on H"),
            ens.items.iter().map(|b| b.null_on_h).sum(),
            n,
        ));
        out.push(zero_count(
            format!("{label}: [X]^Q non-decreasing after gbar"),
            ens.items.iter().map(|b| b.monotone).sum(),
            n,
        ));
    }
    let constant = Path::constant(grid, 0.7);
    let qb = bracket(&constant, &ZeroSetInfo::empty(grid))?;
    out.push(TestReport::exact("constant path: [X]^Q = 0", 0.0, qb.values().iter().fold(0.0, |m, v| m.max(v.abs())), 1));
    Ok(out)
}
