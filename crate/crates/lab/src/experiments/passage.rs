//! First-passage laws, the Doob maximal identity, the law of `A_∞` and
//! the Lévy-type identities. Infinite horizons are truncated; paths are
//! grown until their event is decided or the horizon is reached.

use sigma_core::balayage::shift;
use sigma_core::classes::Decomposition;
use sigma_core::density::DensityModel;
use sigma_core::identities::{
    a_infinity_check, doob_maximal_check, gbm_sup_outcome, grid_sup_outcome, levy_corollary_check, levy_outcome,
    outcome_estimate, paired_check, passage_estimate_check, passage_outcome, LambdaSpec, Outcome, PhiSpec, PhiStep,
};
use sigma_core::stats::{weighted_mean, McEstimate, TestReport};
use sigma_core::{Path, TimeGrid};

use super::characterization::{model_label, ERF_SIGN, STOPPED};
use crate::config::Construction;
use crate::error::Result;
use crate::sim::{
    density_min_steps, grow, martingale_driver, run_paths, weights, Ctx, Curve, CurvePoint, DensityDraw,
    ExperimentOutput, Weighting,
};

/// Grid allowance of the passage, `A_∞` and Lévy checks.
const GRID_ALLOWANCE: f64 = 0.02;
/// Extra KS allowance for the local-time estimator.
const KS_ALLOWANCE: f64 = 0.03;

const PHI_ONE: PhiSpec = PhiSpec::Constant { c: 1.0 };

fn step_table() -> PhiSpec {
    PhiSpec::Table {
        steps: vec![
            PhiStep { from: 0.0, value: Some(1.0) },
            PhiStep { from: 0.5, value: Some(2.0) },
            PhiStep { from: 1.0, value: None },
        ],
    }
}

fn never() -> PhiSpec {
    PhiSpec::Table { steps: vec![PhiStep { from: 0.0, value: None }] }
}

/// Draws the density and the martingale driver of path `i` on growing
/// prefixes of `grid` until `decide` settles.
fn grown<T>(
    ctx: &Ctx,
    model: &DensityModel,
    i: u64,
    grid: &TimeGrid,
    decide: impl Fn(&DensityDraw, &Path, bool) -> sigma_core::Result<Option<T>>,
) -> sigma_core::Result<T> {
    let min = density_min_steps(model, grid)?;
    grow(grid, min, |p, full| {
        let draw = DensityDraw::new(model, ctx.seed(i), p)?;
        let w = martingale_driver(ctx.seed(i), p);
        decide(&draw, &w, full)
    })
}

fn hypotheses_hold(d: &Decomposition) -> bool {
    d.flags.h_subset_zeros_of_x && d.flags.a_gbar_zero
}

/// Passage events of one path, one per `(φ, u)` case, observed from gbar.
struct PassagePath {
    outcomes: Vec<Outcome>,
    /// `(X_gbar, A_gbar)`.
    at_gbar: (f64, f64),
    /// `(X, A)` at the end of the observed window.
    at_end: (f64, f64),
    hypotheses: bool,
    terminal: f64,
}

fn passage_paths(
    ctx: &Ctx,
    model: &DensityModel,
    construction: &Construction,
    cases: &[(PhiSpec, Option<f64>)],
) -> Result<(Vec<PassagePath>, usize)> {
    let grid = ctx.grid()?;
    let ens = run_paths(ctx, ctx.settings.n_paths, &grid, |i, g| {
        grown(ctx, model, i, g, |draw, w, full| {
            let d = construction.build(w, &draw.zs)?;
            let (x, a) = (shift(&d.x, &draw.zs)?, shift(&d.a, &draw.zs)?);
            let outcomes: Vec<Outcome> =
                cases.iter().map(|(phi, u)| passage_outcome(x.values(), a.values(), phi, *u)).collect();
            Ok((full || outcomes.iter().all(Outcome::is_decided)).then(|| PassagePath {
                outcomes,
                at_gbar: (x.initial(), a.initial()),
                at_end: (x.terminal(), a.terminal()),
                hypotheses: hypotheses_hold(&d),
                terminal: draw.terminal(),
            }))
        })
    })?;
    Ok((ens.items, ens.dropped))
}

fn outcomes_of(paths: &[PassagePath], case: usize) -> Vec<Outcome> {
    paths.iter().map(|p| p.outcomes[case]).collect()
}

/// Whether `(X, A)` after gbar is a reflected Brownian motion with its
/// local time, up to Lévy's identity.
fn reflected_pair(c: &Construction) -> bool {
    matches!(
        c,
        Construction::LiftedReflected { stop_level: None } | Construction::Drawdown | Construction::AbsMartingale
    )
}

/// Bound on the chance that a path still open at the horizon crosses
/// later: the current excursion must reach `φ(A_T)` (probability
/// `X_T/φ(A_T)`), or a later excursion, begun at local time `l`, must
/// reach `φ(l)`; those arrive at rate `dl/φ(l)`.
fn excursion_bound(phi: &PhiSpec, (x, a): (f64, f64)) -> f64 {
    (x / phi.phi(a) + (phi.integral_inf() - phi.integral(a))).min(1.0)
}

fn hypothesis_note(r: TestReport, paths: &[PassagePath]) -> TestReport {
    let bad = paths.iter().filter(|p| !p.hypotheses).count();
    if bad == 0 {
        r
    } else {
        r.with_note(format!("H in zeros of X and A_gbar = 0 fail on {bad} paths"))
    }
}

fn describe(model: &DensityModel, construction: &Construction) -> String {
    format!("{}, {}", model_label(model), construction.label())
}

fn pprime_weights(paths: &[PassagePath]) -> Result<Vec<f64>> {
    let terminals: Vec<f64> = paths.iter().map(|p| p.terminal).collect();
    Ok(weights(Weighting::Pprime, &terminals)?)
}

pub fn passage_eq4(ctx: &Ctx) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let model = s.density.unwrap_or(DensityModel::ConstantOne);
    let construction = s.construction.unwrap_or(Construction::LiftedReflected { stop_level: None });
    let phi = s.phi.clone().unwrap_or(PHI_ONE);
    let u = s.u.unwrap_or(1.0);
    let (paths, dropped) = passage_paths(ctx, &model, &construction, &[(phi.clone(), Some(u)), (never(), Some(u))])?;
    let w = pprime_weights(&paths)?;
    let label = describe(&model, &construction);
    let mut out = ExperimentOutput { dropped_paths: dropped, ..Default::default() };
    let r = passage_estimate_check(
        &format!("{label}: P'(X > phi(A) before tau_u), u={u}"),
        &outcomes_of(&paths, 0),
        &w,
        &phi,
        Some(u),
        GRID_ALLOWANCE,
    )?;
    out.push(hypothesis_note(r, &paths));
    out.push(passage_estimate_check(
        &format!("{label}: phi = inf, u={u}"),
        &outcomes_of(&paths, 1),
        &w,
        &never(),
        Some(u),
        0.0,
    )?);
    Ok(out)
}

pub fn passage_eq3(ctx: &Ctx) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let model = s.density.unwrap_or(DensityModel::ConstantOne);
    let construction = s.construction.unwrap_or(Construction::LiftedReflected { stop_level: None });
    let mut phis = vec![s.phi.clone().unwrap_or_else(step_table)];
    if s.phi.is_none() {
        phis.push(PhiSpec::Exponential { a: 1.0 });
    }
    let cases: Vec<(PhiSpec, Option<f64>)> = phis.iter().map(|p| (p.clone(), None)).collect();
    let (paths, dropped) = passage_paths(ctx, &model, &construction, &cases)?;
    let w = pprime_weights(&paths)?;
    let label = describe(&model, &construction);
    let mut out = ExperimentOutput { dropped_paths: dropped, ..Default::default() };
    let bounded = reflected_pair(&construction);
    for (c, phi) in phis.iter().enumerate() {
        let outcomes: Vec<Outcome> = paths
            .iter()
            .map(|p| match p.outcomes[c] {
                o if o.is_decided() || !bounded => o,
                o => Outcome { undecided: o.undecided.min(excursion_bound(phi, p.at_end)), ..o },
            })
            .collect();
        let mut r = passage_estimate_check(
            &format!("{label}: P'(exists t >= gbar: X > phi(A)), phi={}", phi_label(phi)),
            &outcomes,
            &w,
            phi,
            None,
            GRID_ALLOWANCE,
        )?;
        if bounded {
            r = r.with_note("open paths bounded by the excursion rate of the reflected pair");
        }
        out.push(hypothesis_note(r, &paths));
    }
    Ok(out)
}

fn phi_label(phi: &PhiSpec) -> String {
    match phi {
        PhiSpec::Constant { c } => format!("{c}"),
        PhiSpec::Exponential { a } => format!("{a}e^z"),
        PhiSpec::Table { steps } => steps
            .iter()
            .map(|s| format!("{}@{}", s.value.map_or("inf".to_string(), |v| v.to_string()), s.from))
            .collect::<Vec<_>>()
            .join(";"),
    }
}

pub fn passage_eq2(ctx: &Ctx) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let model = s.density.unwrap_or(STOPPED);
    let construction = s.construction.unwrap_or(Construction::Drawdown);
    let phi = s.phi.clone().unwrap_or(PHI_ONE);
    let u = s.u.unwrap_or(2.0);
    let table = step_table();
    let (paths, dropped) = passage_paths(ctx, &model, &construction, &[(phi.clone(), Some(u)), (table.clone(), None)])?;
    let w = pprime_weights(&paths)?;
    let label = describe(&model, &construction);
    let mut out = ExperimentOutput { dropped_paths: dropped, ..Default::default() };
    let sides: Vec<f64> = paths.iter().map(|p| phi.m_u(p.at_gbar.1, p.at_gbar.0, u).min(1.0)).collect();
    let r = paired_check(
        &format!("{label}: P'(X > phi(A) on [gbar, gbar+tau_u]) - E'[M^u_gbar ^ 1], u={u}"),
        &outcomes_of(&paths, 0),
        &sides,
        &w,
        GRID_ALLOWANCE,
    )?;
    out.push(side_note(r, &sides, &w)?);
    let sides: Vec<f64> = paths
        .iter()
        .map(|p| (table.F_of(p.at_gbar.1) - table.f_of(p.at_gbar.1) * p.at_gbar.0).min(1.0))
        .collect();
    let r = paired_check(
        &format!("{label}: P'(exists t >= gbar: X > phi(A)) - E'[M_gbar ^ 1], phi={}", phi_label(&table)),
        &outcomes_of(&paths, 1),
        &sides,
        &w,
        GRID_ALLOWANCE,
    )?;
    out.push(side_note(r, &sides, &w)?);
    Ok(out)
}

fn side_note(r: TestReport, sides: &[f64], w: &[f64]) -> Result<TestReport> {
    let m = weighted_mean(sides, w)?;
    Ok(r.with_note(format!("right-hand side E'[M ^ 1] = {:.5}", m.mean)))
}

pub fn passage_s32(ctx: &Ctx) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let model = s.density.unwrap_or(ERF_SIGN);
    let construction = Construction::LiftedReflected { stop_level: None };
    let phi = s.phi.clone().unwrap_or(PHI_ONE);
    let u = s.u.unwrap_or(1.0);
    let cases = [(phi.clone(), Some(u))];
    let (signed, dropped) = passage_paths(ctx, &model, &construction, &cases)?;
    let (plain, dropped_plain) = passage_paths(ctx, &DensityModel::ConstantOne, &construction, &cases)?;
    let p_weights = vec![1.0; signed.len()];
    let label = describe(&model, &construction);
    let mut out = ExperimentOutput { dropped_paths: dropped + dropped_plain, ..Default::default() };
    let signed_outcomes = outcomes_of(&signed, 0);
    out.push(passage_estimate_check(
        &format!("{label}: P(X > phi(A) on [gbar, gbar+tau_u]), u={u}"),
        &signed_outcomes,
        &p_weights,
        &phi,
        Some(u),
        GRID_ALLOWANCE,
    )?);
    let plain_outcomes = outcomes_of(&plain, 0);
    let (a, ta) = outcome_estimate(&signed_outcomes, &p_weights)?;
    let (b, tb) = outcome_estimate(&plain_outcomes, &vec![1.0; plain.len()])?;
    let se = a.stderr.hypot(b.stderr);
    out.push(
        TestReport::new(
            format!("{label} vs D=1 with common random numbers: difference"),
            0.0,
            McEstimate::from_parts(a.n.min(b.n), a.mean - b.mean, se),
            2.0,
            0.0,
            ta + tb,
        )
        .with_note(format!("signed {:.5}, D=1 {:.5}", a.mean, b.mean)),
    );
    Ok(out)
}

/// Levels of the Doob maximal identity.
const DOOB_LEVELS: [f64; 3] = [1.5, 2.0, 3.0];

/// `{sup_{t >= gbar} X_t > a}` for `X = exp(W - t/2)` at each level, with
/// the grid-only indicator for comparison.
struct DoobPath {
    bridge: Vec<Outcome>,
    grid_only: Vec<Outcome>,
    x_gbar: f64,
    terminal: f64,
}

fn doob_paths(ctx: &Ctx, model: &DensityModel, levels: &[f64]) -> Result<(Vec<DoobPath>, usize)> {
    let grid = ctx.grid()?;
    let top = levels.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let ens = run_paths(ctx, ctx.settings.n_paths, &grid, |i, g| {
        grown(ctx, model, i, g, |draw, w, full| {
            let gb = draw.zs.gbar_index();
            let step = w.grid().step();
            let log_x: Vec<f64> = (gb..w.len()).map(|k| w.get(k) - 0.5 * w.grid().time(k)).collect();
            if !full && grid_sup_outcome(&log_x, top) != Outcome::YES {
                return Ok(None);
            }
            Ok(Some(DoobPath {
                bridge: levels.iter().map(|&a| gbm_sup_outcome(&log_x, a, step)).collect(),
                grid_only: levels.iter().map(|&a| grid_sup_outcome(&log_x, a)).collect(),
                x_gbar: log_x[0].exp(),
                terminal: draw.terminal(),
            }))
        })
    })?;
    Ok((ens.items, ens.dropped))
}

pub fn doob_maximal(ctx: &Ctx) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let models = s.density.map_or_else(|| vec![DensityModel::ConstantOne, ERF_SIGN], |m| vec![m]);
    let levels = s.levels.clone().unwrap_or_else(|| DOOB_LEVELS.to_vec());
    let mut out = ExperimentOutput::default();
    for model in &models {
        let label = model_label(model);
        let (paths, dropped) = doob_paths(ctx, model, &levels)?;
        out.dropped_paths += dropped;
        let terminals: Vec<f64> = paths.iter().map(|p| p.terminal).collect();
        let w = weights(Weighting::Pprime, &terminals)?;
        let column = |l: usize, grid_only: bool| -> Vec<Outcome> {
            paths.iter().map(|p| if grid_only { p.grid_only[l] } else { p.bridge[l] }).collect()
        };
        if *model == DensityModel::ConstantOne {
            for (l, &a) in levels.iter().enumerate() {
                let (est, trunc) = outcome_estimate(&column(l, false), &w)?;
                let (grid_est, _) = outcome_estimate(&column(l, true), &w)?;
                out.push(
                    TestReport::new(
                        format!("{label}: P(sup exp(W - t/2) > {a})"),
                        (1.0 / a).min(1.0),
                        est,
                        3.0,
                        GRID_ALLOWANCE,
                        trunc,
                    )
                    .with_note(format!("grid-only indicator {:.5}", grid_est.mean)),
                );
            }
        } else {
            let outcomes: Vec<Vec<Outcome>> = (0..levels.len()).map(|l| column(l, false)).collect();
            let x_gbar: Vec<f64> = paths.iter().map(|p| p.x_gbar).collect();
            out.extend(doob_maximal_check(&format!("{label}: P'(sup > a) vs E'[(X_gbar/a) ^ 1]"), &outcomes, &x_gbar, &w, &levels)?);
        }
        let floor = 0.999 * paths.iter().fold(f64::INFINITY, |m, p| m.min(p.x_gbar));
        let step = ctx.grid()?.step();
        let trivial: Vec<Outcome> =
            paths.iter().map(|p| gbm_sup_outcome(&[p.x_gbar.ln()], floor, step)).collect();
        let x_gbar: Vec<f64> = paths.iter().map(|p| p.x_gbar).collect();
        for r in doob_maximal_check(&format!("{label}: trivial level below every X_gbar,"), &[trivial], &x_gbar, &w, &[floor])? {
            out.push(TestReport::exact(r.name, 0.0, r.estimate.mean, r.estimate.n));
        }
    }
    Ok(out)
}

/// Survival points reported individually.
const SURVIVAL_POINTS: [f64; 3] = [0.5, 1.0, 2.0];
const CURVE_STEP: f64 = 0.05;
const CURVE_END: f64 = 3.0;

pub fn a_infinity(ctx: &Ctx) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let grid = ctx.grid()?;
    let models = s.density.map_or_else(|| vec![DensityModel::ConstantOne, ERF_SIGN], |m| vec![m]);
    let construction = s.construction.unwrap_or(Construction::LiftedReflected { stop_level: Some(1.0) });
    let lambda = s.lambda.unwrap_or(LambdaSpec::Constant { lambda: 1.0 });
    let stop = match construction {
        Construction::LiftedReflected { stop_level } => stop_level,
        _ => None,
    };
    let mut out = ExperimentOutput::default();
    for model in &models {
        let ens = run_paths(ctx, s.n_paths, &grid, |i, g| {
            grown(ctx, model, i, g, |draw, w, full| {
                let d = construction.build(w, &draw.zs)?;
                let stopped = stop.is_some_and(|level| d.x.terminal() >= level);
                Ok((stopped || full).then(|| (d.a.terminal(), f64::from(u8::from(!stopped)), draw.terminal())))
            })
        })?;
        out.dropped_paths += ens.dropped;
        let label = describe(model, &construction);
        let terminal_a: Vec<f64> = ens.items.iter().map(|e| e.0).collect();
        let open: Vec<f64> = ens.items.iter().map(|e| e.1).collect();
        let terminals: Vec<f64> = ens.items.iter().map(|e| e.2).collect();
        let w = weights(Weighting::Pprime, &terminals)?;
        let (rows, ks) = a_infinity_check(
            &format!("{label}: P'(A_inf > x)"),
            &terminal_a,
            &w,
            &lambda,
            &SURVIVAL_POINTS,
            GRID_ALLOWANCE,
            KS_ALLOWANCE,
            &open,
        )?;
        out.extend(rows);
        let trunc = open.iter().zip(&w).map(|(o, w)| o * w.abs()).sum::<f64>() / open.len() as f64;
        out.push(
            TestReport::at_most(
                format!("{label}: weighted KS distance to the A_inf law"),
                ks.statistic,
                ks.critical + KS_ALLOWANCE + trunc,
                terminal_a.len(),
            )
            .with_note(format!("critical {:.5} at n_eff {:.0}", ks.critical, ks.n_effective)),
        );
        let points = (0..=(CURVE_END / CURVE_STEP).round() as usize)
            .map(|j| {
                let x = j as f64 * CURVE_STEP;
                let ind: Vec<f64> = terminal_a.iter().map(|&a| f64::from(u8::from(a > x))).collect();
                let est = weighted_mean(&ind, &w)?;
                Ok(CurvePoint {
                    x,
                    target: lambda.survival(x),
                    estimate: est.mean,
                    ci_lo: est.mean - 1.96 * est.stderr,
                    ci_hi: est.mean + 1.96 * est.stderr,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.curves.push(Curve { name: format!("a-infinity-survival-{}", curve_slug(model)), points });
    }
    Ok(out)
}

fn curve_slug(model: &DensityModel) -> &'static str {
    match model {
        DensityModel::ConstantOne => "constant-one",
        DensityModel::StoppedBm { .. } => "stopped-bm",
        DensityModel::ErfSign { .. } => "erf-sign",
    }
}

/// Outcomes under each `φ` and the terminal density, per path.
type LevyPaths = Vec<(Vec<Outcome>, f64)>;

/// Lévy-type events of one path under each `φ`, with its terminal density.
fn levy_paths(
    ctx: &Ctx,
    model: &DensityModel,
    phis: &[PhiSpec],
    from: f64,
    u: f64,
) -> Result<(LevyPaths, usize)> {
    let grid = ctx.grid()?;
    let ens = run_paths(ctx, ctx.settings.n_paths, &grid, |i, g| {
        grown(ctx, model, i, g, |draw, w, full| {
            let outcomes: Vec<Outcome> =
                phis.iter().map(|phi| levy_outcome(w.values(), phi, from, u)).collect();
            Ok((full || outcomes.iter().all(Outcome::is_decided)).then(|| (outcomes, draw.terminal())))
        })
    })?;
    Ok((ens.items, ens.dropped))
}

fn levy(ctx: &Ctx, from: f64, extra: PhiSpec, extra_exact: bool) -> Result<ExperimentOutput> {
    let s = ctx.settings;
    let models = s.density.map_or_else(|| vec![DensityModel::ConstantOne, ERF_SIGN, STOPPED], |m| vec![m]);
    let phi = s.phi.clone().unwrap_or(PHI_ONE);
    let u = s.u.unwrap_or(if from > 0.0 { from + 1.0 } else { 1.0 });
    let phis = [phi.clone(), extra.clone()];
    let mut out = ExperimentOutput::default();
    let window = if from > 0.0 { format!("[T_{from}, T_{u}]") } else { format!("[0, T_{u}]") };
    for model in &models {
        let label = model_label(model);
        let (paths, dropped) = levy_paths(ctx, model, &phis, from, u)?;
        out.dropped_paths += dropped;
        let terminals: Vec<f64> = paths.iter().map(|p| p.1).collect();
        let q = weights(Weighting::Q, &terminals)?;
        let ones = vec![1.0; paths.len()];
        let q_one = weighted_mean(&ones, &q)?;
        out.push(TestReport::new(format!("{label}: Q(1) = D_0"), model.initial_value(), q_one, 3.0, 0.0, 0.0));
        for (c, p) in phis.iter().enumerate() {
            let outcomes: Vec<Outcome> = paths.iter().map(|e| e.0[c]).collect();
            let name = format!("{label}: Q(S - X <= phi(S) on {window}), phi={}", phi_label(p));
            if c == 1 && extra_exact {
                let (est, _) = outcome_estimate(&outcomes, &q)?;
                out.push(TestReport::exact(format!("{name}: equals estimated Q(1)"), q_one.mean, est.mean, paths.len()));
            }
            out.push(levy_corollary_check(&name, &outcomes, &q, model.initial_value(), p, from, u, GRID_ALLOWANCE)?);
        }
    }
    Ok(out)
}

/// `φ` so large that the drawdown condition always holds.
const HUGE_PHI: f64 = 1e12;

pub fn levy_eq5(ctx: &Ctx) -> Result<ExperimentOutput> {
    levy(ctx, 0.0, PhiSpec::Constant { c: HUGE_PHI }, true)
}

/// Lower end of the window of the restricted identity.
const LEVY_FROM: f64 = 0.1;

pub fn levy_eq6(ctx: &Ctx) -> Result<ExperimentOutput> {
    let from = ctx.settings.x_level.unwrap_or(LEVY_FROM);
    levy(ctx, from, step_table(), false)
}
