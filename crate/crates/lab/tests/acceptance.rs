//! Acceptance criteria at their stated scales. Prints one PASS/FAIL line
//! per criterion. A failing criterion is reported, not fatal; the target
//! exits nonzero only when a criterion could not be evaluated.
//!
//! `SIGMA_ACCEPTANCE_SCALE=fast` runs criteria 1-11 at the fast suite's
//! scale instead of the full one.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sigma_core::ensemble::Workers;
use sigma_lab::config::{resolve, ExperimentConfig, Suite, DEFAULT_SEED};
use sigma_lab::registry::lookup;
use sigma_lab::report::ReportRow;
use sigma_lab::runner::{execute, run_all};

const RUNTIME_LIMIT_SECONDS: f64 = 600.0;

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    errored: bool,
    detail: String,
}

fn run_experiment(name: &str, suite: Suite, workers: &Workers) -> Result<(Vec<ReportRow>, f64), String> {
    let exp = lookup(name).map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig { experiment: Some(name.into()), master_seed: Some(DEFAULT_SEED), ..Default::default() };
    let settings = resolve(&cfg, exp, Some(suite)).map_err(|e| e.to_string())?;
    let r = execute(exp, &settings, workers).map_err(|e| e.to_string())?;
    Ok((r.rows, r.seconds))
}

fn describe(rows: &[ReportRow]) -> String {
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
    let n = rows.first().map_or(0, |r| r.n_paths);
    if failed.is_empty() {
        format!("{}/{} checks, n={n}", rows.len(), rows.len())
    } else {
        format!("{}/{} checks, n={n}; failing: {}", rows.len() - failed.len(), rows.len(), failed.join(" | "))
    }
}

/// Every row of every listed experiment passes.
fn experiments(names: &[&str], suite: Suite, workers: &Workers) -> Outcome {
    let (mut pass, mut errored) = (true, false);
    let mut parts = Vec::new();
    for name in names {
        match run_experiment(name, suite, workers) {
            Ok((rows, secs)) => {
                pass &= rows.iter().all(|r| r.pass);
                parts.push(format!("{name} {} in {secs:.1}s", describe(&rows)));
            }
            Err(e) => {
                (pass, errored) = (false, true);
                parts.push(format!("{name} error: {e}"));
            }
        }
    }
    Outcome { pass, errored, detail: parts.join("; ") }
}

fn passage_law(suite: Suite, workers: &Workers) -> Outcome {
    match run_experiment("passage-eq4", suite, workers) {
        Ok((rows, secs)) => {
            let main = rows.first();
            let within = rows.iter().all(|r| r.pass);
            let fast_enough = secs <= RUNTIME_LIMIT_SECONDS;
            let est = main.map_or(String::new(), |r| {
                format!("estimate {:.4} target {:.4} tol {:.4}", r.estimate, r.target, r.tolerance)
            });
            Outcome {
                pass: within && fast_enough,
                errored: false,
                detail: format!("passage-eq4 {est}, {}, runtime {secs:.1}s (limit {RUNTIME_LIMIT_SECONDS}s)", describe(&rows)),
            }
        }
        Err(e) => Outcome { pass: false, errored: true, detail: format!("passage-eq4 error: {e}") },
    }
}

/// All files below `dir` except timing files, keyed by relative path.
fn outputs(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let Ok(entries) = fs::read_dir(dir) else { return };
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                walk(root, &p, out);
            } else if p.file_name().is_some_and(|n| n != "timing.csv") {
                let bytes = fs::read(&p).unwrap_or_default();
                out.insert(p.strip_prefix(root).unwrap_or(&p).to_path_buf(), bytes);
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn fast_suite(threads: usize, out: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let workers = Workers::new(threads).map_err(|e| e.to_string())?;
    let base = ExperimentConfig { master_seed: Some(DEFAULT_SEED), out_dir: Some(out.to_path_buf()), ..Default::default() };
    run_all(Suite::Fast, &base, &workers).map_err(|e| e.to_string())?;
    Ok(outputs(out))
}

fn first_difference(a: &BTreeMap<PathBuf, Vec<u8>>, b: &BTreeMap<PathBuf, Vec<u8>>) -> Option<String> {
    if a.keys().ne(b.keys()) {
        return Some("different file sets".into());
    }
    a.iter().find(|(k, v)| b[*k] != **v).map(|(k, _)| k.display().to_string())
}

fn reproducibility() -> Outcome {
    let Ok(tmp) = tempfile::tempdir() else {
        return Outcome { pass: false, errored: true, detail: "cannot create a temporary directory".into() };
    };
    let runs = [(1, "first"), (1, "second"), (8, "eight")];
    let mut trees = Vec::new();
    for (threads, label) in runs {
        match fast_suite(threads, &tmp.path().join(label)) {
            Ok(t) => trees.push(t),
            Err(e) => return Outcome { pass: false, errored: true, detail: format!("fast suite error: {e}") },
        }
    }
    let files = trees[0].len();
    let repeat = first_difference(&trees[0], &trees[1]);
    let threads = first_difference(&trees[0], &trees[2]);
    let detail = format!(
        "fast suite, {files} files compared; repeat: {}; 1 vs 8 workers: {}",
        repeat.as_deref().map_or("identical".into(), |f| format!("differs at {f}")),
        threads.as_deref().map_or("identical".into(), |f| format!("differs at {f}")),
    );
    Outcome { pass: files > 0 && repeat.is_none() && threads.is_none(), errored: false, detail }
}

fn main() {
    let suite = match std::env::var("SIGMA_ACCEPTANCE_SCALE").as_deref() {
        Ok("fast") => Suite::Fast,
        _ => Suite::Full,
    };
    let workers = Workers::new(0).expect("worker pool");
    let criteria: Vec<Criterion> = vec![
        ("1 probability-case passage law", Box::new(|| passage_law(suite, &workers))),
        ("2 signed passage law with paired constant run", Box::new(|| experiments(&["passage-s32"], suite, &workers))),
        ("3 martingale characterization flatness", Box::new(|| experiments(&["t1-characterization"], suite, &workers))),
        ("4 second-class characterization flatness", Box::new(|| experiments(&["sigma-s-characterization"], suite, &workers))),
        ("5 rho algebra", Box::new(|| experiments(&["rho-algebra"], suite, &workers))),
        (
            "6 Tanaka and Ito convergence",
            Box::new(|| experiments(&["tanaka-abs", "tanaka-plus", "tanaka-minus", "ito"], suite, &workers)),
        ),
        ("7 Doob maximal identity", Box::new(|| experiments(&["doob-maximal"], suite, &workers))),
        ("8 law of A_inf", Box::new(|| experiments(&["a-infinity"], suite, &workers))),
        ("9 Levy-type corollary", Box::new(|| experiments(&["levy-eq5"], suite, &workers))),
        ("10 membership suite", Box::new(|| experiments(&["membership"], suite, &workers))),
        ("11 zero-set geometry", Box::new(|| experiments(&["zero-set"], suite, &workers))),
        ("12 reproducibility", Box::new(reproducibility)),
    ];
    let (mut failed, mut errored) = (0, false);
    for (name, check) in &criteria {
        let o = check();
        failed += usize::from(!o.pass);
        errored |= o.errored;
        println!("{}  criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if errored {
        std::process::exit(1);
    }
}
