use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sigma_lab::registry::REGISTRY;

fn lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigma-lab"))
        .args(args)
        .env("SIGMA_LAB_OUT", out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &["--paths", "300", "--step", "0.01"];

fn run_small(experiment: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--experiment", experiment];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    lab(&args, out)
}

#[test]
fn list_names_every_experiment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(&["list"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    for e in REGISTRY {
        assert!(text.lines().any(|l| l.starts_with(e.name)), "{} missing", e.name);
    }
}

#[test]
fn zero_paths_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(&["run", "--experiment", "zero-set", "--paths", "0"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n_paths"), "{}", stderr(&o));
}

#[test]
fn unknown_experiment_suggests_the_nearest_name() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(&["run", "--experiment", "tanaka-ab"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("did you mean `tanaka-abs`"), "{}", stderr(&o));
}

#[test]
fn unknown_suite_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(&["run-all", "--suite", "fsat"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(lab(&["--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn same_configuration_gives_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = run_small("zero-set", dir, &["--seed", "5"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for file in ["report.csv", "report.json"] {
        let (x, y) = (fs::read(a.join("zero-set").join(file)).unwrap(), fs::read(b.join("zero-set").join(file)).unwrap());
        assert_eq!(x, y, "{file} differs");
    }
    assert!(a.join("zero-set/timing.csv").exists());
}

#[test]
fn worker_count_does_not_change_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run_small("q-martingale", &a, &["--workers", "1"]).status.code(), Some(0));
    assert_eq!(run_small("q-martingale", &b, &["--workers", "4"]).status.code(), Some(0));
    let read = |d: &Path| fs::read(d.join("q-martingale/report.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn report_columns() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_small("zero-set", tmp.path(), &[]).status.code(), Some(0));
    let mut r = csv::Reader::from_path(tmp.path().join("zero-set/report.csv")).unwrap();
    let headers: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    for col in ["experiment", "check", "target", "estimate", "stderr", "tolerance", "z", "pass", "n_paths", "seed", "config_hash"] {
        assert!(headers.iter().any(|h| h == col), "missing column {col}");
    }
    let json: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("zero-set/report.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), r.records().count());
}

#[test]
fn toml_and_json_configs_load_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let toml_cfg = tmp.path().join("cfg.toml");
    fs::write(&toml_cfg, "experiment = \"zero-set\"\nn_paths = 200\nstep = 0.01\nmaster_seed = 3\n\n[density]\nkind = \"stopped_bm\"\nstart = 1.0\nstop_time = 1.0\n").unwrap();
    let json_cfg = tmp.path().join("cfg.json");
    fs::write(
        &json_cfg,
        r#"{"experiment": "zero-set", "n_paths": 200, "step": 0.01, "master_seed": 3, "density": {"kind": "stopped_bm", "start": 1.0, "stop_time": 1.0}}"#,
    )
    .unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert_eq!(lab(&["run", "--config", toml_cfg.to_str().unwrap()], &a).status.code(), Some(0));
    assert_eq!(lab(&["run", "--config", json_cfg.to_str().unwrap()], &b).status.code(), Some(0));
    let read = |d: &Path| fs::read(d.join("zero-set/report.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let o = lab(&["run", "--config", toml_cfg.to_str().unwrap(), "--paths", "150"], &c);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut r = csv::Reader::from_path(c.join("zero-set/report.csv")).unwrap();
    let rec = r.deserialize::<std::collections::HashMap<String, String>>().next().unwrap().unwrap();
    assert_eq!(rec["n_paths"].parse::<usize>().unwrap() + rec["dropped_paths"].parse::<usize>().unwrap(), 150);
}

#[test]
fn bad_configs_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown.toml", "experiment = \"zero-set\"\nbogus = 1\n"),
        ("knob.toml", "experiment = \"rho-algebra\"\nu = 2.0\n"),
        ("step.toml", "experiment = \"zero-set\"\nstep = 0.3\n"),
        ("phi.toml", "experiment = \"passage-eq4\"\n\n[phi]\nkind = \"constant\"\nc = -1.0\n"),
    ];
    for (name, text) in cases {
        let p = tmp.path().join(name);
        fs::write(&p, text).unwrap();
        let o = lab(&["run", "--config", p.to_str().unwrap()], tmp.path());
        assert_eq!(o.status.code(), Some(1), "{name}: {}", stderr(&o));
    }
}

#[test]
fn output_directory_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_small("rho-algebra", tmp.path(), &[]).status.code(), Some(0));
    assert!(tmp.path().join("rho-algebra/report.csv").exists());
}
