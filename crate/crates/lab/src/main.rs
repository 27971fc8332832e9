use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sigma_core::ensemble::Workers;
use sigma_lab::config::{ExperimentConfig, ShiftPolicy, Suite};
use sigma_lab::registry::REGISTRY;
use sigma_lab::runner::{self, exit, OUT_ENV};
use sigma_lab::Result;

#[derive(Parser)]
#[command(name = "sigma-lab", version, about = "Monte Carlo checks of stochastic calculus under signed measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the experiments and the identity each one checks.
    List,
    /// Run one experiment.
    Run {
        #[arg(long)]
        experiment: Option<String>,
        /// TOML or JSON configuration file; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        policy: Option<ShiftPolicy>,
        /// Worker threads; 0 means one per core.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run every experiment at the suite's scale.
    RunAll {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn list() {
    let width = REGISTRY.iter().map(|e| e.name.len()).max().unwrap_or(0);
    for e in REGISTRY {
        println!("{:width$}  {}", e.name, e.anchor);
    }
}

fn workers(n: Option<usize>) -> Result<Workers> {
    Ok(Workers::new(n.unwrap_or(0))?)
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::List => {
            list();
            Ok(exit::PASS)
        }
        Command::Run { experiment, config, paths, step, horizon, seed, out, policy, workers: w } => {
            let file = config.as_deref().map(ExperimentConfig::load).transpose()?.unwrap_or_default();
            let flags = ExperimentConfig {
                experiment,
                n_paths: paths,
                step,
                horizon,
                master_seed: seed,
                out_dir: out,
                policy,
                workers: w,
                ..Default::default()
            };
            let cfg = file.overlay(flags);
            let pool = workers(cfg.workers)?;
            let r = runner::run(&cfg, &pool)?;
            for row in &r.rows {
                println!("{}  {}  estimate {:.6}  target {:.6}", if row.pass { "PASS" } else { "FAIL" }, row.check, row.estimate, row.target);
            }
            Ok(r.exit_code())
        }
        Command::RunAll { suite, seed, out, workers: w } => {
            let base = ExperimentConfig { master_seed: seed, out_dir: out, ..Default::default() };
            let pool = workers(w)?;
            let outcome = runner::run_all(suite, &base, &pool)?;
            for s in &outcome.summary {
                println!("{:28} {:>5}/{:<5} {}", s.experiment, s.passed, s.checks, s.status);
            }
            Ok(outcome.exit_code)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::ERROR } else { exit::PASS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit::ERROR as u8)
        }
    }
}
