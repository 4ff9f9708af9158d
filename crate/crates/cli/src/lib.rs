//! Batch driver: parses the command line and config file, runs one
//! experiment and writes `results.csv`, `summary.json` and optional charts.
//!
//! Exit codes: 0 success, 1 configuration error, 2 failed fit or check,
//! 3 I/O error.

pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod verify;

use std::ffi::OsString;

use clap::Parser;

use crate::config::{Cli, RunConfigFile, RunPlan, SEED_ENV};
use crate::error::{exit, CliError};
use crate::run::Outcome;

/// Runs the driver with `QPOL_SEED` taken from the process environment.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env_seed = std::env::var(SEED_ENV).ok();
    run_with_env(args, env_seed.as_deref())
}

/// Runs the driver with an explicit `QPOL_SEED` value; returns the exit code.
pub fn run_with_env<I, T>(args: I, env_seed: Option<&str>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::CONFIG
            } else {
                exit::SUCCESS
            };
        }
    };
    match drive(&cli, env_seed) {
        Ok(outcome) => {
            for line in &outcome.report {
                println!("{line}");
            }
            if outcome.passed {
                exit::SUCCESS
            } else {
                exit::CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("qpol: {e}");
            e.exit_code()
        }
    }
}

/// Resolves the plan for `cli` without running it.
pub fn plan(cli: &Cli, env_seed: Option<&str>) -> Result<RunPlan, CliError> {
    let file = match &cli.config {
        Some(path) => RunConfigFile::load(path).map_err(|e| match e {
            CliError::Io { path, source } => {
                CliError::config(format!("cannot read config {}: {source}", path.display()))
            }
            other => other,
        })?,
        None => RunConfigFile::default(),
    };
    RunPlan::resolve(cli, &file, env_seed)
}

/// Runs `plan` on its own worker pool when a thread count is given.
pub fn execute(plan: &RunPlan) -> Result<Outcome, CliError> {
    match plan.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config(format!("cannot start {n} worker threads: {e}")))?
            .install(|| run::execute(plan)),
        None => run::execute(plan),
    }
}

fn drive(cli: &Cli, env_seed: Option<&str>) -> Result<Outcome, CliError> {
    let plan = plan(cli, env_seed)?;
    let mut outcome = execute(&plan)?;
    let written = outcome.artifacts.write_all(&plan.output_dir)?;
    for path in written {
        outcome.report.push(format!("  wrote {}", path.display()));
    }
    Ok(outcome)
}
