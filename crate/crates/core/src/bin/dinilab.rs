//! Command-line front end for the laboratory.
//!
//! One command, scenario-driven: `dinilab [SCENARIO] [flags]`. The
//! scenario comes from the positional argument, the `--scenario` flag, or
//! the config file, in that order of precedence. Exit codes: 0 all checks
//! pass, 1 at least one named criterion failed, 2 configuration error,
//! 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use dinilab::config::Config;
use dinilab::scenario::{run, write_artifacts, RunPlan, SCENARIOS};
use dinilab::Error;

#[derive(Parser, Debug)]
#[command(
    name = "dinilab",
    about = "Numerical laboratory for boundary expansions on Dini graph domains",
    after_help = format!("Scenarios: {}", SCENARIOS.join(", "))
)]
struct Args {
    /// Scenario to run (also settable via --scenario or the config file).
    scenario_pos: Option<String>,

    /// Configuration file (flat key = value with [section] headers).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for CSV/JSON artifacts.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Seed for randomized sweeps.
    #[arg(long)]
    seed: Option<u64>,

    /// Scenario name (positional argument wins when both are given).
    #[arg(long)]
    scenario: Option<String>,

    /// Print per-table previews in addition to the criterion lines.
    #[arg(long)]
    verbose: bool,
}

/// Accept a couple of obvious shorthands for scenario names.
fn canonical_scenario(name: &str) -> String {
    match name {
        "modulus" => "modulus-check".to_string(),
        "geometry" => "geometry-check".to_string(),
        other => other.to_string(),
    }
}

fn build_plan(args: &Args) -> Result<RunPlan, Error> {
    let mut cfg = match &args.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    if let Some(s) = args.scenario.as_ref().or(args.scenario_pos.as_ref()) {
        // Positional beats flag, flag beats config.
        let chosen = args.scenario_pos.as_ref().unwrap_or(s);
        cfg.set("scenario", &canonical_scenario(chosen));
    }
    if let Some(out) = &args.out {
        cfg.set("out", &out.display().to_string());
    }
    if let Some(seed) = args.seed {
        cfg.set("seed", &seed.to_string());
    }
    if args.verbose {
        cfg.set("verbose", "true");
    }
    RunPlan::from_config(&cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let plan = match build_plan(&args) {
        Ok(plan) => plan,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let arts = match run(&plan) {
        Ok(arts) => arts,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) => 2,
                _ => 3,
            };
            return ExitCode::from(code);
        }
    };

    for c in &arts.criteria {
        println!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    if plan.verbose {
        for t in &arts.tables {
            println!("--- {} ---", t.name);
            print!("{}", t.csv());
        }
        print!("{}", arts.summary.json());
    }

    match write_artifacts(&plan, &arts) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }

    let failed = arts.failed();
    if failed.is_empty() {
        println!("ok: {} criteria passed", arts.criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("failed: {} of {} criteria", failed.len(), arts.criteria.len());
        ExitCode::from(1)
    }
}
