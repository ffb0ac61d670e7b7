// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{ArgGroup, Parser};
use serde::Serialize;
use trustboost_cli::commands::{self, Outcome, Status};
use trustboost_cli::sweep::{parse_m_list, sweep};

/// Deterministic simulator for cross-chain trust boosting.
#[derive(Debug, Parser)]
#[command(name = "trustboost", version)]
#[command(group(ArgGroup::new("mode").required(true).args(["config", "scenario", "sweep", "replay"])))]
struct Args {
    /// Scenario config (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for metrics, traces and reports.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides the config's seed; base seed for sweeps.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Built-in theory scenario (passive-split, passive-quorum, active-hybrid, active-hybrid-abc, relative-settlement).
    #[arg(long, value_name = "NAME")]
    scenario: Option<String>,
    /// Comma-separated chain counts, e.g. "4,7,10".
    #[arg(long, value_name = "LIST")]
    sweep: Option<String>,
    /// Repetitions per sweep point.
    #[arg(long, value_name = "N", default_value_t = 1)]
    reps: u64,
    /// Trace to re-derive metrics from.
    #[arg(long, value_name = "PATH")]
    replay: Option<PathBuf>,
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn execute(args: Args) -> Result<Status> {
    if let Some(path) = &args.config {
        let outcome = commands::run_config(path, &args.out, args.seed)?;
        match &outcome {
            Outcome::Run(m) => print(m)?,
            Outcome::Scenario(r) => print(r)?,
        }
        let status = outcome.status();
        if status == Status::Failed {
            if let Outcome::Run(m) = &outcome {
                eprintln!("verdicts: {}", serde_json::to_string(&m.verdicts)?);
                eprintln!("invariant violations: {}", m.invariant_violations);
            }
        }
        return Ok(status);
    }
    if let Some(name) = &args.scenario {
        let report = commands::scenario(name, &args.out)?;
        print(&report)?;
        return Ok(commands::scenario_status(&report));
    }
    if let Some(list) = &args.sweep {
        let report = sweep(&parse_m_list(list)?, args.reps, args.seed.unwrap_or(0))?;
        print(&report)?;
        if report.fit.as_ref().is_some_and(|f| f.flagged) {
            eprintln!("warning: message counts deviate from quadratic growth");
        }
        return Ok(if report.all_ok() { Status::Ok } else { Status::Failed });
    }
    let trace = args.replay.as_ref().expect("clap enforces one mode");
    let report = commands::replay(trace)?;
    print(&report)?;
    if report.matches_original == Some(false) {
        eprintln!("replayed metrics differ from the original run");
    }
    Ok(report.status())
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::Failed.code())
        }
    }
}
