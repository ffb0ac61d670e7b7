// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use trustboost_core::theory::scenarios::{run_scenario, ScenarioReport};
use trustboost_core::trace::{meta_of, parse_trace};
use trustboost_core::{metrics_from_trace, simulate, RunMetrics, SimConfig};

use crate::config::{Plan, ScenarioConfig};

pub const METRICS_FILE: &str = "metrics.json";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const REPORT_FILE: &str = "report.json";

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    ExpectedViolation,
    Failed,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::ExpectedViolation => 2,
            Status::Failed => 1,
        }
    }
}

#[derive(Debug)]
pub enum Outcome {
    Run(Box<RunMetrics>),
    Scenario(Box<ScenarioReport>),
}

impl Outcome {
    pub fn status(&self) -> Status {
        match self {
            Outcome::Run(m) if m.all_ok() => Status::Ok,
            Outcome::Run(_) => Status::Failed,
            Outcome::Scenario(r) => scenario_status(r),
        }
    }
}

pub fn scenario_status(report: &ScenarioReport) -> Status {
    match (report.confirmed(), report.expects_violation) {
        (true, true) => Status::ExpectedViolation,
        (true, false) => Status::Ok,
        (false, _) => Status::Failed,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Runs a config file; `seed` overrides the file's seed.
pub fn run_config(path: &Path, out: &Path, seed: Option<u64>) -> Result<Outcome> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    match cfg.plan(base)? {
        Plan::Simulate(sim) => Ok(Outcome::Run(Box::new(run_sim(*sim, out)?))),
        Plan::Theory(name) => Ok(Outcome::Scenario(Box::new(scenario(&name, out)?))),
    }
}

/// Simulates and writes `metrics.json` and `trace.jsonl` into `out`.
pub fn run_sim(cfg: SimConfig, out: &Path) -> Result<RunMetrics> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let outcome = simulate(cfg)?;
    let trace_path = out.join(TRACE_FILE);
    fs::write(&trace_path, &outcome.trace_text).with_context(|| format!("writing {}", trace_path.display()))?;
    let mut metrics = outcome.metrics;
    metrics.trace_path = Some(trace_path.display().to_string());
    write_json(&out.join(METRICS_FILE), &metrics)?;
    Ok(metrics)
}

/// Runs a built-in theory scenario and writes `report.json` into `out`.
pub fn scenario(name: &str, out: &Path) -> Result<ScenarioReport> {
    let report = run_scenario(name)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_json(&out.join(REPORT_FILE), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplayReport {
    pub trace: PathBuf,
    pub metrics: RunMetrics,
    /// `Some` when a `metrics.json` sits next to the trace.
    pub matches_original: Option<bool>,
}

impl ReplayReport {
    pub fn status(&self) -> Status {
        if self.matches_original == Some(false) || !self.metrics.all_ok() {
            Status::Failed
        } else {
            Status::Ok
        }
    }
}

/// Re-derives metrics from a trace and compares them with the original run's.
pub fn replay(trace: &Path) -> Result<ReplayReport> {
    let text = fs::read_to_string(trace).with_context(|| format!("reading {}", trace.display()))?;
    let rows = parse_trace(&text).with_context(|| format!("replaying {}", trace.display()))?;
    if meta_of(&rows).is_none() {
        bail!("{}: trace has no header", trace.display());
    }
    let mut metrics = metrics_from_trace(&rows);
    let sibling = trace.with_file_name(METRICS_FILE);
    let matches_original = if sibling.exists() {
        let text = fs::read_to_string(&sibling).with_context(|| format!("reading {}", sibling.display()))?;
        let original: RunMetrics =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", sibling.display()))?;
        metrics.trace_path = original.trace_path.clone();
        Some(original == metrics)
    } else {
        None
    };
    Ok(ReplayReport {
        trace: trace.to_path_buf(),
        metrics,
        matches_original,
    })
}
