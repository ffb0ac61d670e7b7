// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Message-count scaling over the number of chains.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use trustboost_core::{simulate, NameOp, Payload, Protocol, RunMetrics, SimConfig, WorkItem};

pub const SWEEP_SCHEMA: &str = "trustboost-sweep/1";
/// Largest tolerated spread of `count / m^2` across the sweep.
pub const QUADRATIC_BAND: f64 = 0.15;
/// Reference deployment: messages per request at 4 and 10 chains.
pub const REFERENCE_COUNTS: (u64, u64) = (102, 738);
pub const TREND_TOLERANCE: f64 = 0.20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SweepError {
    #[error("m values must be at least 2 (got {0})")]
    TooFewChains(usize),
    #[error("no m values given")]
    Empty,
    #[error("repetitions must be at least 1")]
    NoReps,
    #[error("cannot parse m list {0:?}")]
    Parse(String),
}

pub fn parse_m_list(text: &str) -> Result<Vec<usize>, SweepError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| SweepError::Parse(text.to_string()))
        })
        .collect()
}

/// Honest view-protocol run deciding one name registration.
pub fn honest_config(m: usize, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::new(Protocol::TrustboostView, m, (m - 1) / 3);
    cfg.seed = seed;
    cfg.workload = vec![WorkItem::new(
        0,
        0,
        Payload::Name(NameOp::Buy {
            name: "alice.eth".into(),
            owner: "alice".into(),
        }),
    )];
    cfg
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub m: usize,
    pub f: usize,
    pub reps: u64,
    pub mean_messages: f64,
    pub mean_ticks_to_commit: Option<f64>,
    /// `mean_messages / m^2`.
    pub ratio: f64,
    pub all_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadraticFit {
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `(max - min) / max`.
    pub spread: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrendCheck {
    pub reference: f64,
    pub ours: f64,
    pub quadratic: f64,
    pub relative_gap: f64,
    pub within_tolerance: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub schema: &'static str,
    pub seed_base: u64,
    pub points: Vec<SweepPoint>,
    /// Absent for a single point.
    pub fit: Option<QuadraticFit>,
    /// Present when the sweep covers both 4 and 10 chains.
    pub trend: Option<TrendCheck>,
}

impl SweepReport {
    pub fn all_ok(&self) -> bool {
        self.points.iter().all(|p| p.all_ok)
    }
}

pub fn sweep(ms: &[usize], reps: u64, seed_base: u64) -> Result<SweepReport, SweepError> {
    if ms.is_empty() {
        return Err(SweepError::Empty);
    }
    if reps == 0 {
        return Err(SweepError::NoReps);
    }
    if let Some(&m) = ms.iter().find(|m| **m < 2) {
        return Err(SweepError::TooFewChains(m));
    }
    let jobs: Vec<(usize, u64)> = ms
        .iter()
        .flat_map(|&m| (0..reps).map(move |r| (m, seed_base + r)))
        .collect();
    let runs: Vec<(usize, RunMetrics)> = jobs
        .par_iter()
        .map(|&(m, seed)| {
            (
                m,
                simulate(honest_config(m, seed)).expect("sweep config is valid").metrics,
            )
        })
        .collect();

    let points: Vec<SweepPoint> = ms
        .iter()
        .map(|&m| {
            let mine: Vec<&RunMetrics> = runs.iter().filter(|(k, _)| *k == m).map(|(_, r)| r).collect();
            let n = mine.len() as f64;
            let mean_messages = mine.iter().map(|r| r.total_messages as f64).sum::<f64>() / n;
            let ticks: Vec<f64> = mine
                .iter()
                .filter_map(|r| r.ticks_to_commit)
                .map(|t| t as f64)
                .collect();
            SweepPoint {
                m,
                f: (m - 1) / 3,
                reps,
                mean_messages,
                mean_ticks_to_commit: (ticks.len() == mine.len()).then(|| ticks.iter().sum::<f64>() / n),
                ratio: mean_messages / (m * m) as f64,
                all_ok: mine.iter().all(|r| r.all_ok()),
            }
        })
        .collect();

    let fit = (points.len() > 1).then(|| {
        let min_ratio = points.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
        let max_ratio = points.iter().map(|p| p.ratio).fold(0.0, f64::max);
        let spread = (max_ratio - min_ratio) / max_ratio;
        QuadraticFit {
            min_ratio,
            max_ratio,
            spread,
            flagged: spread > QUADRATIC_BAND,
        }
    });
    let at = |m: usize| points.iter().find(|p| p.m == m).map(|p| p.mean_messages);
    let trend = match (at(4), at(10)) {
        (Some(small), Some(large)) => {
            let reference = REFERENCE_COUNTS.1 as f64 / REFERENCE_COUNTS.0 as f64;
            let ours = large / small;
            let relative_gap = (ours - reference).abs() / reference;
            Some(TrendCheck {
                reference,
                ours,
                quadratic: (10.0f64 / 4.0).powi(2),
                relative_gap,
                within_tolerance: relative_gap <= TREND_TOLERANCE,
            })
        }
        _ => None,
    };
    Ok(SweepReport {
        schema: SWEEP_SCHEMA,
        seed_base,
        points,
        fit,
        trend,
    })
}
