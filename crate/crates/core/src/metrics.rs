// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Run metrics, derived from a trace alone so that a replayed trace reproduces them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ccc::MsgKind;
use crate::trace::{meta_of, TraceRow};
use crate::types::{ChainId, Tick, TxId};
use crate::verdict::{check_agreement, check_weak_agreement, AgreementVerdict};

pub const METRICS_SCHEMA: &str = "trustboost-metrics/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub agreement: bool,
    pub agreement_detail: AgreementVerdict,
    pub validity: bool,
    pub termination: bool,
    /// Transactions committed by some processes but not others.
    pub commit_spread: Vec<TxId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub schema: String,
    pub protocol: String,
    pub m: usize,
    pub f: usize,
    pub seed: u64,
    /// Per process: committed every expected transaction.
    pub decided: BTreeMap<String, bool>,
    /// Views used up to the last decision (view protocol only).
    pub views_used: Option<u64>,
    pub views_per_decision: Vec<u64>,
    pub decisions: u64,
    /// Worst submit-to-commit latency over expected transactions and processes.
    pub ticks_to_commit: Option<Tick>,
    pub message_counts: BTreeMap<String, u64>,
    pub total_messages: u64,
    pub messages_per_decision: Option<f64>,
    pub dropped_messages: u64,
    pub verdicts: Verdicts,
    pub invariant_violations: u64,
    pub end_tick: Tick,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<String>,
}

impl RunMetrics {
    pub fn all_ok(&self) -> bool {
        self.verdicts.agreement && self.verdicts.validity && self.verdicts.termination && self.invariant_violations == 0
    }
}

/// Derives metrics from trace rows. Panics if the rows lack a header.
pub fn metrics_from_trace(rows: &[TraceRow]) -> RunMetrics {
    let meta = meta_of(rows).expect("trace has a header");
    let honest = |c: ChainId| meta.honest.get(c.index()).copied().unwrap_or(false);
    let mut counts: BTreeMap<String, u64> = MsgKind::ALL.iter().map(|k| (k.to_string(), 0)).collect();
    let mut submitted: BTreeMap<TxId, Tick> = BTreeMap::new();
    let mut commits: Vec<BTreeMap<TxId, Tick>> = vec![BTreeMap::new(); meta.processes as usize];
    let mut logs: Vec<Vec<TxId>> = vec![Vec::new(); meta.m];
    let mut decides: Vec<BTreeMap<u64, (u64, TxId)>> = vec![BTreeMap::new(); meta.m];
    let mut max_view = 0;
    let (mut dropped, mut violations, mut end_tick) = (0, 0, 0);
    for row in rows {
        match row {
            TraceRow::Submit { tick, tx, .. } => {
                submitted.entry(*tx).or_insert(*tick);
            }
            TraceRow::Send { kind, .. } => *counts.entry(kind.to_string()).or_default() += 1,
            TraceRow::Drop { .. } => dropped += 1,
            TraceRow::Commit { tick, process, tx } => {
                commits[process.0 as usize].entry(*tx).or_insert(*tick);
            }
            TraceRow::Block { chain, txs, .. } if honest(*chain) => logs[chain.index()].extend(txs),
            TraceRow::Decide {
                chain, slot, view, tx, ..
            } if honest(*chain) => {
                decides[chain.index()].insert(*slot, (*view, *tx));
            }
            TraceRow::EnterView { chain, view, .. } if honest(*chain) => max_view = max_view.max(*view),
            TraceRow::Violation { .. } => violations += 1,
            TraceRow::End { tick, .. } => end_tick = *tick,
            _ => {}
        }
    }

    let commit_sets: Vec<BTreeSet<TxId>> = commits.iter().map(|c| c.keys().copied().collect()).collect();
    let view_protocol = meta.protocol == "trustboost-view";
    let (agreement_detail, commit_spread) = if meta.protocol == "lite" {
        let pairs: BTreeSet<(TxId, TxId)> = meta.conflicts.iter().copied().collect();
        let report = check_weak_agreement(&commit_sets, |a, b| pairs.contains(&(a, b)) || pairs.contains(&(b, a)));
        (report.verdict, report.symmetric_difference.into_iter().collect())
    } else {
        let honest_logs: Vec<&Vec<TxId>> = logs
            .iter()
            .enumerate()
            .filter(|(i, _)| honest(ChainId(*i as u32)))
            .map(|(_, l)| l)
            .collect();
        let mut verdict = check_agreement(&honest_logs);
        if view_protocol && verdict.is_ok() {
            let seqs: Vec<Vec<TxId>> = decides
                .iter()
                .map(|d| d.values().map(|(_, tx)| *tx).collect())
                .collect();
            verdict = check_agreement(&seqs);
        }
        let union: BTreeSet<TxId> = commit_sets.iter().flatten().copied().collect();
        let spread = union
            .into_iter()
            .filter(|t| commit_sets.iter().any(|s| !s.contains(t)))
            .collect();
        (verdict, spread)
    };

    let honest_outputs = logs
        .iter()
        .flatten()
        .chain(decides.iter().flat_map(|d| d.values().map(|(_, t)| t)))
        .chain(commit_sets.iter().flatten());
    let validity = honest_outputs.into_iter().all(|t| submitted.contains_key(t));

    let decided: BTreeMap<String, bool> = commit_sets
        .iter()
        .enumerate()
        .map(|(p, set)| (format!("p{p}"), meta.expected.iter().all(|t| set.contains(t))))
        .collect();
    let termination = decided.values().all(|d| *d);

    let ticks_to_commit = if termination && !meta.expected.is_empty() {
        meta.expected
            .iter()
            .map(|t| {
                let start = submitted.get(t).copied().unwrap_or(0);
                commits.iter().map(|c| c[t] - start).max().unwrap_or(0)
            })
            .max()
    } else {
        None
    };

    // view in which each slot was decided, over honest chains
    let mut slot_views: BTreeMap<u64, u64> = BTreeMap::new();
    for d in &decides {
        for (slot, (view, _)) in d {
            let v = slot_views.entry(*slot).or_insert(*view);
            *v = (*v).min(*view);
        }
    }
    let mut views_per_decision = Vec::new();
    let mut start = 0;
    for view in slot_views.values() {
        views_per_decision.push(view + 1 - start.min(*view));
        start = view + 1;
    }
    let views_used = view_protocol.then(|| match slot_views.values().last() {
        Some(v) => v + 1,
        None => max_view + 1,
    });

    let decisions = if view_protocol {
        slot_views.len() as u64
    } else if meta.protocol == "lite" {
        commit_sets.iter().flatten().collect::<BTreeSet<_>>().len() as u64
    } else {
        logs.iter().map(|l| l.len() as u64).max().unwrap_or(0)
    };
    let total_messages: u64 = counts.values().sum();

    RunMetrics {
        schema: METRICS_SCHEMA.to_string(),
        protocol: meta.protocol.clone(),
        m: meta.m,
        f: meta.f,
        seed: meta.seed,
        decided,
        views_used,
        views_per_decision,
        decisions,
        ticks_to_commit,
        message_counts: counts,
        total_messages,
        messages_per_decision: (decisions > 0).then(|| total_messages as f64 / decisions as f64),
        dropped_messages: dropped,
        verdicts: Verdicts {
            agreement: agreement_detail.is_ok(),
            agreement_detail,
            validity,
            termination,
            commit_spread,
        },
        invariant_violations: violations,
        end_tick,
        trace_path: None,
    }
}
