// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Ledger-combiner confirmation by relative settlement, against TrustBoost-Lite in
//! the same run: three honest chains commit `tx`, and a Byzantine chain commits a
//! conflicting `tx'` that only some processes get to see.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chain::{Audience, BehaviorPolicy, LedgerObject, Script, ScriptAction, ScriptRule};
use crate::lite::{ConflictRelation, Outpoint, UtxoBody, UtxoOutput};
use crate::sim::{simulate, workload_transactions, Protocol, SimConfig, WorkItem};
use crate::trace::TraceRow;
use crate::types::{Asker, ChainId, Group, Payload, Tick, Transaction};

/// Relative settlement: `tx` is settled once a strict majority of chains show it and
/// no chain shows a conflicting transaction.
pub fn relative_settlement(
    chains: &[LedgerObject],
    tx: &Transaction,
    conflicts: &ConflictRelation,
    asker: Asker,
    now: Tick,
) -> bool {
    let logs: Vec<Vec<_>> = chains.iter().map(|c| c.visible_log(asker, now)).collect();
    let on = logs.iter().filter(|l| l.contains(&tx.id)).count();
    let rivals = conflicts.conflicting_with(tx.id);
    let contested = logs.iter().flatten().any(|id| rivals.contains(id));
    on > chains.len() / 2 && !contested
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinerVariant {
    /// `tx'` is visible to group X only.
    RevealedToX,
    /// No conflicting transaction exists.
    NoConflict,
    /// `tx'` is visible to everyone.
    RevealedToAll,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinerOutcome {
    pub variant: CombinerVariant,
    /// Whether each group settles `tx` under relative settlement.
    pub relative: BTreeMap<Group, bool>,
    /// Whether each group's lite check accepts `tx`.
    pub lite: BTreeMap<Group, bool>,
    /// Whether any process accepted `tx'` through the lite check.
    pub lite_accepts_conflict: bool,
    pub invariant_violations: u64,
}

pub fn combiner_counterexample(variant: CombinerVariant) -> CombinerOutcome {
    let spend = |owner: &str| {
        Payload::Utxo(UtxoBody {
            inputs: vec![Outpoint::genesis(0)],
            outputs: vec![UtxoOutput {
                owner: owner.into(),
                amount: 1,
            }],
        })
    };
    let mut cfg = SimConfig::new(Protocol::Lite, 4, 1);
    cfg.genesis_outputs = 1;
    cfg.horizon = 40;
    let mut tx = WorkItem::new(0, 0, spend("bob"));
    tx.targets = Some(vec![ChainId(0), ChainId(1), ChainId(2)]);
    cfg.workload = vec![tx];
    if variant != CombinerVariant::NoConflict {
        let mut rival = WorkItem::new(0, 1, spend("eve"));
        rival.targets = Some(vec![ChainId(3)]);
        rival.expected = false;
        cfg.workload.push(rival);
    }
    let txs = workload_transactions(&cfg.workload);
    let rules = match variant {
        CombinerVariant::RevealedToX => vec![ScriptRule {
            from: 0,
            audience: Audience::Y,
            action: ScriptAction::Hide {
                tx: txs[txs.len() - 1].id,
            },
        }],
        _ => Vec::new(),
    };
    cfg.behaviors[3] = BehaviorPolicy::Scripted(Script::new(rules));
    let out = simulate(cfg).expect("fixed scenario is valid");

    let conflicts = ConflictRelation::new(out.transactions.iter());
    let target = &out.transactions[0];
    let askers = [Asker::new(0, Group::X), Asker::new(1, Group::Y)];
    let relative = askers
        .iter()
        .map(|a| {
            (
                a.group,
                relative_settlement(&out.chains, target, &conflicts, *a, out.end_tick),
            )
        })
        .collect();
    let commits: Vec<_> = out
        .trace
        .iter()
        .filter_map(|r| match r {
            TraceRow::Commit { process, tx, .. } => Some((*process, *tx)),
            _ => None,
        })
        .collect();
    let lite = askers
        .iter()
        .map(|a| (a.group, commits.contains(&(a.process, target.id))))
        .collect();
    CombinerOutcome {
        variant,
        relative,
        lite,
        lite_accepts_conflict: commits.iter().any(|(_, t)| *t != target.id),
        invariant_violations: out.metrics.invariant_violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn both(map: &BTreeMap<Group, bool>) -> (bool, bool) {
        (map[&Group::X], map[&Group::Y])
    }

    #[test]
    fn hidden_conflict_splits_relative_settlement_only() {
        let o = combiner_counterexample(CombinerVariant::RevealedToX);
        assert_eq!(both(&o.relative), (false, true));
        assert_eq!(both(&o.lite), (true, true));
        assert!(!o.lite_accepts_conflict);
    }

    #[test]
    fn no_conflict_both_commit() {
        let o = combiner_counterexample(CombinerVariant::NoConflict);
        assert_eq!(both(&o.relative), (true, true));
        assert_eq!(both(&o.lite), (true, true));
    }

    #[test]
    fn public_conflict_blocks_relative_settlement() {
        let o = combiner_counterexample(CombinerVariant::RevealedToAll);
        assert_eq!(both(&o.relative), (false, false));
        assert_eq!(both(&o.lite), (true, true));
        assert!(!o.lite_accepts_conflict);
    }
}
