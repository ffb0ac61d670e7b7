// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! One blockchain modeled as a shared ledger object with `submit`, `check` and `read`.
//!
//! An honest object keeps an append-only, publicly verifiable log and answers every
//! asker identically. A Byzantine object is an honest ledger wrapped in a
//! [`BehaviorPolicy`] that may rewrite its own answers and outgoing messages, never
//! another object's state.

mod behavior;
mod exec;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use behavior::{Audience, BehaviorPolicy, Script, ScriptAction, ScriptRule};
pub use exec::execute;

use crate::lite::Outpoint;
use crate::types::{Asker, BinaryValue, ChainId, Group, ProcessId, Tick, Transaction, TxId, ViewNumber};

/// Key under which binary-consensus objects keep their value.
pub const VALUE_KEY: &str = "value";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubmitAck {
    /// Queued; commits at the block boundary `ready_at`.
    Enqueued {
        ready_at: Tick,
    },
    /// Already pending or committed.
    Duplicate,
    /// Spends an outpoint already claimed by `by` on this chain.
    Conflict {
        by: TxId,
    },
    Crashed,
}

/// Answer to a `check` call. Honest chains attach the log position as attestation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckAnswer {
    pub committed: bool,
    pub attestation: Option<Attestation>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Attestation {
    pub chain: ChainId,
    pub position: usize,
}

/// Snapshot returned by `read`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadView {
    pub chain: ChainId,
    pub latest_committed: Option<TxId>,
    /// Log length at snapshot time.
    pub height: usize,
    pub state_snapshot: BTreeMap<String, String>,
}

#[derive(Clone, Debug)]
struct Pending {
    tx: Transaction,
    submitted_at: Tick,
    ready_at: Tick,
}

#[derive(Clone, Debug)]
pub struct LedgerObject {
    id: ChainId,
    log: Vec<Transaction>,
    positions: BTreeMap<TxId, usize>,
    state: BTreeMap<String, String>,
    behavior: BehaviorPolicy,
    block_interval: Tick,
    pending: Vec<Pending>,
    claimed: BTreeMap<Outpoint, TxId>,
    crashed: bool,
}

impl LedgerObject {
    pub fn new(id: ChainId, behavior: BehaviorPolicy, block_interval: Tick) -> Self {
        let crashed = matches!(behavior, BehaviorPolicy::Crash { at_view } if at_view == ViewNumber(0));
        LedgerObject {
            id,
            log: Vec::new(),
            positions: BTreeMap::new(),
            state: BTreeMap::new(),
            behavior,
            block_interval: block_interval.max(1),
            pending: Vec::new(),
            claimed: BTreeMap::new(),
            crashed,
        }
    }

    pub fn honest(id: ChainId) -> Self {
        Self::new(id, BehaviorPolicy::Honest, 1)
    }

    /// Seeds the contract store before any transaction executes.
    pub fn with_genesis_state(mut self, state: BTreeMap<String, String>) -> Self {
        self.state = state;
        self
    }

    pub fn id(&self) -> ChainId {
        self.id
    }

    pub fn behavior(&self) -> &BehaviorPolicy {
        &self.behavior
    }

    pub fn is_honest(&self) -> bool {
        self.behavior.is_honest()
    }

    pub fn is_crashed(&self) -> bool {
        self.crashed
    }

    pub fn block_interval(&self) -> Tick {
        self.block_interval
    }

    pub fn log(&self) -> &[Transaction] {
        &self.log
    }

    pub fn log_ids(&self) -> Vec<TxId> {
        self.log.iter().map(|t| t.id).collect()
    }

    pub fn state(&self) -> &BTreeMap<String, String> {
        &self.state
    }

    pub fn has_pending(&self) -> bool {
        !self.pending.is_empty()
    }

    pub fn contains(&self, id: TxId) -> bool {
        self.positions.contains_key(&id)
    }

    /// Applies a crash scheduled for `view`. Returns true if the object just crashed.
    pub fn enter_view(&mut self, view: ViewNumber) -> bool {
        if self.crashed {
            return false;
        }
        if let BehaviorPolicy::Crash { at_view } = self.behavior {
            if view >= at_view {
                self.crash();
                return true;
            }
        }
        false
    }

    pub fn crash(&mut self) {
        self.crashed = true;
        self.pending.clear();
    }

    /// First block boundary at or after `now + block_interval`.
    pub fn commit_boundary(&self, now: Tick) -> Tick {
        let earliest = now + self.block_interval;
        earliest.div_ceil(self.block_interval) * self.block_interval
    }

    pub fn is_block_boundary(&self, now: Tick) -> bool {
        now.is_multiple_of(self.block_interval)
    }

    pub fn local_submit(&mut self, tx: Transaction, now: Tick) -> SubmitAck {
        if self.crashed {
            return SubmitAck::Crashed;
        }
        if self.positions.contains_key(&tx.id) || self.pending.iter().any(|p| p.tx.id == tx.id) {
            return SubmitAck::Duplicate;
        }
        // first-seen double-spend exclusion
        if let Some(body) = tx.utxo() {
            if let Some(by) = body.inputs.iter().find_map(|o| self.claimed.get(o)) {
                return SubmitAck::Conflict { by: *by };
            }
            for input in &body.inputs {
                self.claimed.insert(*input, tx.id);
            }
        }
        let ready_at = self.commit_boundary(now);
        self.pending.push(Pending {
            tx,
            submitted_at: now,
            ready_at,
        });
        SubmitAck::Enqueued { ready_at }
    }

    /// Commits every pending transaction that is due at boundary `now`, in
    /// submission order with same-tick ties broken by `(submitter, id)`.
    pub fn step_block(&mut self, now: Tick) -> Vec<Transaction> {
        if self.crashed || !self.is_block_boundary(now) {
            return Vec::new();
        }
        let (mut due, rest): (Vec<_>, Vec<_>) = self.pending.drain(..).partition(|p| p.ready_at <= now);
        self.pending = rest;
        due.sort_by_key(|p| (p.submitted_at, p.tx.submitter, p.tx.id));
        let mut committed = Vec::with_capacity(due.len());
        for p in due {
            execute(&mut self.state, &p.tx);
            self.positions.insert(p.tx.id, self.log.len());
            self.log.push(p.tx.clone());
            committed.push(p.tx);
        }
        committed
    }

    fn honest_check(&self, tx_id: TxId) -> CheckAnswer {
        match self.positions.get(&tx_id) {
            Some(&position) => CheckAnswer {
                committed: true,
                attestation: Some(Attestation {
                    chain: self.id,
                    position,
                }),
            },
            None => CheckAnswer {
                committed: false,
                attestation: None,
            },
        }
    }

    pub fn local_check(&self, tx_id: TxId, asking: Asker, now: Tick) -> CheckAnswer {
        let no = CheckAnswer {
            committed: false,
            attestation: None,
        };
        if self.crashed {
            return no;
        }
        match &self.behavior {
            BehaviorPolicy::SplitBrainValue { x, y } => {
                let v = if asking.group == Group::X { *x } else { *y };
                CheckAnswer {
                    committed: v == BinaryValue::One,
                    attestation: None,
                }
            }
            BehaviorPolicy::Scripted(script) => match script.visibility(tx_id, asking.group, now) {
                Some(true) => CheckAnswer {
                    committed: true,
                    attestation: None,
                },
                Some(false) => no,
                None => self.honest_check(tx_id),
            },
            _ => self.honest_check(tx_id),
        }
    }

    pub fn local_read(&self, asking: Asker, now: Tick) -> ReadView {
        if self.crashed {
            return ReadView {
                chain: self.id,
                latest_committed: None,
                height: 0,
                state_snapshot: BTreeMap::new(),
            };
        }
        let mut view = ReadView {
            chain: self.id,
            latest_committed: self.log.last().map(|t| t.id),
            height: self.log.len(),
            state_snapshot: self.state.clone(),
        };
        match &self.behavior {
            BehaviorPolicy::SplitBrainValue { x, y } => {
                let v = if asking.group == Group::X { *x } else { *y };
                view.state_snapshot.insert(VALUE_KEY.to_string(), v.bit().to_string());
            }
            BehaviorPolicy::Scripted(script) => script.rewrite_read(&mut view, asking.group, now),
            _ => {}
        }
        view
    }

    /// Ids the asker sees as committed on this chain, in log order followed by any
    /// scripted reveals.
    pub fn visible_log(&self, asking: Asker, now: Tick) -> Vec<TxId> {
        if self.crashed {
            return Vec::new();
        }
        match &self.behavior {
            BehaviorPolicy::Scripted(script) => {
                let mut ids: Vec<TxId> = self
                    .log
                    .iter()
                    .map(|t| t.id)
                    .filter(|id| script.visibility(*id, asking.group, now) != Some(false))
                    .collect();
                let seen: BTreeSet<TxId> = ids.iter().copied().collect();
                ids.extend(
                    script
                        .revealed(asking.group, now)
                        .into_iter()
                        .filter(|id| !seen.contains(id)),
                );
                ids
            }
            BehaviorPolicy::SplitBrainValue { .. } => {
                if self.local_check(TxId::GENESIS, asking, now).committed {
                    self.log_ids()
                } else {
                    Vec::new()
                }
            }
            _ => self.log_ids(),
        }
    }

    /// Binary value as reported to `asking` (binary-consensus worlds).
    pub fn read_value(&self, asking: Asker, now: Tick) -> Option<BinaryValue> {
        let view = self.local_read(asking, now);
        match view.state_snapshot.get(VALUE_KEY).map(String::as_str) {
            Some("0") => Some(BinaryValue::Zero),
            Some("1") => Some(BinaryValue::One),
            _ => None,
        }
    }

    /// Submitter of a committed transaction (for diagnostics).
    pub fn submitter_of(&self, id: TxId) -> Option<ProcessId> {
        self.positions.get(&id).map(|&i| self.log[i].submitter)
    }
}
