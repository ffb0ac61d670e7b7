// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Leader-based total-order engine: PROPOSE, ECHO, KEY1 and VOTE phases per view, with
//! ABORT-driven view change on timeout.
//!
//! Each chain decides one transaction per slot. Own messages are applied through the
//! self-delivery path of the [`MessageQueue`], never through the channel.
//!
//! Safety across views rests on locks. A chain that votes for `tx` in view `v` locks
//! `(tx, v)` and only echoes a different proposal once it has seen `floor(m/3) + 1`
//! KEY1 messages for that proposal in a view above its lock. A leader re-proposes its
//! lock or the highest such evidence before its own queue.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::ccc::{Body, CccMessage, MessageQueue, MsgKind, SendOutcome};
use crate::quorum::Quorums;
use crate::types::{ChainId, Tick, Transaction, TxId, ViewNumber};

/// Cap on timeout doubling.
const MAX_BACKOFF: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    Proposed,
    Echoed,
    Keyed,
    Decided,
}

/// Snapshot of the current round for inspection and tests.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewState {
    pub view: ViewNumber,
    pub leader: ChainId,
    pub slot: u64,
    pub phase: Phase,
    pub proposal: Option<TxId>,
    pub echo_senders: BTreeSet<ChainId>,
    pub key1_senders: BTreeSet<ChainId>,
    pub vote_senders: BTreeSet<ChainId>,
    pub abort_senders: BTreeSet<ChainId>,
    pub view_start: Tick,
    pub timeout: Tick,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EngineEvent {
    Decided {
        slot: u64,
        view: ViewNumber,
        tx: Transaction,
    },
    EnteredView(ViewNumber),
    Note(String),
}

type Tally = BTreeMap<TxId, BTreeSet<ChainId>>;

#[derive(Clone, Debug, Default)]
struct Round {
    proposal: Option<TxId>,
    conflicting: bool,
    echo: Tally,
    key1: Tally,
    vote: Tally,
    sent_propose: bool,
    sent_echo: Option<TxId>,
    sent_key1: Option<TxId>,
    sent_vote: Option<TxId>,
    decided: bool,
}

impl Round {
    fn phase(&self) -> Phase {
        if self.decided {
            Phase::Decided
        } else if self.sent_key1.is_some() || self.sent_vote.is_some() {
            Phase::Keyed
        } else if self.sent_echo.is_some() {
            Phase::Echoed
        } else if self.proposal.is_some() {
            Phase::Proposed
        } else {
            Phase::Idle
        }
    }
}

fn quorum_tx(tally: &Tally, threshold: usize) -> Option<TxId> {
    tally
        .iter()
        .find(|(_, senders)| senders.len() >= threshold)
        .map(|(tx, _)| *tx)
}

fn senders(tally: &Tally, tx: Option<TxId>) -> BTreeSet<ChainId> {
    match tx {
        Some(tx) => tally.get(&tx).cloned().unwrap_or_default(),
        None => tally.values().flatten().copied().collect(),
    }
}

#[derive(Clone, Debug)]
pub struct ViewEngine {
    id: ChainId,
    quorums: Quorums,
    base_timeout: Tick,
    view: ViewNumber,
    view_start: Tick,
    slot: u64,
    consecutive_changes: u32,
    fifo: VecDeque<TxId>,
    first_pending: Option<Tick>,
    /// Client-submitted transactions; only these are echoed.
    known: BTreeSet<TxId>,
    /// Every transaction body seen, including forged ones.
    bodies: BTreeMap<TxId, Transaction>,
    decided: Vec<TxId>,
    decided_set: BTreeSet<TxId>,
    lock: Option<(TxId, ViewNumber)>,
    rounds: BTreeMap<(ViewNumber, u64), Round>,
    aborts: BTreeMap<ViewNumber, BTreeSet<ChainId>>,
    sent_abort: BTreeSet<ViewNumber>,
    inbox: VecDeque<CccMessage>,
    events: Vec<EngineEvent>,
}

impl ViewEngine {
    pub fn new(id: ChainId, quorums: Quorums, base_timeout: Tick) -> Self {
        ViewEngine {
            id,
            quorums,
            base_timeout: base_timeout.max(1),
            view: ViewNumber(0),
            view_start: 0,
            slot: 0,
            consecutive_changes: 0,
            fifo: VecDeque::new(),
            first_pending: None,
            known: BTreeSet::new(),
            bodies: BTreeMap::new(),
            decided: Vec::new(),
            decided_set: BTreeSet::new(),
            lock: None,
            rounds: BTreeMap::new(),
            aborts: BTreeMap::new(),
            sent_abort: BTreeSet::new(),
            inbox: VecDeque::new(),
            events: Vec::new(),
        }
    }

    pub fn id(&self) -> ChainId {
        self.id
    }

    pub fn view(&self) -> ViewNumber {
        self.view
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn decided(&self) -> &[TxId] {
        &self.decided
    }

    pub fn lock(&self) -> Option<(TxId, ViewNumber)> {
        self.lock
    }

    pub fn timeout(&self) -> Tick {
        self.base_timeout << self.consecutive_changes.min(MAX_BACKOFF)
    }

    pub fn is_leader(&self) -> bool {
        self.view.leader(self.quorums.m) == self.id
    }

    /// Undecided work exists, so the view timer is armed.
    pub fn has_pending_work(&self) -> bool {
        self.fifo.iter().any(|t| !self.decided_set.contains(t))
            || self.lock.is_some()
            || self
                .rounds
                .get(&(self.view, self.slot))
                .is_some_and(|r| r.proposal.is_some())
    }

    pub fn round_phase(&self, view: ViewNumber, slot: u64) -> Phase {
        self.rounds.get(&(view, slot)).map_or(Phase::Idle, Round::phase)
    }

    pub fn state(&self) -> ViewState {
        let round = self.rounds.get(&(self.view, self.slot)).cloned().unwrap_or_default();
        ViewState {
            view: self.view,
            leader: self.view.leader(self.quorums.m),
            slot: self.slot,
            phase: round.phase(),
            proposal: round.proposal,
            echo_senders: senders(&round.echo, round.proposal),
            key1_senders: senders(&round.key1, round.proposal),
            vote_senders: senders(&round.vote, round.proposal),
            abort_senders: self.aborts.get(&self.view).cloned().unwrap_or_default(),
            view_start: self.view_start,
            timeout: self.timeout(),
        }
    }

    /// A client handed `tx` to this chain.
    pub fn client_submit(&mut self, tx: Transaction, now: Tick, queue: &mut MessageQueue) -> Vec<EngineEvent> {
        if !self.decided_set.contains(&tx.id) && self.known.insert(tx.id) {
            self.fifo.push_back(tx.id);
            self.first_pending.get_or_insert(now);
            self.bodies.entry(tx.id).or_insert(tx);
        }
        self.run(now, queue)
    }

    pub fn on_deliver(&mut self, msg: &CccMessage, now: Tick, queue: &mut MessageQueue) -> Vec<EngineEvent> {
        self.apply(msg);
        self.run(now, queue)
    }

    /// Keeper ping: the only way a passive handler learns that time has passed.
    pub fn on_ping(&mut self, now: Tick, queue: &mut MessageQueue) -> Vec<EngineEvent> {
        if self.has_pending_work() && !self.sent_abort.contains(&self.view) {
            let armed_at = self.view_start.max(self.first_pending.unwrap_or(self.view_start));
            if now.saturating_sub(armed_at) > self.timeout() {
                self.emit(MsgKind::Abort, self.view, None, Body::Empty, queue);
                self.sent_abort.insert(self.view);
            }
        }
        self.run(now, queue)
    }

    fn run(&mut self, now: Tick, queue: &mut MessageQueue) -> Vec<EngineEvent> {
        loop {
            while let Some(own) = self.inbox.pop_front() {
                self.apply(&own);
            }
            if !self.step(now, queue) && self.inbox.is_empty() {
                break;
            }
        }
        std::mem::take(&mut self.events)
    }

    fn note(&mut self, text: String) {
        self.events.push(EngineEvent::Note(text));
    }

    /// Broadcasts to every other chain and applies the own copy via self-delivery.
    fn emit(&mut self, kind: MsgKind, view: ViewNumber, slot: Option<u64>, body: Body, queue: &mut MessageQueue) {
        let own = CccMessage::new(self.id, self.id, kind, Some(view), slot, body)
            .expect("engine builds well-formed messages");
        queue.broadcast(&own);
        if let Ok(SendOutcome::SelfDelivery(own)) = queue.ccc_send(own) {
            self.inbox.push_back(own);
        }
    }

    fn apply(&mut self, msg: &CccMessage) {
        let Some(view) = msg.view else {
            return;
        };
        if let Some(tx) = msg.tx() {
            self.bodies.entry(tx.id).or_insert_with(|| tx.clone());
        }
        if msg.kind == MsgKind::Abort {
            if view >= self.view {
                self.aborts.entry(view).or_default().insert(msg.src);
            }
            return;
        }
        let (Some(slot), Some(tx)) = (msg.slot, msg.tx_id()) else {
            return;
        };
        if slot < self.slot {
            self.note(format!("discard {} for decided slot {slot} from {}", msg.kind, msg.src));
            return;
        }
        match msg.kind {
            MsgKind::Propose => {
                if msg.src != view.leader(self.quorums.m) {
                    self.note(format!(
                        "discard propose from non-leader {} in view {}",
                        msg.src, view.0
                    ));
                    return;
                }
                if view < self.view {
                    self.note(format!("discard stale propose for view {}", view.0));
                    return;
                }
                let round = self.rounds.entry((view, slot)).or_default();
                match round.proposal {
                    None => round.proposal = Some(tx),
                    Some(p) if p != tx => round.conflicting = true,
                    Some(_) => {}
                }
            }
            MsgKind::Echo => {
                if view < self.view {
                    return;
                }
                self.tally(view, slot, |r| &mut r.echo)
                    .entry(tx)
                    .or_default()
                    .insert(msg.src);
            }
            MsgKind::Key1 => {
                self.tally(view, slot, |r| &mut r.key1)
                    .entry(tx)
                    .or_default()
                    .insert(msg.src);
            }
            MsgKind::Vote => {
                self.tally(view, slot, |r| &mut r.vote)
                    .entry(tx)
                    .or_default()
                    .insert(msg.src);
            }
            _ => {}
        }
    }

    fn tally(&mut self, view: ViewNumber, slot: u64, pick: impl FnOnce(&mut Round) -> &mut Tally) -> &mut Tally {
        pick(self.rounds.entry((view, slot)).or_default())
    }

    /// Highest view above `floor` with a KEY1 weak quorum in the current slot.
    fn evidence(&self, floor: Option<ViewNumber>) -> Option<(TxId, ViewNumber)> {
        let t = self.quorums.check_threshold;
        self.rounds
            .range((ViewNumber(0), self.slot)..)
            .filter(|((v, s), _)| *s == self.slot && floor.is_none_or(|f| *v > f))
            .filter_map(|((v, _), r)| quorum_tx(&r.key1, t).map(|tx| (tx, *v)))
            .filter(|(tx, _)| !self.decided_set.contains(tx))
            .max_by_key(|(_, v)| *v)
    }

    fn echo_ok(&self, tx: TxId) -> bool {
        if !self.known.contains(&tx) || self.decided_set.contains(&tx) {
            return false;
        }
        match self.lock {
            None => true,
            Some((locked, _)) if locked == tx => true,
            Some((_, lock_view)) => self
                .rounds
                .iter()
                .filter(|((v, s), _)| *s == self.slot && *v > lock_view)
                .any(|(_, r)| r.key1.get(&tx).is_some_and(|s| s.len() >= self.quorums.check_threshold)),
        }
    }

    fn candidate(&self) -> Option<TxId> {
        let lock = self.lock.filter(|(tx, _)| !self.decided_set.contains(tx));
        match (lock, self.evidence(lock.map(|(_, v)| v))) {
            (_, Some((tx, _))) => Some(tx),
            (Some((tx, _)), None) => Some(tx),
            (None, None) => self.fifo.iter().copied().find(|t| !self.decided_set.contains(t)),
        }
    }

    fn body(&self, tx: TxId) -> Transaction {
        self.bodies.get(&tx).cloned().expect("body recorded before use")
    }

    fn send_echo(&mut self, view: ViewNumber, tx: TxId, queue: &mut MessageQueue) {
        let slot = self.slot;
        self.rounds.entry((view, slot)).or_default().sent_echo = Some(tx);
        let body = Body::Tx(self.body(tx));
        self.emit(MsgKind::Echo, view, Some(slot), body, queue);
    }

    fn send_key1(&mut self, view: ViewNumber, tx: TxId, queue: &mut MessageQueue) {
        let slot = self.slot;
        let round = self.rounds.entry((view, slot)).or_default();
        let catch_up = round.sent_echo.is_none();
        if catch_up && view == self.view && self.echo_ok(tx) {
            self.send_echo(view, tx, queue);
        }
        self.rounds.entry((view, slot)).or_default().sent_key1 = Some(tx);
        let body = Body::Tx(self.body(tx));
        self.emit(MsgKind::Key1, view, Some(slot), body, queue);
    }

    fn send_vote(&mut self, view: ViewNumber, tx: TxId, queue: &mut MessageQueue) {
        let slot = self.slot;
        if view == self.view && self.rounds.get(&(view, slot)).is_some_and(|r| r.sent_key1.is_none()) {
            self.send_key1(view, tx, queue);
        }
        self.rounds.entry((view, slot)).or_default().sent_vote = Some(tx);
        if self.lock.is_none_or(|(_, lv)| view >= lv) {
            self.lock = Some((tx, view));
        }
        let body = Body::Tx(self.body(tx));
        self.emit(MsgKind::Vote, view, Some(slot), body, queue);
    }

    fn enter_view(&mut self, view: ViewNumber, now: Tick) {
        self.view = view;
        self.view_start = now;
        self.aborts = self.aborts.split_off(&view);
        let slot = self.slot;
        // echoes only matter in the current view
        for ((v, s), r) in self.rounds.iter_mut() {
            if *v < view && *s == slot {
                r.echo.clear();
            }
        }
        self.events.push(EngineEvent::EnteredView(view));
    }

    fn decide(&mut self, view: ViewNumber, tx: TxId, now: Tick) {
        let slot = self.slot;
        self.rounds.entry((view, slot)).or_default().decided = true;
        self.decided.push(tx);
        self.decided_set.insert(tx);
        self.fifo.retain(|t| *t != tx);
        self.slot += 1;
        self.lock = None;
        self.consecutive_changes = 0;
        self.first_pending = if self.fifo.is_empty() { None } else { Some(now) };
        self.rounds.retain(|(_, s), _| *s > slot);
        let body = self.body(tx);
        self.events.push(EngineEvent::Decided { slot, view, tx: body });
        if view >= self.view {
            self.enter_view(view.next(), now);
        } else {
            self.view_start = now;
        }
    }

    /// One pass over every rule; true if anything changed.
    fn step(&mut self, now: Tick, queue: &mut MessageQueue) -> bool {
        let q = self.quorums.vote_threshold;
        let weak = self.quorums.check_threshold;
        let slot = self.slot;

        // decide on a vote quorum from any view of the current slot
        let decision = self
            .rounds
            .iter()
            .filter(|((_, s), _)| *s == slot)
            .find_map(|((v, _), r)| quorum_tx(&r.vote, q).map(|tx| (*v, tx)));
        if let Some((view, tx)) = decision {
            self.decide(view, tx, now);
            return true;
        }

        // join a vote that at least one correct chain must have cast
        let join = self
            .rounds
            .iter()
            .filter(|((_, s), r)| *s == slot && r.sent_vote.is_none())
            .find_map(|((v, _), r)| quorum_tx(&r.vote, weak).map(|tx| (*v, tx)));
        if let Some((view, tx)) = join {
            self.send_vote(view, tx, queue);
            return true;
        }

        let view = self.view;
        let round = self.rounds.entry((view, slot)).or_default().clone();

        if self.is_leader() && !round.sent_propose {
            if let Some(tx) = self.candidate() {
                self.rounds.entry((view, slot)).or_default().sent_propose = true;
                let body = Body::Tx(self.body(tx));
                self.emit(MsgKind::Propose, view, Some(slot), body, queue);
                return true;
            }
        }

        if round.conflicting && !self.sent_abort.contains(&view) {
            self.note(format!("conflicting proposals from leader in view {}", view.0));
            self.sent_abort.insert(view);
            self.emit(MsgKind::Abort, view, None, Body::Empty, queue);
            return true;
        }

        if let Some(tx) = round.proposal {
            if round.sent_echo.is_none() && !round.conflicting && self.echo_ok(tx) {
                self.send_echo(view, tx, queue);
                return true;
            }
        }

        if round.sent_key1.is_none() {
            if let Some(tx) = quorum_tx(&round.echo, q) {
                self.send_key1(view, tx, queue);
                return true;
            }
        }

        if round.sent_vote.is_none() {
            if let Some(tx) = quorum_tx(&round.key1, q) {
                self.send_vote(view, tx, queue);
                return true;
            }
        }

        // view change
        let joins: Vec<ViewNumber> = self
            .aborts
            .range(view..)
            .filter(|(w, s)| s.len() >= weak && !self.sent_abort.contains(w))
            .map(|(w, _)| *w)
            .collect();
        if let Some(&w) = joins.first() {
            self.sent_abort.insert(w);
            self.emit(MsgKind::Abort, w, None, Body::Empty, queue);
            return true;
        }
        let target = self
            .aborts
            .range(view..)
            .filter(|(_, s)| s.len() >= q)
            .map(|(w, _)| *w)
            .max();
        if let Some(w) = target {
            self.consecutive_changes += 1;
            self.enter_view(w.next(), now);
            return true;
        }
        false
    }
}
