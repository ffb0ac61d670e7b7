// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Discrete-event driver.
//!
//! Every tick runs, in order: scripted crashes, client submissions, channel deliveries,
//! keeper pings, block production, client checks, and the invariant monitor. Each
//! handler runs to completion and its staged messages are flushed before the next
//! handler starts.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ccc::{Body, CccMessage, ChannelState, DelayPolicy, MessageQueue, MsgKind, SynchronyConfig};
use crate::chain::{BehaviorPolicy, LedgerObject};
use crate::consensus::{ClientApi, EngineEvent, SkeletonChain, ViewEngine};
use crate::lite::{self, ConflictRelation, LiteClient};
use crate::metrics::{metrics_from_trace, RunMetrics};
use crate::quorum::{quorums_for, Quorums};
use crate::trace::{TraceMeta, TraceRow, TraceWriter};
use crate::types::{
    derive_id, Asker, ChainId, Group, Payload, ProcessId, Tick, Transaction, TxId, TxIdGen, ViewNumber,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    TrustboostSkeleton,
    TrustboostView,
    Lite,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::TrustboostSkeleton => "trustboost-skeleton",
            Protocol::TrustboostView => "trustboost-view",
            Protocol::Lite => "lite",
        }
    }

    pub fn from_name(name: &str) -> Option<Protocol> {
        [Protocol::TrustboostSkeleton, Protocol::TrustboostView, Protocol::Lite]
            .into_iter()
            .find(|p| p.name() == name)
    }
}

/// One client submission.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkItem {
    pub tick: Tick,
    pub process: ProcessId,
    pub payload: Payload,
    /// Entry chain for the skeleton protocol (default chain 0).
    pub entry: Option<ChainId>,
    /// Chains the client hands the transaction to (default: all).
    pub targets: Option<Vec<ChainId>>,
    /// Whether every process must eventually commit it.
    pub expected: bool,
}

impl WorkItem {
    pub fn new(tick: Tick, process: u32, payload: Payload) -> Self {
        WorkItem {
            tick,
            process: ProcessId(process),
            payload,
            entry: None,
            targets: None,
            expected: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub protocol: Protocol,
    pub m: usize,
    pub f: usize,
    pub gst: Tick,
    pub delta: Tick,
    pub block_interval: Tick,
    /// Base view timeout; defaults to `4 * delta`.
    pub timeout: Option<Tick>,
    /// Keeper ping period; defaults to `delta`.
    pub ping_interval: Option<Tick>,
    pub behaviors: Vec<BehaviorPolicy>,
    pub processes: u32,
    pub workload: Vec<WorkItem>,
    pub seed: u64,
    pub horizon: Tick,
    pub delay: DelayPolicy,
    /// Number of genesis outputs for UTXO workloads.
    pub genesis_outputs: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("m must be at least 1")]
    NoChains,
    #[error("delta must be at least 1")]
    ZeroDelta,
    #[error("expected {m} behaviors, got {got}")]
    BehaviorCount { m: usize, got: usize },
    #[error("horizon {horizon} must exceed gst + 10*delta = {min}")]
    HorizonTooShort { horizon: Tick, min: Tick },
    #[error("workload item {item} targets {chain}, but m = {m}")]
    UnknownChain { item: usize, chain: ChainId, m: usize },
    #[error("workload item {item} is submitted by {process}, but there are {processes} processes")]
    UnknownProcess {
        item: usize,
        process: ProcessId,
        processes: u32,
    },
    #[error("at least one process is required")]
    NoProcesses,
}

impl SimConfig {
    pub fn new(protocol: Protocol, m: usize, f: usize) -> Self {
        SimConfig {
            protocol,
            m,
            f,
            gst: 0,
            delta: 2,
            block_interval: 1,
            timeout: None,
            ping_interval: None,
            behaviors: vec![BehaviorPolicy::Honest; m],
            processes: 2,
            workload: Vec::new(),
            seed: 0,
            horizon: 200,
            delay: DelayPolicy::None,
            genesis_outputs: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.m == 0 {
            return Err(ConfigError::NoChains);
        }
        if self.delta == 0 {
            return Err(ConfigError::ZeroDelta);
        }
        if self.processes == 0 {
            return Err(ConfigError::NoProcesses);
        }
        if self.behaviors.len() != self.m {
            return Err(ConfigError::BehaviorCount {
                m: self.m,
                got: self.behaviors.len(),
            });
        }
        let min = self.gst + 10 * self.delta;
        if self.horizon <= min {
            return Err(ConfigError::HorizonTooShort {
                horizon: self.horizon,
                min,
            });
        }
        for (item, w) in self.workload.iter().enumerate() {
            if w.process.0 >= self.processes {
                return Err(ConfigError::UnknownProcess {
                    item,
                    process: w.process,
                    processes: self.processes,
                });
            }
            let chains = w.entry.into_iter().chain(w.targets.iter().flatten().copied());
            for chain in chains {
                if chain.index() >= self.m {
                    return Err(ConfigError::UnknownChain { item, chain, m: self.m });
                }
            }
        }
        Ok(())
    }

    pub fn quorums(&self) -> Quorums {
        quorums_for(self.m, self.f)
    }

    pub fn synchrony(&self) -> SynchronyConfig {
        SynchronyConfig {
            gst: self.gst,
            delta: self.delta,
            policy: self.delay.clone(),
        }
    }
}

/// Group of process `p` when `n` processes are split into halves.
pub fn group_of(p: ProcessId, n: u32) -> Group {
    if p.0 < n.div_ceil(2) {
        Group::X
    } else {
        Group::Y
    }
}

/// Transactions of a workload, with ids assigned in workload order.
pub fn workload_transactions(items: &[WorkItem]) -> Vec<Transaction> {
    let mut gen = TxIdGen::new();
    items.iter().map(|w| gen.make(w.payload.clone(), w.process)).collect()
}

/// A counterfeit of `tx` addressed to `dst`: same submitter, different body and id.
pub fn forged_variant(tx: &Transaction, dst: ChainId) -> Transaction {
    let payload = Payload::Raw(format!("forged:{}:{}", tx.id, dst.0));
    Transaction {
        id: derive_id(u64::MAX - dst.0 as u64, &payload, tx.submitter),
        payload,
        submitter: tx.submitter,
    }
}

/// Applies a Byzantine chain's outgoing-message policy to its own staged batch.
type MsgKey = (Option<ViewNumber>, Option<u64>, Option<TxId>);

pub fn rewrite_outgoing(behavior: &BehaviorPolicy, staged: &mut [CccMessage]) {
    let kind = match behavior {
        BehaviorPolicy::EquivocatePropose => MsgKind::Propose,
        BehaviorPolicy::EquivocateVote => MsgKind::Vote,
        _ => return,
    };
    let mut groups: BTreeMap<MsgKey, Vec<usize>> = BTreeMap::new();
    for (i, msg) in staged.iter().enumerate() {
        if msg.kind == kind {
            groups.entry((msg.view, msg.slot, msg.tx_id())).or_default().push(i);
        }
    }
    for (_, mut idx) in groups {
        idx.sort_by_key(|&i| staged[i].dst);
        let keep = match kind {
            // real proposal to the first recipient only
            MsgKind::Propose => 1,
            // real vote to the lower half
            _ => idx.len() / 2,
        };
        for &i in idx.iter().skip(keep) {
            let msg = &mut staged[i];
            if let Some(tx) = msg.tx() {
                msg.body = Body::Tx(forged_variant(tx, msg.dst));
            }
        }
    }
}

fn ping_rng(seed: u64, tick: Tick, chain: ChainId) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ tick.rotate_left(17) ^ ((chain.0 as u64) << 48) ^ 0x0005_eed0_fb07)
}

enum Engines {
    Skeleton(Vec<SkeletonChain>),
    View(Vec<ViewEngine>),
    Lite,
}

#[derive(Debug)]
pub struct SimOutcome {
    pub metrics: RunMetrics,
    pub trace: Vec<TraceRow>,
    pub trace_text: String,
    pub chains: Vec<LedgerObject>,
    pub transactions: Vec<Transaction>,
    /// Decided sequence of every chain (view engine only).
    pub decided: Vec<Vec<TxId>>,
    pub final_views: Vec<ViewNumber>,
    pub end_tick: Tick,
}

pub struct Simulation {
    cfg: SimConfig,
    quorums: Quorums,
    sync: SynchronyConfig,
    chains: Vec<LedgerObject>,
    engines: Engines,
    channel: ChannelState,
    trace: TraceWriter,
    txs: Vec<Transaction>,
    expected: Vec<TxId>,
    lite_clients: Vec<LiteClient>,
    committed: Vec<BTreeSet<TxId>>,
    pings: BTreeMap<Tick, BTreeSet<ChainId>>,
    last_logs: Vec<Vec<TxId>>,
    last_views: Vec<ViewNumber>,
    decided_count: Vec<u64>,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let quorums = cfg.quorums();
        let m = cfg.m;
        let chains: Vec<LedgerObject> = ChainId::all(m)
            .zip(&cfg.behaviors)
            .map(|(id, b)| LedgerObject::new(id, b.clone(), cfg.block_interval))
            .collect();
        let timeout = cfg.timeout.unwrap_or(4 * cfg.delta);
        let engines = match cfg.protocol {
            Protocol::TrustboostSkeleton => {
                Engines::Skeleton(ChainId::all(m).map(|c| SkeletonChain::new(c, quorums)).collect())
            }
            Protocol::TrustboostView => {
                Engines::View(ChainId::all(m).map(|c| ViewEngine::new(c, quorums, timeout)).collect())
            }
            Protocol::Lite => Engines::Lite,
        };
        let txs = workload_transactions(&cfg.workload);
        let conflicts = ConflictRelation::new(txs.iter());
        let mut pairs = Vec::new();
        for (i, a) in txs.iter().enumerate() {
            for b in &txs[i + 1..] {
                if conflicts.conflicts(a.id, b.id) {
                    pairs.push((a.id, b.id));
                }
            }
        }
        let expected: Vec<TxId> = txs
            .iter()
            .zip(&cfg.workload)
            .filter(|(t, w)| w.expected && conflicts.conflicting_with(t.id).is_empty())
            .map(|(t, _)| t.id)
            .collect();
        let meta = TraceMeta {
            protocol: cfg.protocol.name().to_string(),
            m,
            f: cfg.f,
            seed: cfg.seed,
            gst: cfg.gst,
            delta: cfg.delta,
            horizon: cfg.horizon,
            processes: cfg.processes,
            honest: cfg.behaviors.iter().map(BehaviorPolicy::is_honest).collect(),
            expected: expected.clone(),
            conflicts: pairs,
        };
        let lite_clients = (0..cfg.processes)
            .map(|p| {
                let asker = Asker::new(p, group_of(ProcessId(p), cfg.processes));
                LiteClient::new(asker, quorums, cfg.genesis_outputs)
            })
            .collect();
        Ok(Simulation {
            quorums,
            sync: cfg.synchrony(),
            last_logs: vec![Vec::new(); m],
            last_views: vec![ViewNumber(0); m],
            decided_count: vec![0; m],
            committed: vec![BTreeSet::new(); cfg.processes as usize],
            chains,
            engines,
            channel: ChannelState::new(),
            trace: TraceWriter::new(meta),
            txs,
            expected,
            lite_clients,
            pings: BTreeMap::new(),
            cfg,
        })
    }

    fn asker(&self, p: u32) -> Asker {
        Asker::new(p, group_of(ProcessId(p), self.cfg.processes))
    }

    fn violation(&mut self, now: Tick, invariant: &str, detail: String) {
        self.trace.push(TraceRow::Violation {
            tick: now,
            invariant: invariant.to_string(),
            detail,
        });
    }

    fn flush(&mut self, src: ChainId, mut queue: MessageQueue, now: Tick) {
        let behavior = self.chains[src.index()].behavior().clone();
        rewrite_outgoing(&behavior, queue.staged_mut());
        let staged = queue.len();
        let scheduled = self.channel.schedule_flush(queue, now, &self.sync, self.cfg.seed);
        if scheduled.len() != staged {
            self.violation(
                now,
                "flush-atomicity",
                format!("{src} staged {staged}, flushed {}", scheduled.len()),
            );
        }
        for f in scheduled {
            self.trace.push(TraceRow::Send {
                tick: now,
                src: f.msg.src,
                dst: f.msg.dst,
                kind: f.msg.kind,
                view: f.msg.view.map(|v| v.0),
                slot: f.msg.slot,
                tx: f.msg.tx_id(),
                seq: f.seq,
                deliver_at: f.deliver_at,
            });
        }
    }

    fn handle_events(&mut self, chain: ChainId, events: Vec<EngineEvent>, now: Tick) {
        let i = chain.index();
        for e in events {
            match e {
                EngineEvent::Decided { slot, view, tx } => {
                    if slot != self.decided_count[i] {
                        self.violation(
                            now,
                            "slot-gap",
                            format!("{chain} decided slot {slot}, expected {}", self.decided_count[i]),
                        );
                    }
                    self.decided_count[i] = slot + 1;
                    self.trace.push(TraceRow::Decide {
                        tick: now,
                        chain,
                        slot,
                        view: view.0,
                        tx: tx.id,
                    });
                    self.chains[i].local_submit(tx, now);
                }
                EngineEvent::EnteredView(view) => {
                    if view <= self.last_views[i] {
                        self.violation(
                            now,
                            "view-monotonicity",
                            format!("{chain} went from {} to {}", self.last_views[i].0, view.0),
                        );
                    }
                    self.last_views[i] = view;
                    self.trace.push(TraceRow::EnterView {
                        tick: now,
                        chain,
                        view: view.0,
                    });
                    if self.chains[i].enter_view(view) {
                        self.trace.push(TraceRow::Note {
                            tick: now,
                            chain,
                            text: format!("crashed on entering view {}", view.0),
                        });
                    }
                }
                EngineEvent::Note(text) => self.trace.push(TraceRow::Note { tick: now, chain, text }),
            }
        }
    }

    fn submit(&mut self, item: usize, now: Tick) {
        let tx = self.txs[item].clone();
        let w = self.cfg.workload[item].clone();
        let all: Vec<ChainId> = ChainId::all(self.cfg.m).collect();
        let chains = match self.cfg.protocol {
            Protocol::TrustboostSkeleton => vec![w.entry.unwrap_or(ChainId(0))],
            _ => w.targets.clone().unwrap_or(all),
        };
        self.trace.push(TraceRow::Submit {
            tick: now,
            process: w.process,
            tx: tx.id,
            chains: chains.clone(),
        });
        for p in &mut self.lite_clients {
            p.learn(&tx);
        }
        match self.cfg.protocol {
            Protocol::Lite => {
                if let Err(e) = lite::validate(&tx) {
                    self.trace.push(TraceRow::Note {
                        tick: now,
                        chain: chains[0],
                        text: format!("rejected: {e}"),
                    });
                    return;
                }
                for c in chains {
                    self.chains[c.index()].local_submit(tx.clone(), now);
                }
            }
            Protocol::TrustboostSkeleton | Protocol::TrustboostView => {
                for c in chains {
                    if self.chains[c.index()].is_crashed() {
                        continue;
                    }
                    let mut queue = MessageQueue::new(c, self.cfg.m);
                    match &mut self.engines {
                        Engines::Skeleton(e) => {
                            for local in e[c.index()].submit(tx.clone(), &mut queue) {
                                self.chains[c.index()].local_submit(local, now);
                            }
                        }
                        Engines::View(e) => {
                            let events = e[c.index()].client_submit(tx.clone(), now, &mut queue);
                            self.handle_events(c, events, now);
                        }
                        Engines::Lite => {}
                    }
                    self.flush(c, queue, now);
                }
            }
        }
    }

    fn deliver(&mut self, now: Tick) {
        for f in self.channel.due(now) {
            let bound = self.cfg.gst.saturating_sub(f.sent_at) + self.cfg.delta;
            if f.deliver_at - f.sent_at > bound || f.deliver_at != now {
                self.violation(
                    now,
                    "synchrony-bound",
                    format!(
                        "{}->{} seq {} sent {} delivered {}",
                        f.msg.src, f.msg.dst, f.seq, f.sent_at, now
                    ),
                );
            }
            let dst = f.msg.dst;
            if self.chains[dst.index()].is_crashed() {
                self.trace.push(TraceRow::Drop {
                    tick: now,
                    src: f.msg.src,
                    dst,
                    kind: f.msg.kind,
                    reason: "destination crashed".to_string(),
                });
                continue;
            }
            self.trace.push(TraceRow::Deliver {
                tick: now,
                src: f.msg.src,
                dst,
                kind: f.msg.kind,
                view: f.msg.view.map(|v| v.0),
                tx: f.msg.tx_id(),
                seq: f.seq,
                sent_at: f.sent_at,
            });
            let mut queue = MessageQueue::new(dst, self.cfg.m);
            match &mut self.engines {
                Engines::Skeleton(e) => {
                    for local in e[dst.index()].on_deliver(&f.msg, &mut queue) {
                        self.chains[dst.index()].local_submit(local, now);
                    }
                }
                Engines::View(e) => {
                    let events = e[dst.index()].on_deliver(&f.msg, now, &mut queue);
                    self.handle_events(dst, events, now);
                }
                Engines::Lite => {}
            }
            self.flush(dst, queue, now);
        }
    }

    fn ping(&mut self, now: Tick) {
        if !matches!(self.engines, Engines::View(_)) {
            return;
        }
        let interval = self.cfg.ping_interval.unwrap_or(self.cfg.delta).max(1);
        if now.is_multiple_of(interval) {
            for c in ChainId::all(self.cfg.m) {
                let land = if now < self.cfg.gst && !matches!(self.cfg.delay, DelayPolicy::None) {
                    let extra = ping_rng(self.cfg.seed, now, c).gen_range(0..=2 * self.cfg.delta);
                    (now + extra).min(self.cfg.gst)
                } else {
                    now
                };
                self.pings.entry(land).or_default().insert(c);
            }
        }
        let Some(due) = self.pings.remove(&now) else {
            return;
        };
        for c in due {
            if self.chains[c.index()].is_crashed() {
                continue;
            }
            let mut queue = MessageQueue::new(c, self.cfg.m);
            if let Engines::View(e) = &mut self.engines {
                let engine = &mut e[c.index()];
                let events = engine.on_ping(now, &mut queue);
                if matches!(self.chains[c.index()].behavior(), BehaviorPolicy::AbortSpam) {
                    let spam = CccMessage::new(c, c, MsgKind::Abort, Some(engine.view()), None, Body::Empty)
                        .expect("abort carries a view");
                    queue.broadcast(&spam);
                }
                self.handle_events(c, events, now);
            }
            self.flush(c, queue, now);
        }
    }

    fn blocks(&mut self, now: Tick) {
        for i in 0..self.cfg.m {
            let committed = self.chains[i].step_block(now);
            if !committed.is_empty() {
                self.trace.push(TraceRow::Block {
                    tick: now,
                    chain: ChainId(i as u32),
                    txs: committed.iter().map(|t| t.id).collect(),
                });
            }
        }
    }

    fn client_checks(&mut self, now: Tick) {
        let submitted: Vec<TxId> = self
            .txs
            .iter()
            .zip(&self.cfg.workload)
            .filter(|(_, w)| w.tick <= now)
            .map(|(t, _)| t.id)
            .collect();
        for p in 0..self.cfg.processes {
            let asker = self.asker(p);
            for &tx in &submitted {
                if self.committed[p as usize].contains(&tx) {
                    continue;
                }
                let ok = match self.cfg.protocol {
                    Protocol::Lite => self.lite_clients[p as usize].lite_check(&self.chains, tx, now),
                    _ => ClientApi::new(&self.chains, self.quorums).tb_check(tx, asker, now),
                };
                if ok {
                    self.committed[p as usize].insert(tx);
                    self.trace.push(TraceRow::Commit {
                        tick: now,
                        process: ProcessId(p),
                        tx,
                    });
                }
            }
        }
    }

    fn monitor(&mut self, now: Tick) {
        for i in 0..self.cfg.m {
            if !self.chains[i].is_honest() {
                continue;
            }
            let log = self.chains[i].log_ids();
            if !log.starts_with(&self.last_logs[i]) {
                self.violation(now, "check-monotonicity", format!("chain{i} log rewrote its prefix"));
            }
            self.last_logs[i] = log;
        }
    }

    fn settled(&self, now: Tick) -> bool {
        let all_submitted = self.cfg.workload.iter().all(|w| w.tick <= now);
        let all_committed = self
            .committed
            .iter()
            .all(|set| self.expected.iter().all(|t| set.contains(t)));
        let engines_idle = match &self.engines {
            Engines::View(e) => e
                .iter()
                .zip(&self.chains)
                .all(|(e, c)| c.is_crashed() || !c.is_honest() || !e.has_pending_work()),
            _ => true,
        };
        all_submitted
            && all_committed
            && engines_idle
            && self.channel.in_flight() == 0
            && self.chains.iter().all(|c| !c.has_pending())
    }

    pub fn run(mut self) -> SimOutcome {
        let mut now = 0;
        loop {
            for i in 0..self.cfg.m {
                let crash_at = match self.chains[i].behavior() {
                    BehaviorPolicy::Scripted(s) => s.crash_at(),
                    _ => None,
                };
                if crash_at.is_some_and(|t| t <= now) && !self.chains[i].is_crashed() {
                    self.chains[i].crash();
                    self.trace.push(TraceRow::Note {
                        tick: now,
                        chain: ChainId(i as u32),
                        text: "scripted crash".to_string(),
                    });
                }
            }
            let due: Vec<usize> = (0..self.cfg.workload.len())
                .filter(|&i| self.cfg.workload[i].tick == now)
                .collect();
            for i in due {
                self.submit(i, now);
            }
            self.deliver(now);
            self.ping(now);
            self.blocks(now);
            self.client_checks(now);
            self.monitor(now);
            if now >= self.cfg.horizon || self.settled(now) {
                break;
            }
            now += 1;
        }
        let (decided, final_views) = match &self.engines {
            Engines::View(e) => (
                e.iter().map(|x| x.decided().to_vec()).collect(),
                e.iter().map(ViewEngine::view).collect(),
            ),
            _ => (vec![Vec::new(); self.cfg.m], vec![ViewNumber(0); self.cfg.m]),
        };
        let (trace, trace_text) = self.trace.finish(now);
        let metrics = metrics_from_trace(&trace);
        SimOutcome {
            metrics,
            trace,
            trace_text,
            chains: self.chains,
            transactions: self.txs,
            decided,
            final_views,
            end_tick: now,
        }
    }
}

/// Builds and runs a simulation.
pub fn simulate(cfg: SimConfig) -> Result<SimOutcome, ConfigError> {
    Ok(Simulation::new(cfg)?.run())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lite::{Outpoint, UtxoBody, UtxoOutput};
    use crate::types::NameOp;

    fn buy(name: &str) -> Payload {
        Payload::Name(NameOp::Buy {
            name: name.into(),
            owner: "alice".into(),
        })
    }

    fn view_cfg(m: usize, seed: u64) -> SimConfig {
        let mut cfg = SimConfig::new(Protocol::TrustboostView, m, (m - 1) / 3);
        cfg.seed = seed;
        cfg.workload = vec![WorkItem::new(0, 0, buy("a"))];
        cfg
    }

    #[test]
    fn honest_view_run_counts() {
        for (m, expected) in [(4, 39), (7, 132), (10, 279)] {
            let out = simulate(view_cfg(m, 3)).unwrap();
            assert_eq!(out.metrics.total_messages, expected, "m={m}");
            assert!(out.metrics.all_ok());
            assert_eq!(out.metrics.views_used, Some(1));
        }
    }

    #[test]
    fn skeleton_run_counts() {
        let mut cfg = view_cfg(4, 1);
        cfg.protocol = Protocol::TrustboostSkeleton;
        let out = simulate(cfg).unwrap();
        assert_eq!(out.metrics.total_messages, 15);
        assert!(out.metrics.all_ok());
        assert!(out.chains.iter().all(|c| c.log().len() == 1));
    }

    #[test]
    fn attack_view_counts() {
        let cases = [
            (BehaviorPolicy::Crash { at_view: ViewNumber(0) }, 0, 2),
            (BehaviorPolicy::EquivocatePropose, 0, 2),
            (BehaviorPolicy::EquivocateVote, 1, 1),
            (BehaviorPolicy::AbortSpam, 1, 1),
        ];
        for (behavior, target, views) in cases {
            for seed in 0..5 {
                let mut cfg = view_cfg(4, seed);
                cfg.behaviors[target] = behavior.clone();
                let out = simulate(cfg).unwrap();
                assert!(out.metrics.verdicts.agreement, "{behavior:?}");
                assert_eq!(out.metrics.views_used, Some(views), "{behavior:?} seed {seed}");
                assert_eq!(out.metrics.invariant_violations, 0);
            }
        }
    }

    #[test]
    fn lite_run_has_no_channel_traffic() {
        let mut cfg = SimConfig::new(Protocol::Lite, 4, 1);
        cfg.genesis_outputs = 2;
        let spend = |owner: &str| {
            Payload::Utxo(UtxoBody {
                inputs: vec![Outpoint::genesis(0)],
                outputs: vec![UtxoOutput {
                    owner: owner.into(),
                    amount: 1,
                }],
            })
        };
        cfg.workload = vec![WorkItem::new(0, 0, spend("bob")), WorkItem::new(1, 1, spend("eve"))];
        let out = simulate(cfg).unwrap();
        assert_eq!(out.metrics.total_messages, 0);
        assert!(out.metrics.verdicts.agreement);
        let commits: BTreeSet<TxId> = out
            .trace
            .iter()
            .filter_map(|r| match r {
                TraceRow::Commit { tx, .. } => Some(*tx),
                _ => None,
            })
            .collect();
        assert_eq!(commits, BTreeSet::from([out.transactions[0].id]));
    }

    #[test]
    fn config_validation() {
        let mut cfg = view_cfg(4, 0);
        cfg.horizon = 20;
        assert!(matches!(cfg.validate(), Err(ConfigError::HorizonTooShort { .. })));
        let mut cfg = view_cfg(4, 0);
        cfg.workload[0].targets = Some(vec![ChainId(9)]);
        assert!(matches!(cfg.validate(), Err(ConfigError::UnknownChain { .. })));
    }

    #[test]
    fn same_seed_same_trace() {
        let mut cfg = view_cfg(4, 11);
        cfg.gst = 30;
        cfg.horizon = 400;
        cfg.delay = DelayPolicy::Uniform { max: 20 };
        let a = simulate(cfg.clone()).unwrap();
        let b = simulate(cfg).unwrap();
        assert_eq!(a.trace_text, b.trace_text);
    }

    #[test]
    fn crashed_destination_drops() {
        let mut cfg = view_cfg(4, 0);
        cfg.behaviors[2] = BehaviorPolicy::Crash { at_view: ViewNumber(0) };
        let out = simulate(cfg).unwrap();
        assert!(out
            .trace
            .iter()
            .any(|r| matches!(r, TraceRow::Drop { dst: ChainId(2), .. })));
        assert!(out.metrics.all_ok());
    }
}
