// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Cross-chain communication: authenticated, reliable, per-link FIFO channels under
//! partial synchrony.
//!
//! Handlers never write to the channel directly. They stage sends in a
//! [`MessageQueue`] that is flushed in one piece when the handler returns, and a send
//! addressed to the sending chain itself comes back as a [`SendOutcome::SelfDelivery`]
//! for the handler to apply locally.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{BinaryValue, ChainId, Tick, Transaction, TxId, ViewNumber};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MsgKind {
    Propose,
    Vote,
    Echo,
    Key1,
    Abort,
    Ping,
    Raw,
}

impl MsgKind {
    pub const ALL: [MsgKind; 7] = [
        MsgKind::Propose,
        MsgKind::Vote,
        MsgKind::Echo,
        MsgKind::Key1,
        MsgKind::Abort,
        MsgKind::Ping,
        MsgKind::Raw,
    ];
}

impl fmt::Display for MsgKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Body {
    Empty,
    Tx(Transaction),
    Value(BinaryValue),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CccMessage {
    pub src: ChainId,
    pub dst: ChainId,
    pub kind: MsgKind,
    pub view: Option<ViewNumber>,
    /// Ledger slot the message is about (view engine only).
    pub slot: Option<u64>,
    pub body: Body,
}

impl CccMessage {
    pub fn new(
        src: ChainId,
        dst: ChainId,
        kind: MsgKind,
        view: Option<ViewNumber>,
        slot: Option<u64>,
        body: Body,
    ) -> Result<Self, CccError> {
        let ok = match kind {
            MsgKind::Propose | MsgKind::Vote | MsgKind::Echo | MsgKind::Key1 => {
                matches!(body, Body::Tx(_))
            }
            MsgKind::Abort => view.is_some(),
            MsgKind::Ping | MsgKind::Raw => true,
        };
        if !ok {
            return Err(CccError::Malformed(kind));
        }
        Ok(CccMessage {
            src,
            dst,
            kind,
            view,
            slot,
            body,
        })
    }

    pub fn tx(&self) -> Option<&Transaction> {
        match &self.body {
            Body::Tx(tx) => Some(tx),
            _ => None,
        }
    }

    pub fn tx_id(&self) -> Option<TxId> {
        self.tx().map(|t| t.id)
    }

    pub fn value(&self) -> Option<BinaryValue> {
        match self.body {
            Body::Value(v) => Some(v),
            _ => None,
        }
    }

    /// Same message re-addressed.
    pub fn to(&self, dst: ChainId) -> CccMessage {
        CccMessage { dst, ..self.clone() }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CccError {
    #[error("destination {dst} out of range for {m} chains")]
    UnknownChain { dst: ChainId, m: usize },
    #[error("{claimed} cannot send on behalf of {owner}")]
    Forged { claimed: ChainId, owner: ChainId },
    #[error("{0} message has the wrong body")]
    Malformed(MsgKind),
}

#[derive(Debug, PartialEq, Eq)]
pub enum SendOutcome {
    Staged,
    /// Addressed to the sender: no channel message; apply the effect locally.
    SelfDelivery(CccMessage),
}

/// Sends accumulated during one handler invocation.
#[derive(Debug)]
pub struct MessageQueue {
    owner: ChainId,
    m: usize,
    staged: Vec<CccMessage>,
}

impl MessageQueue {
    pub fn new(owner: ChainId, m: usize) -> Self {
        MessageQueue {
            owner,
            m,
            staged: Vec::new(),
        }
    }

    pub fn owner(&self) -> ChainId {
        self.owner
    }

    pub fn chain_count(&self) -> usize {
        self.m
    }

    pub fn ccc_send(&mut self, msg: CccMessage) -> Result<SendOutcome, CccError> {
        if msg.src != self.owner {
            return Err(CccError::Forged {
                claimed: msg.src,
                owner: self.owner,
            });
        }
        if msg.dst.index() >= self.m {
            return Err(CccError::UnknownChain {
                dst: msg.dst,
                m: self.m,
            });
        }
        if msg.dst == msg.src {
            return Ok(SendOutcome::SelfDelivery(msg));
        }
        self.staged.push(msg);
        Ok(SendOutcome::Staged)
    }

    /// Stages `template` for every chain but the owner. The caller handles its own copy.
    pub fn broadcast(&mut self, template: &CccMessage) {
        for dst in ChainId::all(self.m).filter(|&d| d != self.owner) {
            self.staged.push(template.to(dst));
        }
    }

    pub fn staged(&self) -> &[CccMessage] {
        &self.staged
    }

    pub fn staged_mut(&mut self) -> &mut Vec<CccMessage> {
        &mut self.staged
    }

    pub fn is_empty(&self) -> bool {
        self.staged.is_empty()
    }

    pub fn len(&self) -> usize {
        self.staged.len()
    }

    pub fn into_staged(self) -> Vec<CccMessage> {
        self.staged
    }
}

/// Extra pre-GST delay chosen by the adversary.
#[derive(Clone, Default)]
pub enum DelayPolicy {
    #[default]
    None,
    /// Uniform extra delay in `[0, max]`, derived from the run seed.
    Uniform {
        max: Tick,
    },
    /// Every message lands at the latest tick the synchrony bound allows.
    Maximal,
    /// Listed directed links are held back as long as allowed; others are untouched.
    HoldLinks(Vec<(ChainId, ChainId)>),
    Custom(DelayFn),
}

/// Extra pre-GST delay for a message sent at the given tick; delivery is still capped at the deadline.
pub type DelayFn = Arc<dyn Fn(&CccMessage, Tick) -> Tick + Send + Sync>;

impl fmt::Debug for DelayPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DelayPolicy::None => write!(f, "None"),
            DelayPolicy::Uniform { max } => write!(f, "Uniform({max})"),
            DelayPolicy::Maximal => write!(f, "Maximal"),
            DelayPolicy::HoldLinks(l) => write!(f, "HoldLinks({l:?})"),
            DelayPolicy::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynchronyConfig {
    pub gst: Tick,
    pub delta: Tick,
    pub policy: DelayPolicy,
}

impl SynchronyConfig {
    pub fn synchronous(delta: Tick) -> Self {
        SynchronyConfig {
            gst: 0,
            delta,
            policy: DelayPolicy::None,
        }
    }

    /// Latest admissible delivery tick for a message sent at `sent_at`.
    pub fn deadline(&self, sent_at: Tick) -> Tick {
        sent_at.max(self.gst) + self.delta.max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InFlight {
    pub msg: CccMessage,
    pub seq: u64,
    pub sent_at: Tick,
    pub deliver_at: Tick,
}

#[derive(Clone, Debug, Default)]
struct Link {
    next_seq: u64,
    last_deliver_at: Tick,
    queue: VecDeque<InFlight>,
    delivered: u64,
}

/// All links of one simulation.
#[derive(Clone, Debug, Default)]
pub struct ChannelState {
    links: BTreeMap<(ChainId, ChainId), Link>,
    flushes: u64,
}

/// 64-bit mix used to derive per-message randomness independent of other traffic.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn message_rng(seed: u64, src: ChainId, dst: ChainId, seq: u64) -> ChaCha8Rng {
    let key = mix(seed ^ mix(((src.0 as u64) << 32 | dst.0 as u64) ^ mix(seq)));
    ChaCha8Rng::seed_from_u64(key)
}

impl ChannelState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Moves a handler's staged batch into the channel. Every message gets
    /// `deliver_at = now + base + extra`, clipped to the synchrony deadline and kept
    /// non-decreasing per link. Base latency is in `[1, delta]`, drawn from the seed and
    /// the message's link position only.
    pub fn schedule_flush(
        &mut self,
        staged: MessageQueue,
        now: Tick,
        sync: &SynchronyConfig,
        seed: u64,
    ) -> Vec<InFlight> {
        let batch = staged.into_staged();
        if batch.is_empty() {
            return Vec::new();
        }
        self.flushes += 1;
        let delta = sync.delta.max(1);
        let mut scheduled = Vec::with_capacity(batch.len());
        for msg in batch {
            let link = self.links.entry((msg.src, msg.dst)).or_default();
            let seq = link.next_seq;
            link.next_seq += 1;
            let mut rng = message_rng(seed, msg.src, msg.dst, seq);
            let base: Tick = rng.gen_range(1..=delta);
            let deadline = sync.deadline(now);
            let extra = if now < sync.gst {
                match &sync.policy {
                    DelayPolicy::None => 0,
                    DelayPolicy::Uniform { max } => rng.gen_range(0..=*max),
                    DelayPolicy::Maximal => deadline,
                    DelayPolicy::HoldLinks(links) => {
                        if links.contains(&(msg.src, msg.dst)) {
                            deadline
                        } else {
                            0
                        }
                    }
                    DelayPolicy::Custom(f) => f(&msg, now),
                }
            } else {
                0
            };
            let deliver_at = (now + base)
                .saturating_add(extra)
                .min(deadline)
                .max(link.last_deliver_at)
                .max(now + 1);
            link.last_deliver_at = deliver_at;
            let inflight = InFlight {
                msg,
                seq,
                sent_at: now,
                deliver_at,
            };
            link.queue.push_back(inflight.clone());
            scheduled.push(inflight);
        }
        scheduled
    }

    /// Removes and returns every message due at or before `now`, ordered by
    /// `(deliver_at, src, dst, link seq)`.
    pub fn due(&mut self, now: Tick) -> Vec<InFlight> {
        let mut out = Vec::new();
        for link in self.links.values_mut() {
            while link.queue.front().is_some_and(|f| f.deliver_at <= now) {
                link.delivered += 1;
                out.push(link.queue.pop_front().expect("front exists"));
            }
        }
        out.sort_by_key(|f| (f.deliver_at, f.msg.src, f.msg.dst, f.seq));
        out
    }

    pub fn in_flight(&self) -> usize {
        self.links.values().map(|l| l.queue.len()).sum()
    }

    /// Messages still in flight on links whose endpoints both satisfy `pred`.
    pub fn in_flight_between(&self, pred: impl Fn(ChainId) -> bool) -> usize {
        self.links
            .iter()
            .filter(|((s, d), _)| pred(*s) && pred(*d))
            .map(|(_, l)| l.queue.len())
            .sum()
    }

    pub fn next_delivery(&self) -> Option<Tick> {
        self.links
            .values()
            .filter_map(|l| l.queue.front().map(|f| f.deliver_at))
            .min()
    }

    /// `(sent, delivered)` per link.
    pub fn link_counts(&self) -> BTreeMap<(ChainId, ChainId), (u64, u64)> {
        self.links
            .iter()
            .map(|(k, l)| (*k, (l.next_seq, l.delivered)))
            .collect()
    }

    pub fn flush_count(&self) -> u64 {
        self.flushes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(src: u32, dst: u32) -> CccMessage {
        CccMessage::new(ChainId(src), ChainId(dst), MsgKind::Raw, None, None, Body::Empty).unwrap()
    }

    #[test]
    fn self_send_is_not_staged() {
        let mut q = MessageQueue::new(ChainId(0), 4);
        let out = q.ccc_send(raw(0, 0)).unwrap();
        assert!(matches!(out, SendOutcome::SelfDelivery(_)));
        assert!(q.is_empty());
    }

    #[test]
    fn send_errors() {
        let mut q = MessageQueue::new(ChainId(0), 4);
        assert_eq!(
            q.ccc_send(raw(0, 4)),
            Err(CccError::UnknownChain { dst: ChainId(4), m: 4 })
        );
        assert!(matches!(q.ccc_send(raw(1, 2)), Err(CccError::Forged { .. })));
    }

    #[test]
    fn malformed_bodies_rejected() {
        assert!(CccMessage::new(ChainId(0), ChainId(1), MsgKind::Vote, None, None, Body::Empty).is_err());
        assert!(CccMessage::new(ChainId(0), ChainId(1), MsgKind::Abort, None, None, Body::Empty).is_err());
    }

    #[test]
    fn post_gst_within_delta() {
        let sync = SynchronyConfig::synchronous(3);
        for seed in 0..50 {
            let mut ch = ChannelState::new();
            let mut q = MessageQueue::new(ChainId(0), 2);
            q.ccc_send(raw(0, 1)).unwrap();
            let s = ch.schedule_flush(q, 5, &sync, seed);
            assert!((6..=8).contains(&s[0].deliver_at), "{}", s[0].deliver_at);
        }
    }

    #[test]
    fn pre_gst_maximal_delay_capped() {
        let sync = SynchronyConfig {
            gst: 100,
            delta: 3,
            policy: DelayPolicy::Maximal,
        };
        let mut ch = ChannelState::new();
        let mut q = MessageQueue::new(ChainId(0), 2);
        q.ccc_send(raw(0, 1)).unwrap();
        let s = ch.schedule_flush(q, 0, &sync, 1);
        assert_eq!(s[0].deliver_at, 103);
    }

    #[test]
    fn empty_flush_is_noop() {
        let mut ch = ChannelState::new();
        let s = ch.schedule_flush(MessageQueue::new(ChainId(0), 2), 0, &SynchronyConfig::synchronous(2), 0);
        assert!(s.is_empty());
        assert_eq!(ch.flush_count(), 0);
    }

    #[test]
    fn due_order_is_total() {
        let sync = SynchronyConfig {
            gst: 0,
            delta: 1,
            policy: DelayPolicy::None,
        };
        let mut ch = ChannelState::new();
        let mut q = MessageQueue::new(ChainId(1), 3);
        q.ccc_send(raw(1, 0)).unwrap();
        ch.schedule_flush(q, 0, &sync, 0);
        let mut q = MessageQueue::new(ChainId(0), 3);
        q.ccc_send(raw(0, 2)).unwrap();
        q.ccc_send(raw(0, 1)).unwrap();
        ch.schedule_flush(q, 0, &sync, 0);
        let due = ch.due(1);
        let pairs: Vec<_> = due.iter().map(|f| (f.msg.src.0, f.msg.dst.0)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 0)]);
        assert_eq!(ch.in_flight(), 0);
    }

    proptest! {
        #[test]
        fn synchrony_bound_and_fifo(
            gst in 0u64..40,
            delta in 1u64..6,
            sends in prop::collection::vec((0u64..60, 0u32..3, 0u32..3, 0u64..50), 1..40),
            seed in any::<u64>(),
            uniform in any::<bool>(),
        ) {
            let sync = SynchronyConfig {
                gst,
                delta,
                policy: if uniform { DelayPolicy::Uniform { max: 30 } } else { DelayPolicy::Maximal },
            };
            let mut sends = sends;
            sends.sort_by_key(|s| s.0);
            let mut ch = ChannelState::new();
            let mut all = Vec::new();
            for (now, s, d, _) in sends {
                if s == d { continue; }
                let mut q = MessageQueue::new(ChainId(s), 3);
                q.ccc_send(raw(s, d)).unwrap();
                all.extend(ch.schedule_flush(q, now, &sync, seed));
            }
            for f in &all {
                prop_assert!(f.deliver_at > f.sent_at);
                prop_assert!(f.deliver_at - f.sent_at <= gst.saturating_sub(f.sent_at) + delta);
            }
            for s in 0..3u32 { for d in 0..3u32 {
                let link: Vec<_> = all.iter().filter(|f| f.msg.src.0 == s && f.msg.dst.0 == d).collect();
                for w in link.windows(2) { prop_assert!(w[0].deliver_at <= w[1].deliver_at); }
            }}
            // eventual delivery
            let last = all.iter().map(|f| f.deliver_at).max().unwrap_or(0);
            let delivered = ch.due(last);
            prop_assert_eq!(delivered.len(), all.len());
        }
    }
}
