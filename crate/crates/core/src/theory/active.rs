// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Active mode with a quorum read rule: chains exchange initial values over the
//! channel, each settles on the first value it holds from `m - f` chains (itself
//! included), and a process commits once `m - f` chains report the same settled value.
//! Safe for `m > 3f`; run at `m = 3f` it lets the hybrid adversary split the groups.

use std::collections::BTreeMap;

use super::{ChainRole, TheoryError, TheoryProtocol, Verdict, World};
use crate::ccc::{Body, CccMessage, ChannelState, DelayPolicy, MessageQueue, MsgKind, SynchronyConfig};
use crate::quorum::quorums_for;
use crate::types::{BinaryValue, ChainId, Group, Tick};

/// One honest instance of a chain. A split-brain chain runs one per side.
struct Replica {
    chain: ChainId,
    serves: Option<Group>,
    value: BinaryValue,
    received: BTreeMap<ChainId, BinaryValue>,
    settled: Option<(BinaryValue, Tick)>,
}

impl Replica {
    fn try_settle(&mut self, quorum: usize, now: Tick) {
        if self.settled.is_some() {
            return;
        }
        for v in [self.value, self.value.flip()] {
            let others = self.received.values().filter(|r| **r == v).count();
            if others + usize::from(v == self.value) >= quorum {
                self.settled = Some((v, now));
                return;
            }
        }
    }

    /// Settled value as visible to a reader; settling commits at the next tick.
    fn visible(&self, now: Tick) -> Option<BinaryValue> {
        self.settled.filter(|(_, t)| *t < now).map(|(v, _)| v)
    }

    fn serves_group(&self, g: Group) -> bool {
        self.serves.is_none_or(|s| s == g)
    }
}

pub fn run_active(world: &World) -> Result<Verdict, TheoryError> {
    let m = world.m;
    let quorum = quorums_for(m, world.f).passive_quorum();
    let mut replicas = Vec::new();
    for (i, role) in world.roles.iter().enumerate() {
        let chain = ChainId(i as u32);
        let mut add = |serves, value| {
            replicas.push(Replica {
                chain,
                serves,
                value,
                received: BTreeMap::new(),
                settled: None,
            })
        };
        match role {
            ChainRole::Honest | ChainRole::Pretend => add(None, world.initial_values[i]),
            ChainRole::Crashed => {}
            ChainRole::SplitBrain { x, y } => {
                if let Some(x) = x {
                    add(Some(Group::X), *x);
                }
                if let Some(y) = y {
                    add(Some(Group::Y), *y);
                }
            }
            ChainRole::Policy { .. } => {
                return Err(TheoryError::Unsupported {
                    label: world.label.clone(),
                    role: "policy",
                    protocol: TheoryProtocol::ActiveBft,
                })
            }
        }
    }

    let sync = SynchronyConfig {
        gst: world.gst,
        delta: world.delta,
        policy: DelayPolicy::HoldLinks(world.delay.links.clone()),
    };
    let mut channel = ChannelState::new();
    let mut violations = 0;
    for r in &replicas {
        let mut queue = MessageQueue::new(r.chain, m);
        for dst in ChainId::all(m).filter(|d| *d != r.chain) {
            if r.serves.is_some_and(|g| world.sides[dst.index()] != g) {
                continue;
            }
            let msg = CccMessage::new(r.chain, dst, MsgKind::Raw, None, None, Body::Value(r.value))
                .expect("raw accepts any body");
            queue.ccc_send(msg).expect("destination in range");
        }
        channel.schedule_flush(queue, 0, &sync, world.seed);
    }

    let groups = world.live_groups();
    let mut committed: BTreeMap<Group, Option<BinaryValue>> = groups.iter().map(|g| (*g, None)).collect();
    let mut decided_at: BTreeMap<Group, Option<Tick>> = groups.iter().map(|g| (*g, None)).collect();
    let mut observations: BTreeMap<Group, Vec<String>> = groups.iter().map(|g| (*g, Vec::new())).collect();
    for now in 0..=world.horizon() {
        for f in channel.due(now) {
            if f.deliver_at > sync.deadline(f.sent_at) {
                violations += 1;
            }
            let Some(v) = f.msg.value() else { continue };
            let side = world.sides[f.msg.src.index()];
            for r in replicas
                .iter_mut()
                .filter(|r| r.chain == f.msg.dst && r.serves_group(side))
            {
                r.received.insert(f.msg.src, v);
                r.try_settle(quorum, now);
            }
        }
        for r in &mut replicas {
            r.try_settle(quorum, now);
        }
        for &g in &groups {
            if committed[&g].is_some() {
                continue;
            }
            let reads: Vec<Option<BinaryValue>> = ChainId::all(m)
                .map(|c| {
                    if now < world.gst && world.delay.reads.contains(&(c, g)) {
                        return None;
                    }
                    replicas
                        .iter()
                        .find(|r| r.chain == c && r.serves_group(g))
                        .and_then(|r| r.visible(now))
                })
                .collect();
            let line = reads
                .iter()
                .enumerate()
                .map(|(i, r)| format!("chain{i}={}", r.map_or("-".to_string(), |v| v.to_string())))
                .collect::<Vec<_>>()
                .join(" ");
            observations
                .get_mut(&g)
                .expect("live group")
                .push(format!("t{now} {line}"));
            let pick = [BinaryValue::Zero, BinaryValue::One]
                .into_iter()
                .find(|v| reads.iter().filter(|r| **r == Some(*v)).count() >= quorum);
            if let Some(v) = pick {
                committed.insert(g, Some(v));
                decided_at.insert(g, Some(now));
            }
        }
        if committed.values().all(Option::is_some) {
            break;
        }
    }
    let mut verdict = Verdict::judge(
        world,
        TheoryProtocol::ActiveBft,
        committed,
        decided_at,
        observations,
        false,
    );
    verdict.invariant_violations = violations;
    Ok(verdict)
}
