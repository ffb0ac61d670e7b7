// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Binary consensus on top of the view engine: every honest chain's initial value is
//! submitted as a value transaction, the chains order them, and each chain's state
//! keeps the first one. A process commits `v` once `floor(m/3) + 1` chains report `v`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ChainRole, DelayPlan, TheoryError, TheoryProtocol, Verdict, World};
use crate::ccc::DelayPolicy;
use crate::chain::{Audience, BehaviorPolicy, Script, ScriptAction, ScriptRule, VALUE_KEY};
use crate::quorum::quorums_for;
use crate::sim::{simulate, Protocol, SimConfig, WorkItem};
use crate::trace::TraceRow;
use crate::types::{Asker, BinaryValue, ChainId, Group, Payload, Tick, TxId, ViewNumber};

fn behavior_of(role: &ChainRole) -> BehaviorPolicy {
    match role {
        ChainRole::Honest | ChainRole::Pretend => BehaviorPolicy::Honest,
        ChainRole::Crashed => BehaviorPolicy::Crash { at_view: ViewNumber(0) },
        ChainRole::SplitBrain { x: Some(x), y: Some(y) } => BehaviorPolicy::SplitBrainValue { x: *x, y: *y },
        ChainRole::SplitBrain { x, y } => {
            let forge = |audience, v: &Option<BinaryValue>| {
                v.map(|v| ScriptRule {
                    from: 0,
                    audience,
                    action: ScriptAction::ForgeState {
                        key: VALUE_KEY.to_string(),
                        value: v.bit().to_string(),
                    },
                })
            };
            let rules = [forge(Audience::X, x), forge(Audience::Y, y)]
                .into_iter()
                .flatten()
                .collect();
            BehaviorPolicy::Scripted(Script::new(rules))
        }
        ChainRole::Policy { policy } => policy.clone(),
    }
}

pub fn run_boosted(world: &World) -> Result<Verdict, TheoryError> {
    let m = world.m;
    let q = quorums_for(m, world.f);
    let mut cfg = SimConfig::new(Protocol::TrustboostView, m, world.f);
    cfg.gst = world.gst;
    cfg.delta = world.delta;
    cfg.seed = world.seed;
    cfg.horizon = world.horizon().max(world.gst + 10 * world.delta + 1);
    cfg.behaviors = world.roles.iter().map(behavior_of).collect();
    cfg.delay = if !world.delay.links.is_empty() {
        DelayPolicy::HoldLinks(world.delay.links.clone())
    } else if world.delay.jitter > 0 {
        DelayPolicy::Uniform {
            max: world.delay.jitter,
        }
    } else {
        DelayPolicy::None
    };
    cfg.workload = world
        .roles
        .iter()
        .zip(&world.initial_values)
        .enumerate()
        .filter(|(_, (r, _))| !r.is_faulty())
        .map(|(i, (_, v))| WorkItem::new(i as Tick, (i % 2) as u32, Payload::Value(*v)))
        .collect();
    let out = simulate(cfg).expect("world validated");

    // tick from which each chain reports a value: its first committed value tx
    let value_txs: BTreeSet<TxId> = out
        .transactions
        .iter()
        .filter(|t| matches!(t.payload, Payload::Value(_)))
        .map(|t| t.id)
        .collect();
    let mut since: Vec<Option<Tick>> = vec![None; m];
    for row in &out.trace {
        if let TraceRow::Block { tick, chain, txs } = row {
            if since[chain.index()].is_none() && txs.iter().any(|t| value_txs.contains(t)) {
                since[chain.index()] = Some(*tick);
            }
        }
    }

    let mut committed = BTreeMap::new();
    let mut decided_at = BTreeMap::new();
    let mut observations = BTreeMap::new();
    for g in world.live_groups() {
        let asker = Asker::new(if g == Group::X { 0 } else { 1 }, g);
        let reads: Vec<Option<BinaryValue>> = ChainId::all(m)
            .map(|c| {
                if out.end_tick < world.gst && world.delay.reads.contains(&(c, g)) {
                    None
                } else {
                    out.chains[c.index()].read_value(asker, out.end_tick)
                }
            })
            .collect();
        observations.insert(
            g,
            reads
                .iter()
                .enumerate()
                .map(|(i, r)| format!("chain{i}={}", r.map_or("-".to_string(), |v| v.to_string())))
                .collect(),
        );
        let pick = [BinaryValue::Zero, BinaryValue::One]
            .into_iter()
            .find(|v| reads.iter().filter(|r| **r == Some(*v)).count() >= q.check_threshold);
        let at = pick.and_then(|v| {
            let mut ticks: Vec<Tick> = reads
                .iter()
                .enumerate()
                .filter(|(_, r)| **r == Some(v))
                .map(|(i, _)| since[i].unwrap_or(0))
                .collect();
            ticks.sort_unstable();
            ticks.get(q.check_threshold - 1).copied()
        });
        committed.insert(g, pick);
        decided_at.insert(g, at);
    }
    let mut verdict = Verdict::judge(
        world,
        TheoryProtocol::Trustboost,
        committed,
        decided_at,
        observations,
        false,
    );
    verdict.agreement_ok &= out.metrics.verdicts.agreement;
    verdict.validity_ok &= out.metrics.verdicts.validity;
    verdict.invariant_violations = out.metrics.invariant_violations;
    Ok(verdict)
}

/// A seeded random world with at most `f` Byzantine chains, random initial values,
/// random GST and pre-GST jitter.
pub fn random_boosted_world(m: usize, f: usize, seed: u64) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<BinaryValue> = (0..m).map(|_| BinaryValue::from_bit(rng.gen())).collect();
    let mut world = World::new(&format!("random-{seed}"), m, f, values);
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut rng);
    for &i in idx.iter().take(rng.gen_range(0..=f)) {
        let bit = |rng: &mut ChaCha8Rng| BinaryValue::from_bit(rng.gen());
        world.roles[i] = match rng.gen_range(0..6) {
            0 => ChainRole::Crashed,
            1 => ChainRole::Policy {
                policy: BehaviorPolicy::Crash {
                    at_view: ViewNumber(rng.gen_range(1..4)),
                },
            },
            2 => ChainRole::Policy {
                policy: BehaviorPolicy::EquivocatePropose,
            },
            3 => ChainRole::Policy {
                policy: BehaviorPolicy::EquivocateVote,
            },
            4 => ChainRole::Policy {
                policy: BehaviorPolicy::AbortSpam,
            },
            _ => ChainRole::split(bit(&mut rng), bit(&mut rng)),
        };
    }
    world.gst = rng.gen_range(0..=60);
    world.delay = DelayPlan {
        jitter: rng.gen_range(0..=20),
        ..DelayPlan::default()
    };
    world.seed = seed;
    world.horizon = Some(world.gst + 400);
    world
}
