// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use super::{ChainRole, TheoryError, TheoryProtocol, Verdict, World};
use crate::quorum::{quorums_for, Quorums};
use crate::types::{BinaryValue, ChainId, Group};

/// Commits the common value of `reads` if they are unanimous and 0 otherwise.
pub fn passive_consensus_f0(reads: &[BinaryValue]) -> BinaryValue {
    match reads.first() {
        Some(v) if reads.iter().all(|r| r == v) => *v,
        _ => BinaryValue::Zero,
    }
}

/// The value reported by at least `m - f` chains, if any. Absent answers count for
/// nothing.
pub fn passive_abc_quorum(reads: &[Option<BinaryValue>], q: Quorums) -> Option<BinaryValue> {
    [BinaryValue::Zero, BinaryValue::One]
        .into_iter()
        .find(|v| reads.iter().filter(|r| **r == Some(*v)).count() >= q.passive_quorum())
}

/// What chain `i` answers group `g` at tick 0.
fn answer(world: &World, i: usize, g: Group) -> Option<BinaryValue> {
    if world.delay.reads.contains(&(ChainId(i as u32), g)) && world.gst > 0 {
        return None;
    }
    match &world.roles[i] {
        ChainRole::Honest | ChainRole::Pretend => Some(world.initial_values[i]),
        ChainRole::Crashed | ChainRole::Policy { .. } => None,
        ChainRole::SplitBrain { x, y } => match g {
            Group::X => *x,
            Group::Y => *y,
        },
    }
}

/// Passive mode: processes only read; chains never talk to each other.
pub fn run_passive(world: &World, protocol: TheoryProtocol) -> Result<Verdict, TheoryError> {
    if world.roles.iter().any(|r| matches!(r, ChainRole::Policy { .. })) {
        return Err(TheoryError::Unsupported {
            label: world.label.clone(),
            role: "policy",
            protocol,
        });
    }
    let q = quorums_for(world.m, world.f);
    let mut committed = BTreeMap::new();
    let mut decided_at = BTreeMap::new();
    let mut observations = BTreeMap::new();
    for g in world.live_groups() {
        let reads: Vec<Option<BinaryValue>> = (0..world.m).map(|i| answer(world, i, g)).collect();
        observations.insert(
            g,
            reads
                .iter()
                .enumerate()
                .map(|(i, r)| format!("chain{i}={}", r.map_or("-".to_string(), |v| v.to_string())))
                .collect(),
        );
        let value = match protocol {
            TheoryProtocol::PassiveF0 => reads
                .iter()
                .copied()
                .collect::<Option<Vec<_>>>()
                .map(|all| passive_consensus_f0(&all)),
            _ => passive_abc_quorum(&reads, q),
        };
        committed.insert(g, value);
        decided_at.insert(g, value.map(|_| 0));
    }
    let honest_only = protocol == TheoryProtocol::PassiveAbc;
    Ok(Verdict::judge(
        world,
        protocol,
        committed,
        decided_at,
        observations,
        honest_only,
    ))
}
