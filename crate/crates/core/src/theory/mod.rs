// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Executable possibility and impossibility arguments for client consensus over
//! ledger objects.
//!
//! A [`World`] fixes initial values, which chains are faulty and how, and what the
//! adversary delays. [`run_world`] executes one protocol inside it and reports what
//! each process group committed. Hybrid worlds splice two base worlds; comparing the
//! per-group observation logs of a hybrid against its bases demonstrates that the
//! groups cannot tell them apart.

mod active;
mod boosted;
mod combiner;
mod passive;
pub mod scenarios;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::BehaviorPolicy;
use crate::types::{BinaryValue, ChainId, Group, Tick};

pub use active::run_active;
pub use boosted::{random_boosted_world, run_boosted};
pub use combiner::{combiner_counterexample, relative_settlement, CombinerOutcome, CombinerVariant};
pub use passive::{passive_abc_quorum, passive_consensus_f0, run_passive};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoryProtocol {
    /// Read every chain; commit the common value if unanimous, else 0.
    PassiveF0,
    /// Commit `v` once `m - f` chains report `v`.
    PassiveAbc,
    /// Chains exchange values and settle on `m - f` matching ones; processes commit
    /// on `m - f` matching reads.
    ActiveBft,
    /// Values ordered by the view engine; processes commit on `floor(m/3) + 1` reads.
    Trustboost,
}

/// How a chain behaves in a world.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "kebab-case")]
pub enum ChainRole {
    Honest,
    Crashed,
    /// Byzantine, but behaves exactly like an honest chain with its initial value.
    Pretend,
    /// Byzantine; acts toward group X (and X-side chains) as if its value were `x`,
    /// toward Y as if it were `y`. `None` means it stays silent toward that side.
    SplitBrain {
        x: Option<BinaryValue>,
        y: Option<BinaryValue>,
    },
    /// Byzantine with an arbitrary engine-level policy (view-engine worlds only).
    Policy {
        policy: BehaviorPolicy,
    },
}

impl ChainRole {
    pub fn is_faulty(&self) -> bool {
        !matches!(self, ChainRole::Honest)
    }

    pub fn split(x: BinaryValue, y: BinaryValue) -> Self {
        ChainRole::SplitBrain { x: Some(x), y: Some(y) }
    }
}

/// What the adversary holds back until GST.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayPlan {
    /// Directed chain-to-chain links.
    pub links: Vec<(ChainId, ChainId)>,
    /// Reads of a chain by a process group.
    pub reads: Vec<(ChainId, Group)>,
    /// Uniform extra pre-GST delay bound on every other link.
    #[serde(default)]
    pub jitter: Tick,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct World {
    pub label: String,
    pub m: usize,
    pub f: usize,
    pub initial_values: Vec<BinaryValue>,
    pub roles: Vec<ChainRole>,
    /// Which group's world each chain belongs to; split-brain chains key their
    /// chain-to-chain messages on it.
    pub sides: Vec<Group>,
    pub crashed_groups: Vec<Group>,
    pub delay: DelayPlan,
    pub gst: Tick,
    pub delta: Tick,
    /// Decision deadline; defaults to `gst + 10 * delta`.
    pub horizon: Option<Tick>,
    pub seed: u64,
    /// Labels of the base worlds a hybrid splices (X's world, Y's world).
    pub hybrid_of: Option<(String, String)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TheoryError {
    #[error("world {label}: expected {m} entries in {field}, got {got}")]
    Length {
        label: String,
        field: &'static str,
        m: usize,
        got: usize,
    },
    #[error("world {label}: {faulty} faulty chains exceed f = {f}")]
    TooManyFaulty { label: String, faulty: usize, f: usize },
    #[error("world {label}: delay plan names {chain}, but m = {m}")]
    UnknownChain { label: String, chain: ChainId, m: usize },
    #[error("world {label}: {role} chains are not supported by {protocol:?}")]
    Unsupported {
        label: String,
        role: &'static str,
        protocol: TheoryProtocol,
    },
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
}

impl World {
    /// All-honest world with every chain on side X.
    pub fn new(label: &str, m: usize, f: usize, initial_values: Vec<BinaryValue>) -> Self {
        World {
            label: label.to_string(),
            m,
            f,
            roles: vec![ChainRole::Honest; initial_values.len()],
            sides: vec![Group::X; initial_values.len()],
            initial_values,
            crashed_groups: Vec::new(),
            delay: DelayPlan::default(),
            gst: 50,
            delta: 2,
            horizon: None,
            seed: 0,
            hybrid_of: None,
        }
    }

    pub fn horizon(&self) -> Tick {
        self.horizon.unwrap_or(self.gst + 10 * self.delta)
    }

    pub fn faulty(&self) -> usize {
        self.roles.iter().filter(|r| r.is_faulty()).count()
    }

    pub fn live_groups(&self) -> Vec<Group> {
        [Group::X, Group::Y]
            .into_iter()
            .filter(|g| !self.crashed_groups.contains(g))
            .collect()
    }

    /// Initial values of the honest chains.
    pub fn honest_values(&self) -> Vec<BinaryValue> {
        self.roles
            .iter()
            .zip(&self.initial_values)
            .filter(|(r, _)| !r.is_faulty())
            .map(|(_, v)| *v)
            .collect()
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        let len = |field, got| {
            if got == self.m {
                Ok(())
            } else {
                Err(TheoryError::Length {
                    label: self.label.clone(),
                    field,
                    m: self.m,
                    got,
                })
            }
        };
        len("initial_values", self.initial_values.len())?;
        len("roles", self.roles.len())?;
        len("sides", self.sides.len())?;
        if self.faulty() > self.f {
            return Err(TheoryError::TooManyFaulty {
                label: self.label.clone(),
                faulty: self.faulty(),
                f: self.f,
            });
        }
        let named = self
            .delay
            .links
            .iter()
            .flat_map(|(a, b)| [*a, *b])
            .chain(self.delay.reads.iter().map(|(c, _)| *c));
        for chain in named {
            if chain.index() >= self.m {
                return Err(TheoryError::UnknownChain {
                    label: self.label.clone(),
                    chain,
                    m: self.m,
                });
            }
        }
        Ok(())
    }
}

/// Outcome of one world run, available once the horizon has passed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub world: String,
    pub protocol: TheoryProtocol,
    pub committed: BTreeMap<Group, Option<BinaryValue>>,
    pub decided_at: BTreeMap<Group, Option<Tick>>,
    pub agreement_ok: bool,
    pub validity_ok: bool,
    pub termination_ok: bool,
    /// What each group observed up to its decision, one line per observation.
    pub observations: BTreeMap<Group, Vec<String>>,
    pub invariant_violations: u64,
}

impl Verdict {
    pub fn all_ok(&self) -> bool {
        self.agreement_ok && self.validity_ok && self.termination_ok && self.invariant_violations == 0
    }

    pub fn value(&self, g: Group) -> Option<BinaryValue> {
        self.committed.get(&g).copied().flatten()
    }

    /// Fills in the three property flags from the committed values. Termination is
    /// required of every live group, or only when the honest chains are unanimous if
    /// `honest_only` is set.
    pub(crate) fn judge(
        world: &World,
        protocol: TheoryProtocol,
        committed: BTreeMap<Group, Option<BinaryValue>>,
        decided_at: BTreeMap<Group, Option<Tick>>,
        observations: BTreeMap<Group, Vec<String>>,
        honest_only: bool,
    ) -> Verdict {
        let values: Vec<BinaryValue> = committed.values().flatten().copied().collect();
        let agreement_ok = values.windows(2).all(|w| w[0] == w[1]);
        let honest = world.honest_values();
        let unanimous = honest.first().filter(|v| honest.iter().all(|h| h == *v)).copied();
        let validity_ok = match unanimous {
            Some(v) => values.iter().all(|c| *c == v),
            None => true,
        };
        let termination_required = !honest_only || unanimous.is_some();
        let termination_ok = !termination_required || committed.values().all(Option::is_some);
        Verdict {
            world: world.label.clone(),
            protocol,
            committed,
            decided_at,
            agreement_ok,
            validity_ok,
            termination_ok,
            observations,
            invariant_violations: 0,
        }
    }
}

/// Runs `protocol` inside `world`.
pub fn run_world(world: &World, protocol: TheoryProtocol) -> Result<Verdict, TheoryError> {
    world.validate()?;
    match protocol {
        TheoryProtocol::PassiveF0 | TheoryProtocol::PassiveAbc => run_passive(world, protocol),
        TheoryProtocol::ActiveBft => run_active(world),
        TheoryProtocol::Trustboost => run_boosted(world),
    }
}

/// True iff `group` saw exactly the same thing in both runs.
pub fn indistinguishable(a: &Verdict, b: &Verdict, group: Group) -> bool {
    a.observations.get(&group) == b.observations.get(&group)
}
