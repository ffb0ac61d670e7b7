// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Named built-in scenarios and exhaustive adversary searches.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    combiner_counterexample, indistinguishable, random_boosted_world, run_world, ChainRole, CombinerOutcome,
    CombinerVariant, DelayPlan, TheoryError, TheoryProtocol, Verdict, World,
};
use crate::chain::{Audience, BehaviorPolicy, LedgerObject, Script, ScriptAction, ScriptRule};
use crate::lite::{utxo_tx, LiteClient, Outpoint, UtxoOutput};
use crate::quorum::quorums_for;
use crate::types::{Asker, BinaryValue, ChainId, Group, ProcessId, Tick, Transaction, TxIdGen, ViewNumber};

use BinaryValue::{One, Zero};

pub const SCENARIOS: [&str; 5] = [
    "passive-split",
    "passive-quorum",
    "active-hybrid",
    "active-hybrid-abc",
    "relative-settlement",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewCheck {
    pub hybrid: String,
    pub base: String,
    pub group: Group,
    pub identical: bool,
}

/// Result of a batch of runs that must all pass.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchCheck {
    pub description: String,
    pub runs: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl BatchCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn from_results(description: &str, results: Vec<Result<(), String>>) -> Self {
        let failures: Vec<String> = results.into_iter().filter_map(Result::err).collect();
        BatchCheck {
            description: description.to_string(),
            runs: 0,
            failures: failures.len(),
            first_failure: failures.into_iter().next(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    /// The scenario exists to exhibit a violation.
    pub expects_violation: bool,
    pub violation_found: bool,
    pub worlds: Vec<Verdict>,
    pub views: Vec<ViewCheck>,
    pub batches: Vec<BatchCheck>,
    pub combiner: Vec<CombinerOutcome>,
}

impl ScenarioReport {
    /// Every assertion the scenario makes holds.
    pub fn confirmed(&self) -> bool {
        self.violation_found == self.expects_violation
            && self.views.iter().all(|v| v.identical)
            && self.batches.iter().all(BatchCheck::passed)
            && self.worlds.iter().all(|w| w.invariant_violations == 0)
    }
}

pub fn run_scenario(name: &str) -> Result<ScenarioReport, TheoryError> {
    match name {
        "passive-split" => passive_split(2),
        "passive-quorum" => passive_quorum(),
        "active-hybrid" => active_hybrid(false),
        "active-hybrid-abc" => active_hybrid(true),
        "relative-settlement" => Ok(relative_settlement_scenario()),
        other => Err(TheoryError::UnknownScenario(other.to_string())),
    }
}

fn view_check(hybrid: &Verdict, base: &Verdict, group: Group) -> ViewCheck {
    ViewCheck {
        hybrid: hybrid.world.clone(),
        base: base.world.clone(),
        group,
        identical: indistinguishable(hybrid, base, group),
    }
}

fn bits(m: usize, mask: u32) -> Vec<BinaryValue> {
    (0..m).map(|i| BinaryValue::from_bit(mask >> i & 1 == 1)).collect()
}

/// Passive consensus with `f = 1` claimed: the chain of worlds 1.0..1.m, then the
/// hybrid that splits the groups at the flip point.
pub fn passive_split(m: usize) -> Result<ScenarioReport, TheoryError> {
    let protocol = TheoryProtocol::PassiveF0;
    let mut chain = Vec::new();
    for i in 0..=m {
        let values = (0..m).map(|k| if k < i { Zero } else { One }).collect();
        chain.push(run_world(&World::new(&format!("world-1.{i}"), m, 1, values), protocol)?);
    }
    let j = (0..m)
        .find(|&j| chain[j].value(Group::X) == Some(One) && chain[j + 1].value(Group::X) == Some(Zero))
        .expect("validity forces a flip between world 1.0 and world 1.m");
    let mut hybrid = World::new(
        "world-2",
        m,
        1,
        (0..m).map(|k| if k <= j { Zero } else { One }).collect(),
    );
    hybrid.roles[j] = ChainRole::split(Zero, One);
    hybrid.hybrid_of = Some((chain[j + 1].world.clone(), chain[j].world.clone()));
    let w2 = run_world(&hybrid, protocol)?;
    let views = vec![
        view_check(&w2, &chain[j + 1], Group::X),
        view_check(&w2, &chain[j], Group::Y),
    ];

    let positive: Vec<Result<(), String>> = (1..=4usize)
        .flat_map(|m| (0..1u32 << m).map(move |mask| (m, mask)))
        .map(|(m, mask)| {
            let v = run_world(&World::new("f0-honest", m, 0, bits(m, mask)), protocol).map_err(|e| e.to_string())?;
            v.all_ok().then_some(()).ok_or(format!("m={m} values={mask:b}: {v:?}"))
        })
        .collect();
    let mut batch = BatchCheck::from_results("passive f=0 protocol, all-honest worlds, m <= 4", positive);
    batch.runs = (1..=4).map(|m| 1usize << m).sum();

    let violation_found = !w2.agreement_ok;
    let mut worlds = chain;
    worlds.push(w2);
    Ok(ScenarioReport {
        name: "passive-split".into(),
        expects_violation: true,
        violation_found,
        worlds,
        views,
        batches: vec![batch],
        combiner: Vec::new(),
    })
}

fn passive_quorum() -> Result<ScenarioReport, TheoryError> {
    let protocol = TheoryProtocol::PassiveAbc;
    let mut w1 = World::new("world-1", 3, 1, vec![One, One, Zero]);
    w1.roles[2] = ChainRole::Pretend;
    let mut w2 = World::new("world-2", 3, 1, vec![One, Zero, Zero]);
    w2.roles[0] = ChainRole::Pretend;
    let mut w3 = World::new("world-3", 3, 1, vec![One, One, Zero]);
    w3.roles[1] = ChainRole::split(One, Zero);
    w3.hybrid_of = Some(("world-1".into(), "world-2".into()));
    let (v1, v2, v3) = (
        run_world(&w1, protocol)?,
        run_world(&w2, protocol)?,
        run_world(&w3, protocol)?,
    );
    Ok(ScenarioReport {
        name: "passive-quorum".into(),
        expects_violation: true,
        violation_found: !v3.agreement_ok,
        views: vec![view_check(&v3, &v1, Group::X), view_check(&v3, &v2, Group::Y)],
        worlds: vec![v1, v2, v3],
        batches: vec![passive_abc_exhaustive()],
        combiner: Vec::new(),
    })
}

/// Every adversary choice for the passive quorum at `m = 4, f = 1`: which chain (if
/// any) is Byzantine, the honest initial values, and the Byzantine answer to each
/// group (0, 1 or silence).
pub fn passive_abc_exhaustive() -> BatchCheck {
    let answers = [None, Some(Zero), Some(One)];
    let mut worlds = Vec::new();
    for mask in 0..16u32 {
        worlds.push(World::new(&format!("abc-honest-{mask:04b}"), 4, 1, bits(4, mask)));
    }
    for byz in 0..4usize {
        for mask in 0..8u32 {
            for x in answers {
                for y in answers {
                    let mut values = bits(3, mask);
                    values.insert(byz, Zero);
                    let mut w = World::new(&format!("abc-b{byz}-{mask:03b}-{x:?}-{y:?}"), 4, 1, values);
                    w.roles[byz] = ChainRole::SplitBrain { x, y };
                    worlds.push(w);
                }
            }
        }
    }
    let results = worlds
        .iter()
        .map(|w| {
            let v = run_world(w, TheoryProtocol::PassiveAbc).map_err(|e| e.to_string())?;
            v.all_ok()
                .then_some(())
                .ok_or(format!("{}: {:?}", w.label, v.committed))
        })
        .collect();
    let mut batch = BatchCheck::from_results("passive m-f quorum, every m=4 f=1 adversary", results);
    batch.runs = worlds.len();
    batch
}

fn active_hybrid(abc: bool) -> Result<ScenarioReport, TheoryError> {
    let protocol = TheoryProtocol::ActiveBft;
    let (a, c) = (ChainId(0), ChainId(2));
    let sides = vec![Group::X, Group::X, Group::Y];
    let hybrid_delay = DelayPlan {
        links: vec![(a, c), (c, a)],
        reads: vec![(a, Group::Y), (c, Group::X)],
        jitter: 0,
    };
    let base = |label: &str, values: Vec<BinaryValue>, out: usize, live: Group| {
        let mut w = World::new(label, 3, 1, values);
        w.sides = sides.clone();
        w.crashed_groups = vec![live.other()];
        if abc {
            // out-of-world chain is Byzantine but honest-looking, and held back
            let o = ChainId(out as u32);
            w.roles[out] = ChainRole::Pretend;
            w.delay.links = ChainId::all(3)
                .filter(|k| *k != o)
                .flat_map(|k| [(o, k), (k, o)])
                .collect();
            w.delay.reads = vec![(o, live)];
        } else {
            w.roles[out] = ChainRole::Crashed;
            w.delay = hybrid_delay.clone();
        }
        w
    };
    let w1 = base("world-1", vec![One, One, Zero], 2, Group::X);
    let w2 = base("world-2", vec![One, Zero, Zero], 0, Group::Y);
    let mut w3 = World::new("world-3", 3, 1, vec![One, One, Zero]);
    w3.sides = sides.clone();
    w3.roles[1] = ChainRole::split(One, Zero);
    w3.delay = hybrid_delay;
    w3.hybrid_of = Some(("world-1".into(), "world-2".into()));
    let (v1, v2, v3) = (
        run_world(&w1, protocol)?,
        run_world(&w2, protocol)?,
        run_world(&w3, protocol)?,
    );
    let batches = if abc {
        vec![passive_abc_exhaustive()]
    } else {
        vec![boosted_random(4, 1, 1000, 0), boosted_enumerated()]
    };
    Ok(ScenarioReport {
        name: if abc { "active-hybrid-abc" } else { "active-hybrid" }.into(),
        expects_violation: true,
        violation_found: !v3.agreement_ok,
        views: vec![view_check(&v3, &v1, Group::X), view_check(&v3, &v2, Group::Y)],
        worlds: vec![v1, v2, v3],
        batches,
        combiner: Vec::new(),
    })
}

/// `runs` seeded random adversarial worlds for the view-engine binary protocol.
pub fn boosted_random(m: usize, f: usize, runs: u64, seed_base: u64) -> BatchCheck {
    let results = (seed_base..seed_base + runs)
        .into_par_iter()
        .map(|seed| {
            let w = random_boosted_world(m, f, seed);
            let v = run_world(&w, TheoryProtocol::Trustboost).map_err(|e| e.to_string())?;
            v.all_ok().then_some(()).ok_or(format!("seed {seed}: {v:?}"))
        })
        .collect();
    let mut batch = BatchCheck::from_results(
        &format!("view-engine binary consensus, {runs} random worlds, m={m}"),
        results,
    );
    batch.runs = runs as usize;
    batch
}

/// Every scripted single-fault world for the view-engine binary protocol at `m = 4`.
pub fn boosted_enumerated() -> BatchCheck {
    let mut roles = vec![
        ChainRole::Crashed,
        ChainRole::Policy {
            policy: BehaviorPolicy::Crash { at_view: ViewNumber(1) },
        },
        ChainRole::Policy {
            policy: BehaviorPolicy::EquivocatePropose,
        },
        ChainRole::Policy {
            policy: BehaviorPolicy::EquivocateVote,
        },
        ChainRole::Policy {
            policy: BehaviorPolicy::AbortSpam,
        },
    ];
    for x in [Zero, One] {
        for y in [Zero, One] {
            roles.push(ChainRole::split(x, y));
        }
    }
    let mut worlds = Vec::new();
    for byz in 0..4 {
        for (r, role) in roles.iter().enumerate() {
            for mask in 0..16u32 {
                let mut w = World::new(&format!("boosted-b{byz}-r{r}-{mask:04b}"), 4, 1, bits(4, mask));
                w.roles[byz] = role.clone();
                w.seed = mask as u64;
                w.horizon = Some(400);
                worlds.push(w);
            }
        }
    }
    let results = worlds
        .par_iter()
        .map(|w| {
            let v = run_world(w, TheoryProtocol::Trustboost).map_err(|e| e.to_string())?;
            v.all_ok().then_some(()).ok_or(format!("{}: {v:?}", w.label))
        })
        .collect();
    let mut batch = BatchCheck::from_results("view-engine binary consensus, every scripted m=4 f=1 world", results);
    batch.runs = worlds.len();
    batch
}

fn relative_settlement_scenario() -> ScenarioReport {
    let outcomes: Vec<CombinerOutcome> = [
        CombinerVariant::RevealedToX,
        CombinerVariant::NoConflict,
        CombinerVariant::RevealedToAll,
    ]
    .into_iter()
    .map(combiner_counterexample)
    .collect();
    let pair = |o: &CombinerOutcome, rel: (bool, bool)| {
        (o.relative[&Group::X], o.relative[&Group::Y]) == rel
            && o.lite[&Group::X]
            && o.lite[&Group::Y]
            && !o.lite_accepts_conflict
            && o.invariant_violations == 0
    };
    let expected = [(false, true), (true, true), (false, false)];
    let results = outcomes
        .iter()
        .zip(expected)
        .map(|(o, rel)| pair(o, rel).then_some(()).ok_or(format!("{o:?}")))
        .collect();
    let mut batch = BatchCheck::from_results("relative settlement vs lite check, three variants", results);
    batch.runs = outcomes.len();
    let hidden = &outcomes[0];
    ScenarioReport {
        name: "relative-settlement".into(),
        expects_violation: true,
        violation_found: hidden.relative[&Group::Y] && !hidden.relative[&Group::X],
        worlds: Vec::new(),
        views: Vec::new(),
        batches: vec![batch],
        combiner: outcomes,
    }
}

/// One honest chain's treatment of the conflicting pair: which it sees first and when.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HonestFeed {
    Nothing,
    First { tx: usize, at: Tick },
}

/// The Byzantine chain's claim about one transaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ByzantineClaim {
    Silent,
    Reveal { audience: Audience, from: Tick },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiteSearchReport {
    pub runs: u64,
    /// Process-tick states inspected.
    pub states: u64,
    pub violations: u64,
    pub first_violation: Option<String>,
}

pub const LITE_SEARCH_HORIZON: Tick = 20;
const SECOND_DELAY: Tick = 5;

fn conflicting_pair() -> [Transaction; 2] {
    let mut gen = TxIdGen::new();
    let spend = |gen: &mut TxIdGen, owner: &str, p| {
        utxo_tx(
            gen,
            vec![Outpoint::genesis(0)],
            vec![UtxoOutput {
                owner: owner.into(),
                amount: 1,
            }],
            ProcessId(p),
        )
    };
    [spend(&mut gen, "bob", 0), spend(&mut gen, "eve", 1)]
}

/// Runs one adversary choice; returns the number of process-tick states inspected and
/// whether the honest processes together ever accepted both transactions.
pub fn lite_search_run(byz: usize, feeds: [HonestFeed; 3], claims: [ByzantineClaim; 2]) -> (u64, bool) {
    let txs = conflicting_pair();
    let rules = claims
        .iter()
        .enumerate()
        .filter_map(|(k, c)| match c {
            ByzantineClaim::Silent => None,
            ByzantineClaim::Reveal { audience, from } => Some(ScriptRule {
                from: *from,
                audience: *audience,
                action: ScriptAction::Reveal { tx: txs[k].id },
            }),
        })
        .collect();
    let mut chains: Vec<LedgerObject> = ChainId::all(4).map(LedgerObject::honest).collect();
    chains[byz] = LedgerObject::new(ChainId(byz as u32), BehaviorPolicy::Scripted(Script::new(rules)), 1);
    let honest: Vec<usize> = (0..4).filter(|i| *i != byz).collect();
    let q = quorums_for(4, 1);
    let mut clients = [
        LiteClient::new(Asker::new(0, Group::X), q, 1),
        LiteClient::new(Asker::new(1, Group::Y), q, 1),
    ];
    for c in &mut clients {
        c.learn(&txs[0]);
        c.learn(&txs[1]);
    }
    let mut accepted = [false; 2];
    let mut states = 0;
    for now in 0..=LITE_SEARCH_HORIZON {
        for (feed, &i) in feeds.iter().zip(&honest) {
            if let HonestFeed::First { tx, at } = *feed {
                if now == at {
                    chains[i].local_submit(txs[tx].clone(), now);
                } else if now == at + SECOND_DELAY {
                    chains[i].local_submit(txs[1 - tx].clone(), now);
                }
            }
        }
        for c in &mut chains {
            c.step_block(now);
        }
        for client in &mut clients {
            states += 1;
            for (k, tx) in txs.iter().enumerate() {
                accepted[k] |= client.lite_check(&chains, tx.id, now);
            }
        }
        if accepted[0] && accepted[1] {
            return (states, true);
        }
    }
    (states, false)
}

/// Exhaustive weak-agreement search at `m = 4, f = 1` over every Byzantine position,
/// every honest feed (which of the pair first, at tick 0 or 10, or nothing) and every
/// Byzantine reveal (silent, or to X, Y or both from tick 0, 5, 10 or 15).
pub fn lite_exhaustive_search() -> LiteSearchReport {
    let mut feeds = vec![HonestFeed::Nothing];
    for tx in 0..2 {
        for at in [0, 10] {
            feeds.push(HonestFeed::First { tx, at });
        }
    }
    let mut claims = vec![ByzantineClaim::Silent];
    for audience in [Audience::X, Audience::Y, Audience::Both] {
        for from in [0, 5, 10, 15] {
            claims.push(ByzantineClaim::Reveal { audience, from });
        }
    }
    let mut choices = Vec::new();
    for byz in 0..4 {
        for a in &feeds {
            for b in &feeds {
                for c in &feeds {
                    for x in &claims {
                        for y in &claims {
                            choices.push((byz, [*a, *b, *c], [*x, *y]));
                        }
                    }
                }
            }
        }
    }
    choices
        .par_iter()
        .map(|&(byz, feeds, claims)| {
            let (states, violated) = lite_search_run(byz, feeds, claims);
            LiteSearchReport {
                runs: 1,
                states,
                violations: u64::from(violated),
                first_violation: violated.then(|| format!("byz={byz} feeds={feeds:?} claims={claims:?}")),
            }
        })
        .reduce(LiteSearchReport::default, |a, b| LiteSearchReport {
            runs: a.runs + b.runs,
            states: a.states + b.states,
            violations: a.violations + b.violations,
            first_violation: a.first_violation.or(b.first_violation),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passive_split_at_two_chains() {
        let r = run_scenario("passive-split").unwrap();
        let w2 = r.worlds.last().unwrap();
        assert_eq!(w2.value(Group::X), Some(Zero));
        assert_eq!(w2.value(Group::Y), Some(One));
        assert!(r.confirmed(), "{r:?}");
    }

    #[test]
    fn passive_quorum_violates_at_three_and_holds_at_four() {
        let r = run_scenario("passive-quorum").unwrap();
        assert!(r.violation_found);
        assert!(r.confirmed(), "{r:?}");
        assert!(r.batches[0].runs <= 1 << 12);
    }

    #[test]
    fn active_hybrid_abc_splits() {
        let r = run_scenario("active-hybrid-abc").unwrap();
        let w3 = r.worlds.last().unwrap();
        assert_eq!((w3.value(Group::X), w3.value(Group::Y)), (Some(One), Some(Zero)));
        assert!(r.confirmed(), "{r:?}");
    }

    #[test]
    fn relative_settlement_scenario_confirmed() {
        assert!(run_scenario("relative-settlement").unwrap().confirmed());
    }

    #[test]
    fn split_honest_feed_with_double_reveal_is_safe() {
        // two honest chains hold tx, one holds tx', and the Byzantine chain claims both
        let feeds = [
            HonestFeed::First { tx: 0, at: 0 },
            HonestFeed::First { tx: 0, at: 0 },
            HonestFeed::First { tx: 1, at: 0 },
        ];
        let claims = [
            ByzantineClaim::Reveal {
                audience: Audience::X,
                from: 0,
            },
            ByzantineClaim::Reveal {
                audience: Audience::X,
                from: 0,
            },
        ];
        let (states, violated) = lite_search_run(3, feeds, claims);
        assert!(!violated);
        assert!(states > 0);
    }

    #[test]
    fn unknown_scenario() {
        assert!(matches!(
            run_scenario("no-such-world"),
            Err(TheoryError::UnknownScenario(_))
        ));
    }
}
