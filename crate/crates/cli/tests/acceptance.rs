// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite: one PASS/FAIL line per criterion, with pinned bounds.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use trustboost_cli::commands::{replay, run_sim, scenario_status, Status};
use trustboost_cli::config::{Plan, ScenarioConfig};
use trustboost_cli::sweep::{honest_config, sweep, REFERENCE_COUNTS};
use trustboost_core::ccc::DelayPolicy;
use trustboost_core::chain::BehaviorPolicy;
use trustboost_core::lite::{Outpoint, UtxoBody, UtxoOutput};
use trustboost_core::theory::scenarios::{lite_exhaustive_search, run_scenario, ScenarioReport};
use trustboost_core::{
    quorums_for, simulate, BinaryValue, ChainId, Group, Payload, Protocol, SimConfig, ViewNumber, WorkItem,
};

const ATTACK_SEEDS: u64 = 100;
const TREND_TOLERANCE: f64 = 0.20;
const RANDOM_WORLD_RUNS: usize = 1000;
const ENUMERATION_LIMIT: usize = 1 << 12;
const DETERMINISM_CONFIGS: u64 = 20;

struct Suite {
    failed: usize,
    /// Invariant violations and failed checked runs, criteria 2 to 7.
    violations: u64,
    checked_runs: u64,
}

impl Suite {
    fn criterion(&mut self, n: u8, bound: Option<Duration>, body: impl FnOnce(&mut Suite) -> Result<String, String>) {
        let start = Instant::now();
        let result = body(self);
        let elapsed = start.elapsed();
        let (ok, detail) = match (result, bound) {
            (Ok(d), Some(b)) if elapsed > b => (false, format!("{d}; too slow ({elapsed:.1?} > {b:?})")),
            (Ok(d), _) => (true, d),
            (Err(d), _) => (false, d),
        };
        let bound = bound.map_or(String::new(), |b| format!(" / bound {b:?}"));
        println!(
            "{} criterion {n}: {detail} [{elapsed:.2?}{bound}]",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            self.failed += 1;
        }
    }

    fn tally_report(&mut self, r: &ScenarioReport) {
        for w in &r.worlds {
            self.violations += w.invariant_violations;
            self.checked_runs += 1;
        }
        for b in &r.batches {
            self.violations += b.failures as u64;
            self.checked_runs += b.runs as u64;
        }
        for c in &r.combiner {
            self.violations += c.invariant_violations;
            self.checked_runs += 1;
        }
    }
}

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    cond.then_some(()).ok_or_else(|| what.into())
}

fn quorums() -> Result<String, String> {
    for m in 1..=50usize {
        let q = quorums_for(m, (m.max(1) - 1) / 3);
        // smallest counts strictly above two thirds and one third of m
        let vote = (1..=m + 1).find(|v| 3 * v > 2 * m).unwrap();
        let chk = (1..=m + 1).find(|c| 3 * c > m).unwrap();
        check(
            q.vote_threshold == vote,
            format!("m={m}: vote {} != {vote}", q.vote_threshold),
        )?;
        check(
            q.check_threshold == chk,
            format!("m={m}: check {} != {chk}", q.check_threshold),
        )?;
        check(
            q.lite_threshold == vote,
            format!("m={m}: lite {} != {vote}", q.lite_threshold),
        )?;
    }
    let spot = |m| {
        let q = quorums_for(m, (m - 1) / 3);
        (q.vote_threshold, q.check_threshold)
    };
    check(spot(4) == (3, 2), format!("m=4 gives {:?}", spot(4)))?;
    check(spot(10) == (7, 4), format!("m=10 gives {:?}", spot(10)))?;
    Ok("thresholds for m=1..50 match; m=4 -> (3, 2), m=10 -> (7, 4)".into())
}

fn attack_config(attack: &str, seed: u64) -> SimConfig {
    let text = format!(
        "schema = \"trustboost-scenario/1\"\nprotocol = \"trustboost-view\"\nm = 4\nf = 1\nseed = {seed}\n\
         attack = \"{attack}\"\n\n[[workload]]\ntick = 0\nname = {{ op = \"buy\", name = \"a.eth\", owner = \"alice\" }}\n"
    );
    match ScenarioConfig::from_toml(&text).unwrap().plan(Path::new(".")).unwrap() {
        Plan::Simulate(cfg) => *cfg,
        Plan::Theory(_) => unreachable!(),
    }
}

fn attacks(suite: &mut Suite) -> Result<String, String> {
    let mut summary = Vec::new();
    for (attack, views) in [
        ("crash-primary", 2),
        ("equivocate-primary", 2),
        ("equivocate-nonprimary", 1),
        ("abort-spam", 1),
    ] {
        let mut agree = 0;
        for seed in 0..ATTACK_SEEDS {
            let m = simulate(attack_config(attack, seed))
                .map_err(|e| e.to_string())?
                .metrics;
            suite.violations += m.invariant_violations;
            suite.checked_runs += 1;
            agree += u64::from(m.verdicts.agreement);
            check(
                m.views_used == Some(views),
                format!("{attack} seed {seed}: views {:?}, expected {views}", m.views_used),
            )?;
            check(m.verdicts.termination, format!("{attack} seed {seed}: no decision"))?;
        }
        check(
            agree == ATTACK_SEEDS,
            format!("{attack}: agreement in {agree}/{ATTACK_SEEDS}"),
        )?;
        summary.push(format!("{attack} {views}v"));
    }
    Ok(format!(
        "agreement {ATTACK_SEEDS}/{ATTACK_SEEDS} per attack; {}",
        summary.join(", ")
    ))
}

fn scaling(suite: &mut Suite) -> Result<String, String> {
    let report = sweep(&[4, 7, 10], 3, 0).map_err(|e| e.to_string())?;
    for p in &report.points {
        let closed = ((p.m - 1) * (3 * p.m + 1)) as f64;
        check(
            p.mean_messages == closed,
            format!("m={}: {} messages, expected {closed}", p.m, p.mean_messages),
        )?;
        check(p.all_ok, format!("m={}: verdicts failed", p.m))?;
        suite.checked_runs += p.reps;
    }
    let reference = REFERENCE_COUNTS.1 as f64 / REFERENCE_COUNTS.0 as f64;
    let ours = report.points[2].mean_messages / report.points[0].mean_messages;
    let gap = (ours - reference).abs() / reference;
    check(
        gap <= TREND_TOLERANCE,
        format!("ratio {ours:.2} vs {reference:.2}: gap {gap:.3}"),
    )?;
    let fit = report.fit.as_ref().ok_or("no fit")?;
    check(!fit.flagged, format!("count/m^2 spread {:.3} above band", fit.spread))?;
    Ok(format!(
        "counts 39/132/279; m=10/m=4 ratio {ours:.2} vs reference {reference:.2} (gap {:.1}%, tolerance {:.0}%)",
        gap * 100.0,
        TREND_TOLERANCE * 100.0
    ))
}

fn first_impossibility(suite: &mut Suite) -> Result<String, String> {
    let r = run_scenario("passive-split").map_err(|e| e.to_string())?;
    suite.tally_report(&r);
    let w2 = r.worlds.last().ok_or("no worlds")?;
    let split = (w2.value(Group::X), w2.value(Group::Y));
    check(
        split == (Some(BinaryValue::Zero), Some(BinaryValue::One)),
        format!("split-brain world committed {split:?}"),
    )?;
    check(r.confirmed(), "passive f=0 scenario not confirmed")?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let code = Command::new(env!("CARGO_BIN_EXE_trustboost"))
        .args(["--scenario", "passive-split", "--out"])
        .arg(dir.path())
        .output()
        .map_err(|e| e.to_string())?
        .status
        .code();
    check(code == Some(2), format!("binary exited with {code:?}"))?;

    let abc = run_scenario("passive-quorum").map_err(|e| e.to_string())?;
    suite.tally_report(&abc);
    check(abc.violation_found, "quorum ABC not violated at m=3")?;
    let batch = &abc.batches[0];
    check(
        batch.passed(),
        format!("m=4 enumeration failed: {:?}", batch.first_failure),
    )?;
    check(
        batch.runs <= ENUMERATION_LIMIT,
        format!("{} adversary choices", batch.runs),
    )?;
    check(
        scenario_status(&abc) == Status::ExpectedViolation,
        "passive-quorum not confirmed",
    )?;
    Ok(format!(
        "f=0 split X=0 Y=1, exit 2; quorum ABC violated at m=3, holds over {} m=4 adversaries",
        batch.runs
    ))
}

fn second_impossibility(suite: &mut Suite) -> Result<String, String> {
    let r = run_scenario("active-hybrid").map_err(|e| e.to_string())?;
    suite.tally_report(&r);
    let w3 = r.worlds.last().ok_or("no worlds")?;
    let split = (w3.value(Group::X), w3.value(Group::Y));
    check(
        split == (Some(BinaryValue::One), Some(BinaryValue::Zero)),
        format!("hybrid world committed {split:?}"),
    )?;
    check(
        r.views.iter().all(|v| v.identical),
        "hybrid views differ from base worlds",
    )?;
    let random = &r.batches[0];
    check(random.runs == RANDOM_WORLD_RUNS, format!("{} random runs", random.runs))?;
    for b in &r.batches {
        check(b.passed(), format!("{}: {:?}", b.description, b.first_failure))?;
    }
    Ok(format!(
        "active m=3 hybrid X=1 Y=0; view engine passes {} random + {} enumerated m=4 worlds",
        random.runs, r.batches[1].runs
    ))
}

fn spend(genesis: u32, owner: &str) -> Payload {
    Payload::Utxo(UtxoBody {
        inputs: vec![Outpoint::genesis(genesis)],
        outputs: vec![UtxoOutput {
            owner: owner.into(),
            amount: 1,
        }],
    })
}

fn lite(suite: &mut Suite) -> Result<String, String> {
    let search = lite_exhaustive_search();
    suite.checked_runs += search.runs;
    check(
        search.violations == 0,
        format!("{} violations, first {:?}", search.violations, search.first_violation),
    )?;
    let mut worst = 0.0f64;
    let mut runs = 0;
    for block_interval in 1..=4 {
        for crashed in [None, Some(0), Some(3)] {
            for offset in 0..block_interval {
                let mut cfg = SimConfig::new(Protocol::Lite, 4, 1);
                cfg.block_interval = block_interval;
                cfg.genesis_outputs = 2;
                cfg.seed = offset;
                if let Some(c) = crashed {
                    cfg.behaviors[c] = BehaviorPolicy::Crash { at_view: ViewNumber(0) };
                }
                cfg.workload = vec![
                    WorkItem::new(offset, 0, spend(0, "bob")),
                    WorkItem::new(offset + 1, 1, spend(1, "carol")),
                ];
                let m = simulate(cfg).map_err(|e| e.to_string())?.metrics;
                suite.violations += m.invariant_violations;
                suite.checked_runs += 1;
                runs += 1;
                check(
                    m.all_ok(),
                    format!("no-conflict run bi={block_interval} crashed={crashed:?} failed"),
                )?;
                let ticks = m.ticks_to_commit.ok_or("no commit latency")?;
                check(
                    ticks <= 2 * block_interval,
                    format!("commit after {ticks} ticks with block interval {block_interval}"),
                )?;
                worst = worst.max(ticks as f64 / block_interval as f64);
            }
        }
    }
    Ok(format!(
        "{} adversaries, {} states, 0 double accepts; {runs} no-conflict runs commit within {worst:.1} block intervals",
        search.runs, search.states
    ))
}

fn combiner(suite: &mut Suite) -> Result<String, String> {
    let r = run_scenario("relative-settlement").map_err(|e| e.to_string())?;
    suite.tally_report(&r);
    let hidden = r.combiner.first().ok_or("no combiner outcome")?;
    let rel = (hidden.relative[&Group::X], hidden.relative[&Group::Y]);
    let lite = (hidden.lite[&Group::X], hidden.lite[&Group::Y]);
    check(rel == (false, true), format!("relative settlement {rel:?}"))?;
    check(lite == (true, true), format!("lite {lite:?}"))?;
    check(!hidden.lite_accepts_conflict, "lite accepted the conflicting tx")?;
    check(r.confirmed(), "variants disagree with expectations")?;
    Ok("relative settlement: X withholds, Y commits; lite commits for X and Y".into())
}

fn random_config(i: u64) -> SimConfig {
    let protocol = [Protocol::TrustboostView, Protocol::TrustboostSkeleton, Protocol::Lite][i as usize % 3];
    let m = [4, 7][(i / 3) as usize % 2];
    let mut cfg = honest_config(m, 1000 + i);
    cfg.protocol = protocol;
    cfg.gst = i % 4 * 5;
    cfg.horizon = 400;
    cfg.delay = DelayPolicy::Uniform { max: i % 7 };
    match protocol {
        Protocol::Lite => {
            cfg.genesis_outputs = 2;
            cfg.workload = vec![
                WorkItem::new(0, 0, spend(0, "bob")),
                WorkItem::new(2, 1, spend(1, "eve")),
            ];
        }
        Protocol::TrustboostView => {
            cfg.behaviors[1] = match i % 4 {
                0 => BehaviorPolicy::Honest,
                1 => BehaviorPolicy::EquivocateVote,
                2 => BehaviorPolicy::AbortSpam,
                _ => BehaviorPolicy::Crash { at_view: ViewNumber(0) },
            };
        }
        Protocol::TrustboostSkeleton => {
            let mut second = cfg.workload[0].clone();
            second.tick = 3;
            second.entry = Some(ChainId(1));
            second.payload = Payload::Raw("memo".into());
            cfg.workload.push(second);
        }
    }
    cfg
}

fn determinism() -> Result<String, String> {
    for i in 0..DETERMINISM_CONFIGS {
        let a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let b = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut ma = run_sim(random_config(i), a.path()).map_err(|e| e.to_string())?;
        let mut mb = run_sim(random_config(i), b.path()).map_err(|e| e.to_string())?;
        let bytes = |d: &Path| std::fs::read(d.join("trace.jsonl")).unwrap();
        check(bytes(a.path()) == bytes(b.path()), format!("config {i}: traces differ"))?;
        ma.trace_path = None;
        mb.trace_path = None;
        check(ma == mb, format!("config {i}: metrics differ"))?;
        let r = replay(&a.path().join("trace.jsonl")).map_err(|e| e.to_string())?;
        check(r.matches_original == Some(true), format!("config {i}: replay differs"))?;
    }
    Ok(format!(
        "{DETERMINISM_CONFIGS} configs: byte-identical traces, replayed metrics equal"
    ))
}

fn main() -> ExitCode {
    let mut suite = Suite {
        failed: 0,
        violations: 0,
        checked_runs: 0,
    };
    suite.criterion(1, Some(Duration::from_secs(1)), |_| quorums());
    suite.criterion(2, Some(Duration::from_secs(60)), attacks);
    suite.criterion(3, None, scaling);
    suite.criterion(4, Some(Duration::from_secs(60)), first_impossibility);
    suite.criterion(5, None, second_impossibility);
    suite.criterion(6, Some(Duration::from_secs(120)), lite);
    suite.criterion(7, None, combiner);
    suite.criterion(8, Some(Duration::from_secs(60)), |_| determinism());
    let (violations, runs) = (suite.violations, suite.checked_runs);
    suite.criterion(9, None, |_| {
        check(violations == 0, format!("{violations} violations over {runs} runs"))
            .map(|_| format!("0 invariant violations over {runs} runs of criteria 2-7"))
    });
    if suite.failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", suite.failed);
        ExitCode::FAILURE
    }
}
