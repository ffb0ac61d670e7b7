// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Declarative scenario files (TOML).
//!
//! ```toml
//! schema = "trustboost-scenario/1"
//! protocol = "trustboost-view"
//! m = 4
//! f = 1
//! attack = "crash-primary"
//!
//! [[workload]]
//! tick = 0
//! process = 0
//! name = { op = "buy", name = "alice.eth", owner = "alice" }
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;
use trustboost_core::ccc::DelayPolicy;
use trustboost_core::chain::{Audience, BehaviorPolicy, Script, ScriptAction, ScriptRule};
use trustboost_core::lite::{Outpoint, UtxoBody, UtxoOutput};
use trustboost_core::sim::{workload_transactions, ConfigError, Protocol, SimConfig, WorkItem};
use trustboost_core::{BinaryValue, ChainId, NameOp, Payload, ProcessId, Tick, TxIdGen, ViewNumber};

pub const SCENARIO_SCHEMA: &str = "trustboost-scenario/1";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("unsupported schema {found:?} (expected {SCENARIO_SCHEMA:?})")]
    Schema { found: String },
    #[error("field `protocol`: unknown protocol {0:?}")]
    Protocol(String),
    #[error("field `attack`: unknown attack {0:?}")]
    Attack(String),
    #[error("field `attack_target`: chain {target} does not exist (m = {m})")]
    AttackTarget { target: u32, m: usize },
    #[error("workload[{item}]: {message}")]
    Workload { item: usize, message: String },
    #[error("override on chain {chain}: {message}")]
    Override { chain: u32, message: String },
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: String,
    pub protocol: String,
    #[serde(default = "four")]
    pub m: usize,
    #[serde(default = "one")]
    pub f: usize,
    #[serde(default)]
    pub gst: Tick,
    #[serde(default = "two")]
    pub delta: Tick,
    #[serde(default = "one_tick")]
    pub block_interval: Tick,
    pub timeout: Option<Tick>,
    pub ping_interval: Option<Tick>,
    pub attack: Option<String>,
    pub attack_target: Option<u32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: Tick,
    #[serde(default = "two_processes")]
    pub processes: u32,
    #[serde(default)]
    pub genesis_outputs: u32,
    #[serde(default)]
    pub delay: DelaySpec,
    #[serde(default)]
    pub workload: Vec<TxSpec>,
    /// Inline per-chain reveal/hide overrides; the chain becomes scripted.
    #[serde(default, rename = "override")]
    pub overrides: Vec<OverrideSpec>,
}

fn four() -> usize {
    4
}
fn one() -> usize {
    1
}
fn two() -> Tick {
    2
}
fn one_tick() -> Tick {
    1
}
fn default_horizon() -> Tick {
    200
}
fn two_processes() -> u32 {
    2
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DelaySpec {
    #[default]
    None,
    Uniform {
        max: Tick,
    },
    Maximal,
    HoldLinks {
        links: Vec<(u32, u32)>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxSpec {
    pub tick: Tick,
    #[serde(default)]
    pub process: u32,
    pub name: Option<NameOp>,
    pub utxo: Option<UtxoSpec>,
    pub value: Option<BinaryValue>,
    pub raw: Option<String>,
    pub entry: Option<u32>,
    pub targets: Option<Vec<u32>>,
    #[serde(default = "yes")]
    pub expected: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtxoSpec {
    pub inputs: Vec<InputSpec>,
    pub outputs: Vec<UtxoOutput>,
}

/// A spent output: a genesis mint entry, or output `index` of workload item `item`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum InputSpec {
    Genesis {
        genesis: u32,
    },
    Item {
        item: usize,
        #[serde(default)]
        index: u32,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideSpec {
    pub chain: u32,
    #[serde(default)]
    pub from: Tick,
    #[serde(default = "both")]
    pub audience: Audience,
    pub action: OverrideAction,
    /// Workload item the action refers to (reveal/hide).
    pub item: Option<usize>,
    pub key: Option<String>,
    pub value: Option<String>,
}

fn both() -> Audience {
    Audience::Both
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverrideAction {
    Reveal,
    Hide,
    ForgeState,
    Crash,
}

/// Contents of a `scripted:<file>` attack.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptFile {
    pub chain: u32,
    #[serde(default)]
    pub rules: Vec<ScriptFileRule>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptFileRule {
    #[serde(default)]
    pub from: Tick,
    #[serde(default = "both")]
    pub audience: Audience,
    pub action: OverrideAction,
    pub item: Option<usize>,
    pub key: Option<String>,
    pub value: Option<String>,
}

/// What a config asks for once parsed.
#[derive(Clone, Debug)]
pub enum Plan {
    Simulate(Box<SimConfig>),
    Theory(String),
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, ScenarioError> {
    toml::from_str(text).map_err(|e| ScenarioError::Parse {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let cfg: ScenarioConfig = parse(path, &read(path)?)?;
        if cfg.schema != SCENARIO_SCHEMA {
            return Err(ScenarioError::Schema { found: cfg.schema });
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let cfg: ScenarioConfig = parse(Path::new("<inline>"), text)?;
        if cfg.schema != SCENARIO_SCHEMA {
            return Err(ScenarioError::Schema { found: cfg.schema });
        }
        Ok(cfg)
    }

    /// Resolves the config into a runnable plan. `base` is the directory that
    /// relative script paths are resolved against.
    pub fn plan(&self, base: &Path) -> Result<Plan, ScenarioError> {
        if let Some(name) = self.protocol.strip_prefix("theory:") {
            return Ok(Plan::Theory(name.to_string()));
        }
        let protocol =
            Protocol::from_name(&self.protocol).ok_or_else(|| ScenarioError::Protocol(self.protocol.clone()))?;
        let mut sim = SimConfig::new(protocol, self.m, self.f);
        sim.gst = self.gst;
        sim.delta = self.delta;
        sim.block_interval = self.block_interval;
        sim.timeout = self.timeout;
        sim.ping_interval = self.ping_interval;
        sim.seed = self.seed;
        sim.horizon = self.horizon;
        sim.processes = self.processes;
        sim.genesis_outputs = self.genesis_outputs;
        sim.delay = match &self.delay {
            DelaySpec::None => DelayPolicy::None,
            DelaySpec::Uniform { max } => DelayPolicy::Uniform { max: *max },
            DelaySpec::Maximal => DelayPolicy::Maximal,
            DelaySpec::HoldLinks { links } => {
                DelayPolicy::HoldLinks(links.iter().map(|(a, b)| (ChainId(*a), ChainId(*b))).collect())
            }
        };
        sim.workload = self.workload_items()?;
        let txs = workload_transactions(&sim.workload);
        let resolve = |chain: u32, item: Option<usize>| {
            let item = item.ok_or_else(|| ScenarioError::Override {
                chain,
                message: "reveal/hide needs `item`".into(),
            })?;
            txs.get(item).map(|t| t.id).ok_or_else(|| ScenarioError::Override {
                chain,
                message: format!("no workload item {item}"),
            })
        };
        let to_rule = |chain: u32,
                       from: Tick,
                       audience: Audience,
                       action: OverrideAction,
                       item: Option<usize>,
                       key: &Option<String>,
                       value: &Option<String>|
         -> Result<ScriptRule, ScenarioError> {
            let action = match action {
                OverrideAction::Reveal => ScriptAction::Reveal {
                    tx: resolve(chain, item)?,
                },
                OverrideAction::Hide => ScriptAction::Hide {
                    tx: resolve(chain, item)?,
                },
                OverrideAction::ForgeState => match (key, value) {
                    (Some(key), Some(value)) => ScriptAction::ForgeState {
                        key: key.clone(),
                        value: value.clone(),
                    },
                    _ => {
                        return Err(ScenarioError::Override {
                            chain,
                            message: "forge-state needs `key` and `value`".into(),
                        })
                    }
                },
                OverrideAction::Crash => ScriptAction::Crash,
            };
            Ok(ScriptRule { from, audience, action })
        };

        if let Some(attack) = &self.attack {
            let (default_target, behavior) = match attack.as_str() {
                "crash-primary" => (0, BehaviorPolicy::Crash { at_view: ViewNumber(0) }),
                "equivocate-primary" => (0, BehaviorPolicy::EquivocatePropose),
                "equivocate-nonprimary" => (1, BehaviorPolicy::EquivocateVote),
                "abort-spam" => (1, BehaviorPolicy::AbortSpam),
                "split-brain" => (
                    self.m.saturating_sub(1) as u32,
                    BehaviorPolicy::SplitBrainValue {
                        x: BinaryValue::One,
                        y: BinaryValue::Zero,
                    },
                ),
                other => match other.strip_prefix("scripted:") {
                    Some(file) => {
                        let path = base.join(file);
                        let script: ScriptFile = parse(&path, &read(&path)?)?;
                        let rules = script
                            .rules
                            .iter()
                            .map(|r| to_rule(script.chain, r.from, r.audience, r.action, r.item, &r.key, &r.value))
                            .collect::<Result<Vec<_>, _>>()?;
                        (script.chain, BehaviorPolicy::Scripted(Script::new(rules)))
                    }
                    None => return Err(ScenarioError::Attack(other.to_string())),
                },
            };
            let target = self.attack_target.unwrap_or(default_target);
            if target as usize >= self.m {
                return Err(ScenarioError::AttackTarget { target, m: self.m });
            }
            sim.behaviors[target as usize] = behavior;
        }
        for o in &self.overrides {
            if o.chain as usize >= self.m {
                return Err(ScenarioError::Override {
                    chain: o.chain,
                    message: format!("chain does not exist (m = {})", self.m),
                });
            }
            let rule = to_rule(o.chain, o.from, o.audience, o.action, o.item, &o.key, &o.value)?;
            match &mut sim.behaviors[o.chain as usize] {
                BehaviorPolicy::Scripted(script) => script.rules.push(rule),
                b @ BehaviorPolicy::Honest => *b = BehaviorPolicy::Scripted(Script::new(vec![rule])),
                _ => {
                    return Err(ScenarioError::Override {
                        chain: o.chain,
                        message: "chain already runs a non-scripted attack".into(),
                    })
                }
            }
        }
        sim.validate()?;
        Ok(Plan::Simulate(Box::new(sim)))
    }

    fn workload_items(&self) -> Result<Vec<WorkItem>, ScenarioError> {
        // ids of earlier items, assigned exactly as the simulator will
        let mut gen = TxIdGen::new();
        let mut ids = Vec::new();
        let mut items = Vec::new();
        for (i, spec) in self.workload.iter().enumerate() {
            let err = |message: String| ScenarioError::Workload { item: i, message };
            let given = [
                spec.name.is_some(),
                spec.utxo.is_some(),
                spec.value.is_some(),
                spec.raw.is_some(),
            ]
            .iter()
            .filter(|b| **b)
            .count();
            if given != 1 {
                return Err(err("exactly one of `name`, `utxo`, `value`, `raw` is required".into()));
            }
            let payload = if let Some(op) = &spec.name {
                Payload::Name(op.clone())
            } else if let Some(u) = &spec.utxo {
                let inputs = u
                    .inputs
                    .iter()
                    .map(|input| match input {
                        InputSpec::Genesis { genesis } => Ok(Outpoint::genesis(*genesis)),
                        InputSpec::Item { item, index } => ids
                            .get(*item)
                            .map(|tx| Outpoint { tx: *tx, index: *index })
                            .ok_or_else(|| err(format!("input refers to item {item}, which is not earlier"))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Payload::Utxo(UtxoBody {
                    inputs,
                    outputs: u.outputs.clone(),
                })
            } else if let Some(v) = spec.value {
                Payload::Value(v)
            } else {
                Payload::Raw(spec.raw.clone().unwrap_or_default())
            };
            ids.push(gen.make(payload.clone(), ProcessId(spec.process)).id);
            items.push(WorkItem {
                tick: spec.tick,
                process: ProcessId(spec.process),
                payload,
                entry: spec.entry.map(ChainId),
                targets: spec.targets.as_ref().map(|t| t.iter().copied().map(ChainId).collect()),
                expected: spec.expected,
            });
        }
        Ok(items)
    }
}
