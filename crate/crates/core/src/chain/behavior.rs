// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::ReadView;
use crate::types::{BinaryValue, Group, Tick, TxId, ViewNumber};

/// How a chain behaves for the whole run. Everything but `Honest` is Byzantine.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BehaviorPolicy {
    Honest,
    /// Stops responding once it enters `at_view`.
    Crash {
        at_view: ViewNumber,
    },
    /// As leader, sends a different proposal to each other chain.
    EquivocatePropose,
    /// Sends the real vote to half the chains and a forged one to the rest.
    EquivocateVote,
    /// Broadcasts an abort for its current view on every ping.
    AbortSpam,
    /// Answers group X as if its value were `x` and group Y as if it were `y`.
    SplitBrainValue {
        x: BinaryValue,
        y: BinaryValue,
    },
    Scripted(Script),
}

impl BehaviorPolicy {
    pub fn is_honest(&self) -> bool {
        matches!(self, BehaviorPolicy::Honest)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Audience {
    X,
    Y,
    Both,
}

impl Audience {
    pub fn includes(self, group: Group) -> bool {
        match self {
            Audience::Both => true,
            Audience::X => group == Group::X,
            Audience::Y => group == Group::Y,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum ScriptAction {
    /// Claim `tx` is committed.
    Reveal {
        tx: TxId,
    },
    /// Deny `tx` even if it is in the log.
    Hide {
        tx: TxId,
    },
    /// Report `key = value` in reads.
    ForgeState {
        key: String,
        value: String,
    },
    Crash,
}

/// One row of the event→action table: from tick `from` on, `action` applies to askers
/// in `audience`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default)]
    pub from: Tick,
    #[serde(default = "both")]
    pub audience: Audience,
    #[serde(flatten)]
    pub action: ScriptAction,
}

fn both() -> Audience {
    Audience::Both
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default)]
    pub rules: Vec<ScriptRule>,
}

impl Script {
    pub fn new(rules: Vec<ScriptRule>) -> Self {
        Script { rules }
    }

    fn active(&self, group: Group, now: Tick) -> impl Iterator<Item = &ScriptRule> {
        self.rules
            .iter()
            .filter(move |r| r.from <= now && r.audience.includes(group))
    }

    /// Scripted override for `check(tx)`; the latest-starting matching rule wins.
    pub fn visibility(&self, tx: TxId, group: Group, now: Tick) -> Option<bool> {
        self.active(group, now)
            .filter_map(|r| match r.action {
                ScriptAction::Reveal { tx: t } if t == tx => Some((r.from, true)),
                ScriptAction::Hide { tx: t } if t == tx => Some((r.from, false)),
                _ => None,
            })
            .max_by_key(|(from, _)| *from)
            .map(|(_, v)| v)
    }

    pub fn revealed(&self, group: Group, now: Tick) -> Vec<TxId> {
        let mut out = Vec::new();
        for r in self.active(group, now) {
            if let ScriptAction::Reveal { tx } = r.action {
                if self.visibility(tx, group, now) == Some(true) && !out.contains(&tx) {
                    out.push(tx);
                }
            }
        }
        out
    }

    pub fn rewrite_read(&self, view: &mut ReadView, group: Group, now: Tick) {
        for r in self.active(group, now) {
            if let ScriptAction::ForgeState { key, value } = &r.action {
                view.state_snapshot.insert(key.clone(), value.clone());
            }
        }
    }

    pub fn crash_at(&self) -> Option<Tick> {
        self.rules
            .iter()
            .filter(|r| r.action == ScriptAction::Crash)
            .map(|r| r.from)
            .min()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn later_rule_wins() {
        let s = Script::new(vec![
            ScriptRule {
                from: 0,
                audience: Audience::Both,
                action: ScriptAction::Reveal { tx: TxId(7) },
            },
            ScriptRule {
                from: 3,
                audience: Audience::Y,
                action: ScriptAction::Hide { tx: TxId(7) },
            },
        ]);
        assert_eq!(s.visibility(TxId(7), Group::Y, 2), Some(true));
        assert_eq!(s.visibility(TxId(7), Group::Y, 3), Some(false));
        assert_eq!(s.visibility(TxId(7), Group::X, 3), Some(true));
        assert_eq!(s.visibility(TxId(8), Group::X, 3), None);
    }

    #[test]
    fn script_parses_from_toml_like_json() {
        let s: Script = serde_json::from_str(
            r#"{"rules":[{"from":2,"audience":"x","action":"reveal","tx":"0000000000000009"},
                         {"action":"crash","from":10}]}"#,
        )
        .unwrap();
        assert_eq!(s.rules.len(), 2);
        assert_eq!(s.crash_at(), Some(10));
        assert_eq!(s.rules[1].audience, Audience::Both);
    }
}
