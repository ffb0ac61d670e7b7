// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Consensusless UTXO ledger over `m` independent chains.
//!
//! Clients submit every transaction to every chain directly; no cross-chain traffic
//! is ever generated. A client accepts `tx` once at least `floor(2m/3) + 1` chains
//! report it committed and every input's source transaction is itself accepted.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{LedgerObject, SubmitAck};
use crate::quorum::Quorums;
use crate::types::{Asker, Payload, ProcessId, Tick, Transaction, TxId, TxIdGen};

/// Reference to output `index` of transaction `tx`. Outputs minted at genesis use
/// [`TxId::GENESIS`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Outpoint {
    pub tx: TxId,
    pub index: u32,
}

impl Outpoint {
    pub fn genesis(index: u32) -> Self {
        Outpoint {
            tx: TxId::GENESIS,
            index,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UtxoOutput {
    pub owner: String,
    pub amount: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UtxoBody {
    pub inputs: Vec<Outpoint>,
    pub outputs: Vec<UtxoOutput>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LiteError {
    #[error("transaction {0} is not a UTXO transaction")]
    NotUtxo(TxId),
    #[error("transaction {0} has no inputs")]
    NoInputs(TxId),
    #[error("transaction {0} spends {1:?} twice")]
    DuplicateInput(TxId, Outpoint),
}

pub fn utxo_tx(
    gen: &mut TxIdGen,
    inputs: Vec<Outpoint>,
    outputs: Vec<UtxoOutput>,
    submitter: ProcessId,
) -> Transaction {
    gen.make(Payload::Utxo(UtxoBody { inputs, outputs }), submitter)
}

/// Structural validity: a UTXO payload with at least one input and no repeated outpoint.
pub fn validate(tx: &Transaction) -> Result<&UtxoBody, LiteError> {
    let body = tx.utxo().ok_or(LiteError::NotUtxo(tx.id))?;
    if body.inputs.is_empty() {
        return Err(LiteError::NoInputs(tx.id));
    }
    let mut seen = BTreeSet::new();
    for input in &body.inputs {
        if !seen.insert(*input) {
            return Err(LiteError::DuplicateInput(tx.id, *input));
        }
    }
    Ok(body)
}

/// Two distinct transactions conflict iff they share an input.
pub fn conflicts(a: &Transaction, b: &Transaction) -> bool {
    if a.id == b.id {
        return false;
    }
    match (a.utxo(), b.utxo()) {
        (Some(x), Some(y)) => x.inputs.iter().any(|i| y.inputs.contains(i)),
        _ => false,
    }
}

/// The conflict relation over a known set of transactions, indexed by input.
#[derive(Clone, Debug, Default)]
pub struct ConflictRelation {
    spenders: BTreeMap<Outpoint, BTreeSet<TxId>>,
    inputs: BTreeMap<TxId, Vec<Outpoint>>,
}

impl ConflictRelation {
    pub fn new<'a>(txs: impl IntoIterator<Item = &'a Transaction>) -> Self {
        let mut rel = ConflictRelation::default();
        for tx in txs {
            rel.add(tx);
        }
        rel
    }

    pub fn add(&mut self, tx: &Transaction) {
        if let Some(body) = tx.utxo() {
            for input in &body.inputs {
                self.spenders.entry(*input).or_default().insert(tx.id);
            }
            self.inputs.insert(tx.id, body.inputs.clone());
        }
    }

    pub fn conflicts(&self, a: TxId, b: TxId) -> bool {
        if a == b {
            return false;
        }
        self.inputs
            .get(&a)
            .is_some_and(|ins| ins.iter().any(|i| self.spenders.get(i).is_some_and(|s| s.contains(&b))))
    }

    /// Every transaction that conflicts with `a`.
    pub fn conflicting_with(&self, a: TxId) -> BTreeSet<TxId> {
        let mut out = BTreeSet::new();
        if let Some(ins) = self.inputs.get(&a) {
            for i in ins {
                if let Some(s) = self.spenders.get(i) {
                    out.extend(s.iter().copied().filter(|&t| t != a));
                }
            }
        }
        out
    }
}

/// Submits `tx` to every chain. Never touches the cross-chain channel.
pub fn lite_submit(chains: &mut [LedgerObject], tx: &Transaction, now: Tick) -> Result<Vec<SubmitAck>, LiteError> {
    validate(tx)?;
    Ok(chains.iter_mut().map(|c| c.local_submit(tx.clone(), now)).collect())
}

/// Client-side state of one process: the transactions it knows about and its
/// memoized confirmations.
#[derive(Clone, Debug)]
pub struct LiteClient {
    asker: Asker,
    quorums: Quorums,
    genesis_outputs: u32,
    registry: BTreeMap<TxId, Transaction>,
    /// Confirmed once, confirmed forever.
    confirmed: BTreeSet<TxId>,
    cache_key: Option<(Tick, usize)>,
    cache: BTreeMap<TxId, bool>,
}

impl LiteClient {
    pub fn new(asker: Asker, quorums: Quorums, genesis_outputs: u32) -> Self {
        LiteClient {
            asker,
            quorums,
            genesis_outputs,
            registry: BTreeMap::new(),
            confirmed: BTreeSet::new(),
            cache_key: None,
            cache: BTreeMap::new(),
        }
    }

    pub fn asker(&self) -> Asker {
        self.asker
    }

    /// Registers a transaction body so its id can be resolved when walking inputs.
    pub fn learn(&mut self, tx: &Transaction) {
        self.registry.entry(tx.id).or_insert_with(|| tx.clone());
    }

    pub fn confirmed(&self) -> &BTreeSet<TxId> {
        &self.confirmed
    }

    fn refresh_cache(&mut self, chains: &[LedgerObject], now: Tick) {
        let stamp = chains.iter().map(|c| c.log().len()).sum();
        if self.cache_key != Some((now, stamp)) {
            self.cache_key = Some((now, stamp));
            self.cache.clear();
        }
    }

    fn commit_count(&self, chains: &[LedgerObject], id: TxId, now: Tick) -> usize {
        chains
            .iter()
            .filter(|c| c.local_check(id, self.asker, now).committed)
            .count()
    }

    pub fn lite_check(&mut self, chains: &[LedgerObject], id: TxId, now: Tick) -> bool {
        self.refresh_cache(chains, now);
        let mut visiting = BTreeSet::new();
        self.check_inner(chains, id, now, &mut visiting)
    }

    pub fn lite_valid(&mut self, chains: &[LedgerObject], tx: &Transaction, now: Tick) -> bool {
        self.refresh_cache(chains, now);
        let mut visiting = BTreeSet::from([tx.id]);
        self.valid_inner(chains, tx, now, &mut visiting)
    }

    fn check_inner(&mut self, chains: &[LedgerObject], id: TxId, now: Tick, visiting: &mut BTreeSet<TxId>) -> bool {
        if self.confirmed.contains(&id) {
            return true;
        }
        if let Some(&v) = self.cache.get(&id) {
            return v;
        }
        if !visiting.insert(id) {
            // cycle
            return false;
        }
        let result = self.commit_count(chains, id, now) >= self.quorums.lite_threshold
            && match self.registry.get(&id).cloned() {
                Some(tx) => self.valid_inner(chains, &tx, now, visiting),
                None => false,
            };
        visiting.remove(&id);
        self.cache.insert(id, result);
        if result {
            self.confirmed.insert(id);
        }
        result
    }

    fn valid_inner(
        &mut self,
        chains: &[LedgerObject],
        tx: &Transaction,
        now: Tick,
        visiting: &mut BTreeSet<TxId>,
    ) -> bool {
        let Ok(body) = validate(tx) else {
            return false;
        };
        let inputs = body.inputs.clone();
        let mut valid = true;
        for input in inputs {
            let ok = if input.tx == TxId::GENESIS {
                input.index < self.genesis_outputs
            } else if !self.registry.contains_key(&input.tx) {
                false
            } else {
                self.check_inner(chains, input.tx, now, visiting)
            };
            valid &= ok;
        }
        valid
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{Audience, BehaviorPolicy, Script, ScriptAction, ScriptRule};
    use crate::quorum::quorums_for;
    use crate::types::{ChainId, Group, ViewNumber};

    fn out(owner: &str, amount: u64) -> UtxoOutput {
        UtxoOutput {
            owner: owner.into(),
            amount,
        }
    }

    fn honest_chains(m: usize) -> Vec<LedgerObject> {
        ChainId::all(m).map(LedgerObject::honest).collect()
    }

    fn client() -> LiteClient {
        LiteClient::new(Asker::new(0, Group::X), quorums_for(4, 1), 4)
    }

    fn blocks(chains: &mut [LedgerObject], t: Tick) {
        for c in chains.iter_mut() {
            c.step_block(t);
        }
    }

    #[test]
    fn honest_chains_commit_everywhere() {
        let mut gen = TxIdGen::new();
        let mut chains = honest_chains(4);
        let tx = utxo_tx(&mut gen, vec![Outpoint::genesis(0)], vec![out("bob", 5)], ProcessId(0));
        lite_submit(&mut chains, &tx, 0).unwrap();
        blocks(&mut chains, 1);
        assert!(chains.iter().all(|c| c.contains(tx.id)));
        let mut cl = client();
        cl.learn(&tx);
        assert!(cl.lite_check(&chains, tx.id, 1));
    }

    #[test]
    fn crashed_chain_still_confirms_on_three() {
        let mut gen = TxIdGen::new();
        let mut chains = honest_chains(4);
        chains[3] = LedgerObject::new(ChainId(3), BehaviorPolicy::Crash { at_view: ViewNumber(0) }, 1);
        let tx = utxo_tx(&mut gen, vec![Outpoint::genesis(0)], vec![out("bob", 5)], ProcessId(0));
        lite_submit(&mut chains, &tx, 0).unwrap();
        blocks(&mut chains, 1);
        assert_eq!(chains.iter().filter(|c| c.contains(tx.id)).count(), 3);
        let mut cl = client();
        cl.learn(&tx);
        assert!(cl.lite_check(&chains, tx.id, 1));
    }

    #[test]
    fn later_conflict_is_refused() {
        let mut gen = TxIdGen::new();
        let mut chains = honest_chains(4);
        let tx = utxo_tx(&mut gen, vec![Outpoint::genesis(0)], vec![out("bob", 5)], ProcessId(0));
        let tx2 = utxo_tx(&mut gen, vec![Outpoint::genesis(0)], vec![out("eve", 5)], ProcessId(0));
        lite_submit(&mut chains, &tx, 0).unwrap();
        let acks = lite_submit(&mut chains, &tx2, 0).unwrap();
        assert!(acks.iter().all(|a| *a == SubmitAck::Conflict { by: tx.id }));
        blocks(&mut chains, 1);
        assert!(chains.iter().all(|c| !c.contains(tx2.id)));
    }

    #[test]
    fn malformed_rejected() {
        let mut gen = TxIdGen::new();
        let mut chains = honest_chains(4);
        let empty = utxo_tx(&mut gen, vec![], vec![out("bob", 1)], ProcessId(0));
        assert_eq!(lite_submit(&mut chains, &empty, 0), Err(LiteError::NoInputs(empty.id)));
        let dup = utxo_tx(
            &mut gen,
            vec![Outpoint::genesis(1), Outpoint::genesis(1)],
            vec![],
            ProcessId(0),
        );
        assert!(matches!(
            lite_submit(&mut chains, &dup, 0),
            Err(LiteError::DuplicateInput(..))
        ));
        let raw = gen.make(Payload::Raw("x".into()), ProcessId(0));
        assert_eq!(lite_submit(&mut chains, &raw, 0), Err(LiteError::NotUtxo(raw.id)));
        assert!(chains.iter().all(|c| !c.has_pending()));
    }

    #[test]
    fn threshold_counts() {
        let mut gen = TxIdGen::new();
        let tx = utxo_tx(&mut gen, vec![Outpoint::genesis(0)], vec![out("bob", 5)], ProcessId(0));
        for (k, expect) in [(2, false), (3, true)] {
            let mut chains = honest_chains(4);
            for c in chains.iter_mut().take(k) {
                c.local_submit(tx.clone(), 0);
            }
            blocks(&mut chains, 1);
            let mut cl = client();
            cl.learn(&tx);
            assert_eq!(cl.lite_check(&chains, tx.id, 1), expect, "k={k}");
        }
    }

    #[test]
    fn parent_below_threshold_invalidates_child() {
        let mut gen = TxIdGen::new();
        let parent = utxo_tx(&mut gen, vec![Outpoint::genesis(0)], vec![out("bob", 5)], ProcessId(0));
        let child = utxo_tx(
            &mut gen,
            vec![Outpoint {
                tx: parent.id,
                index: 0,
            }],
            vec![out("carol", 5)],
            ProcessId(1),
        );
        let mut chains = honest_chains(4);
        for c in chains.iter_mut().take(2) {
            c.local_submit(parent.clone(), 0);
        }
        for c in chains.iter_mut().take(3) {
            c.local_submit(child.clone(), 0);
        }
        blocks(&mut chains, 1);
        let mut cl = client();
        cl.learn(&parent);
        cl.learn(&child);
        assert!(!cl.lite_check(&chains, child.id, 1));
        assert!(!cl.lite_valid(&chains, &child, 1));
    }

    #[test]
    fn three_level_chain_is_valid() {
        let mut gen = TxIdGen::new();
        let a = utxo_tx(&mut gen, vec![Outpoint::genesis(0)], vec![out("b", 1)], ProcessId(0));
        let b = utxo_tx(
            &mut gen,
            vec![Outpoint { tx: a.id, index: 0 }],
            vec![out("c", 1)],
            ProcessId(0),
        );
        let c = utxo_tx(
            &mut gen,
            vec![Outpoint { tx: b.id, index: 0 }],
            vec![out("d", 1)],
            ProcessId(0),
        );
        let mut chains = honest_chains(4);
        let mut cl = client();
        for tx in [&a, &b, &c] {
            lite_submit(&mut chains, tx, 0).unwrap();
            cl.learn(tx);
        }
        blocks(&mut chains, 1);
        assert!(cl.lite_valid(&chains, &c, 1));
        assert!(cl.lite_check(&chains, c.id, 1));
        assert_eq!(cl.confirmed().len(), 3);
    }

    #[test]
    fn dangling_and_cyclic_inputs_are_invalid() {
        let mut gen = TxIdGen::new();
        let dangling = utxo_tx(
            &mut gen,
            vec![Outpoint { tx: TxId(42), index: 0 }],
            vec![],
            ProcessId(0),
        );
        let chains = honest_chains(4);
        let mut cl = client();
        cl.learn(&dangling);
        assert!(!cl.lite_valid(&chains, &dangling, 0));

        // a Byzantine-scripted tx spending its own output
        let id = TxId(77);
        let selfref = Transaction {
            id,
            payload: Payload::Utxo(UtxoBody {
                inputs: vec![Outpoint { tx: id, index: 0 }],
                outputs: vec![out("m", 1)],
            }),
            submitter: ProcessId(9),
        };
        let script = Script::new(vec![ScriptRule {
            from: 0,
            audience: Audience::Both,
            action: ScriptAction::Reveal { tx: id },
        }]);
        let chains: Vec<_> = ChainId::all(4)
            .map(|c| LedgerObject::new(c, BehaviorPolicy::Scripted(script.clone()), 1))
            .collect();
        cl.learn(&selfref);
        assert!(!cl.lite_valid(&chains, &selfref, 0));
        assert!(!cl.lite_check(&chains, id, 0));
    }

    #[test]
    fn genesis_out_of_range_is_invalid() {
        let mut gen = TxIdGen::new();
        let tx = utxo_tx(&mut gen, vec![Outpoint::genesis(9)], vec![], ProcessId(0));
        let mut cl = client();
        cl.learn(&tx);
        assert!(!cl.lite_valid(&honest_chains(4), &tx, 0));
    }

    #[test]
    fn conflict_relation_symmetric_irreflexive() {
        let mut gen = TxIdGen::new();
        let a = utxo_tx(&mut gen, vec![Outpoint::genesis(0)], vec![], ProcessId(0));
        let b = utxo_tx(
            &mut gen,
            vec![Outpoint::genesis(0), Outpoint::genesis(1)],
            vec![],
            ProcessId(0),
        );
        let c = utxo_tx(&mut gen, vec![Outpoint::genesis(2)], vec![], ProcessId(0));
        let rel = ConflictRelation::new([&a, &b, &c]);
        assert!(rel.conflicts(a.id, b.id) && rel.conflicts(b.id, a.id));
        assert!(!rel.conflicts(a.id, a.id));
        assert!(!rel.conflicts(a.id, c.id));
        assert!(conflicts(&a, &b) && !conflicts(&a, &a));
        assert_eq!(rel.conflicting_with(a.id), BTreeSet::from([b.id]));
    }
}
