// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! The propose/vote skeleton: a chain that hears a proposal votes for it, and a
//! chain that collects `floor(2m/3) + 1` votes for a transaction submits it to its
//! own ledger. It gives every chain the same set of transactions but no common order.

use std::collections::{BTreeMap, BTreeSet};

use crate::ccc::{Body, CccMessage, MessageQueue, MsgKind, SendOutcome};
use crate::quorum::Quorums;
use crate::types::{ChainId, Transaction, TxId};

#[derive(Clone, Debug)]
pub struct SkeletonChain {
    id: ChainId,
    quorums: Quorums,
    /// `txVotes`: present once the proposal for a tx has been seen.
    votes: BTreeMap<TxId, BTreeSet<ChainId>>,
    /// Votes that arrived before their proposal.
    early: BTreeMap<TxId, BTreeSet<ChainId>>,
    proposed: BTreeSet<TxId>,
    submitted: BTreeSet<TxId>,
}

impl SkeletonChain {
    pub fn new(id: ChainId, quorums: Quorums) -> Self {
        SkeletonChain {
            id,
            quorums,
            votes: BTreeMap::new(),
            early: BTreeMap::new(),
            proposed: BTreeSet::new(),
            submitted: BTreeSet::new(),
        }
    }

    pub fn id(&self) -> ChainId {
        self.id
    }

    pub fn votes_for(&self, tx: TxId) -> usize {
        self.votes.get(&tx).map_or(0, BTreeSet::len)
    }

    /// Client entry point: stage `Propose(tx)` for every other chain and handle the
    /// self-addressed copy locally. Returns transactions to submit to the local ledger.
    pub fn submit(&mut self, tx: Transaction, queue: &mut MessageQueue) -> Vec<Transaction> {
        if !self.proposed.insert(tx.id) {
            return Vec::new();
        }
        let mut local = Vec::new();
        for dst in ChainId::all(self.quorums.m) {
            let msg = CccMessage::new(self.id, dst, MsgKind::Propose, None, None, Body::Tx(tx.clone()))
                .expect("propose carries a tx");
            if let Ok(SendOutcome::SelfDelivery(own)) = queue.ccc_send(msg) {
                local.extend(self.on_deliver(&own, queue));
            }
        }
        local
    }

    pub fn on_deliver(&mut self, msg: &CccMessage, queue: &mut MessageQueue) -> Vec<Transaction> {
        let Some(tx) = msg.tx().cloned() else {
            return Vec::new();
        };
        match msg.kind {
            MsgKind::Propose => {
                if self.votes.contains_key(&tx.id) {
                    return Vec::new();
                }
                self.proposed.insert(tx.id);
                let buffered = self.early.remove(&tx.id).unwrap_or_default();
                self.votes.insert(tx.id, buffered);
                let mut local = Vec::new();
                for dst in ChainId::all(self.quorums.m) {
                    let vote = CccMessage::new(self.id, dst, MsgKind::Vote, None, None, Body::Tx(tx.clone()))
                        .expect("vote carries a tx");
                    if let Ok(SendOutcome::SelfDelivery(own)) = queue.ccc_send(vote) {
                        local.extend(self.count_vote(own.src, &tx));
                    }
                }
                // buffered votes may already complete the quorum
                local.extend(self.maybe_submit(&tx));
                local
            }
            MsgKind::Vote => match self.votes.contains_key(&tx.id) {
                true => self.count_vote(msg.src, &tx),
                false => {
                    self.early.entry(tx.id).or_default().insert(msg.src);
                    Vec::new()
                }
            },
            _ => Vec::new(),
        }
    }

    fn count_vote(&mut self, src: ChainId, tx: &Transaction) -> Vec<Transaction> {
        self.votes.entry(tx.id).or_default().insert(src);
        self.maybe_submit(tx)
    }

    fn maybe_submit(&mut self, tx: &Transaction) -> Vec<Transaction> {
        if self.votes_for(tx.id) >= self.quorums.vote_threshold && self.submitted.insert(tx.id) {
            vec![tx.clone()]
        } else {
            Vec::new()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quorum::quorums_for;
    use crate::types::{Payload, ProcessId, TxIdGen};

    fn tx() -> Transaction {
        TxIdGen::new().make(Payload::Raw("t".into()), ProcessId(0))
    }

    fn vote(src: u32, dst: u32, tx: &Transaction) -> CccMessage {
        CccMessage::new(
            ChainId(src),
            ChainId(dst),
            MsgKind::Vote,
            None,
            None,
            Body::Tx(tx.clone()),
        )
        .unwrap()
    }

    #[test]
    fn submit_stages_m_minus_one_proposals() {
        let mut c = SkeletonChain::new(ChainId(0), quorums_for(4, 1));
        let mut q = MessageQueue::new(ChainId(0), 4);
        let local = c.submit(tx(), &mut q);
        assert!(local.is_empty());
        let proposals = q.staged().iter().filter(|m| m.kind == MsgKind::Propose).count();
        let votes = q.staged().iter().filter(|m| m.kind == MsgKind::Vote).count();
        assert_eq!((proposals, votes), (3, 3));
        assert_eq!(c.votes_for(tx().id), 1);
    }

    #[test]
    fn single_chain_commits_through_self_delivery() {
        let mut c = SkeletonChain::new(ChainId(0), quorums_for(1, 0));
        let mut q = MessageQueue::new(ChainId(0), 1);
        let local = c.submit(tx(), &mut q);
        assert_eq!(local, vec![tx()]);
        assert!(q.is_empty());
    }

    #[test]
    fn duplicate_submit_suppressed() {
        let mut c = SkeletonChain::new(ChainId(0), quorums_for(4, 1));
        let mut q = MessageQueue::new(ChainId(0), 4);
        c.submit(tx(), &mut q);
        let before = q.len();
        c.submit(tx(), &mut q);
        assert_eq!(q.len(), before);
    }

    #[test]
    fn local_submit_exactly_once_at_threshold() {
        let t = tx();
        let mut c = SkeletonChain::new(ChainId(1), quorums_for(4, 1));
        let mut q = MessageQueue::new(ChainId(1), 4);
        let propose = CccMessage::new(
            ChainId(0),
            ChainId(1),
            MsgKind::Propose,
            None,
            None,
            Body::Tx(t.clone()),
        )
        .unwrap();
        assert!(c.on_deliver(&propose, &mut q).is_empty());
        assert!(c.on_deliver(&vote(0, 1, &t), &mut q).is_empty());
        // repeated vote from the same chain counts once
        assert!(c.on_deliver(&vote(0, 1, &t), &mut q).is_empty());
        assert_eq!(c.on_deliver(&vote(2, 1, &t), &mut q), vec![t.clone()]);
        assert!(c.on_deliver(&vote(3, 1, &t), &mut q).is_empty());
    }

    #[test]
    fn early_votes_are_buffered() {
        let t = tx();
        let mut c = SkeletonChain::new(ChainId(1), quorums_for(4, 1));
        let mut q = MessageQueue::new(ChainId(1), 4);
        c.on_deliver(&vote(2, 1, &t), &mut q);
        c.on_deliver(&vote(3, 1, &t), &mut q);
        assert_eq!(c.votes_for(t.id), 0);
        let propose = CccMessage::new(
            ChainId(0),
            ChainId(1),
            MsgKind::Propose,
            None,
            None,
            Body::Tx(t.clone()),
        )
        .unwrap();
        assert_eq!(c.on_deliver(&propose, &mut q), vec![t]);
    }
}
