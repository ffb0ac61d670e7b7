// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use thiserror::Error;

use crate::chain::LedgerObject;
use crate::quorum::Quorums;
use crate::types::{Asker, Tick, TxId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReadError {
    #[error("no transaction is confirmed yet")]
    EmptyLedger,
    #[error("chains at the latest confirmed transaction disagree on the state")]
    NoMajority,
}

/// Read-only client handle over all `m` chains. Clients never message chains except
/// through `submit`, which the simulator drives; this handle covers `check` and `read`.
#[derive(Clone, Copy, Debug)]
pub struct ClientApi<'a> {
    chains: &'a [LedgerObject],
    quorums: Quorums,
}

impl<'a> ClientApi<'a> {
    pub fn new(chains: &'a [LedgerObject], quorums: Quorums) -> Self {
        ClientApi { chains, quorums }
    }

    pub fn commit_count(&self, tx: TxId, asker: Asker, now: Tick) -> usize {
        self.chains
            .iter()
            .filter(|c| c.local_check(tx, asker, now).committed)
            .count()
    }

    /// True iff at least `floor(m/3) + 1` chains report `tx` committed.
    pub fn tb_check(&self, tx: TxId, asker: Asker, now: Tick) -> bool {
        self.commit_count(tx, asker, now) >= self.quorums.check_threshold
    }

    /// The confirmed transaction with the highest log position, where a position counts
    /// only if `floor(m/3) + 1` chains place the same transaction there.
    pub fn latest_confirmed(&self, asker: Asker, now: Tick) -> Option<TxId> {
        let logs: Vec<Vec<TxId>> = self.chains.iter().map(|c| c.visible_log(asker, now)).collect();
        let height = logs.iter().map(Vec::len).max().unwrap_or(0);
        (0..height).rev().find_map(|i| {
            let mut at: BTreeMap<TxId, usize> = BTreeMap::new();
            for log in &logs {
                if let Some(id) = log.get(i) {
                    *at.entry(*id).or_default() += 1;
                }
            }
            at.into_iter()
                .filter(|(_, n)| *n >= self.quorums.check_threshold)
                .map(|(id, _)| id)
                .find(|id| self.tb_check(*id, asker, now))
        })
    }

    /// Value of `key` as reported by a strict majority of the chains whose latest
    /// committed transaction is the latest confirmed one. `Ok(None)` means the majority
    /// agrees the key is absent.
    pub fn tb_read(&self, key: &str, asker: Asker, now: Tick) -> Result<Option<String>, ReadError> {
        let latest = self.latest_confirmed(asker, now).ok_or(ReadError::EmptyLedger)?;
        let views: Vec<_> = self
            .chains
            .iter()
            .map(|c| c.local_read(asker, now))
            .filter(|v| v.latest_committed == Some(latest))
            .collect();
        let mut counts: BTreeMap<Option<String>, usize> = BTreeMap::new();
        for v in &views {
            *counts.entry(v.state_snapshot.get(key).cloned()).or_default() += 1;
        }
        let total = views.len();
        counts
            .into_iter()
            .find(|(_, n)| 2 * n > total)
            .map(|(value, _)| value)
            .ok_or(ReadError::NoMajority)
    }
}
