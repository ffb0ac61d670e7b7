// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Consensus-property predicates over committed ledgers.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::types::TxId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum AgreementVerdict {
    Ok,
    /// Two ledgers disagree at `index`; `ledgers` are the positions of the offending
    /// pair in the input list.
    Divergence {
        index: usize,
        left: TxId,
        right: TxId,
        ledgers: (usize, usize),
    },
    /// Two conflicting transactions were both committed.
    Conflict {
        a: TxId,
        b: TxId,
    },
}

impl AgreementVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, AgreementVerdict::Ok)
    }
}

/// Ordered-ledger agreement: every pair of ledgers is prefix-related.
pub fn check_agreement<L: AsRef<[TxId]>>(ledgers: &[L]) -> AgreementVerdict {
    for i in 0..ledgers.len() {
        for j in i + 1..ledgers.len() {
            let (a, b) = (ledgers[i].as_ref(), ledgers[j].as_ref());
            if let Some(index) = a.iter().zip(b).position(|(x, y)| x != y) {
                return AgreementVerdict::Divergence {
                    index,
                    left: a[index],
                    right: b[index],
                    ledgers: (i, j),
                };
            }
        }
    }
    AgreementVerdict::Ok
}

/// Result of the weak-agreement check plus the commit-set spread, which is reported
/// for diagnosis only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeakAgreementReport {
    pub verdict: AgreementVerdict,
    /// Transactions committed by some but not all processes.
    pub symmetric_difference: BTreeSet<TxId>,
}

/// Weak agreement: the union of honest commit sets holds no conflicting pair.
/// `conflicts` must be symmetric and irreflexive.
pub fn check_weak_agreement<F>(committed: &[BTreeSet<TxId>], conflicts: F) -> WeakAgreementReport
where
    F: Fn(TxId, TxId) -> bool,
{
    let union: BTreeSet<TxId> = committed.iter().flatten().copied().collect();
    let mut verdict = AgreementVerdict::Ok;
    'outer: for (i, &a) in union.iter().enumerate() {
        for &b in union.iter().skip(i + 1) {
            if conflicts(a, b) {
                verdict = AgreementVerdict::Conflict { a, b };
                break 'outer;
            }
        }
    }
    let symmetric_difference = union
        .iter()
        .filter(|id| committed.iter().any(|set| !set.contains(id)))
        .copied()
        .collect();
    WeakAgreementReport {
        verdict,
        symmetric_difference,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(v: &[u64]) -> Vec<TxId> {
        v.iter().map(|&x| TxId(x)).collect()
    }

    #[test]
    fn prefix_is_ok() {
        assert!(check_agreement(&[ids(&[1, 2]), ids(&[1, 2, 3])]).is_ok());
        assert!(check_agreement(&[ids(&[]), ids(&[9])]).is_ok());
    }

    #[test]
    fn divergence_reports_index_and_pair() {
        let v = check_agreement(&[ids(&[1, 2]), ids(&[1, 3])]);
        assert_eq!(
            v,
            AgreementVerdict::Divergence {
                index: 1,
                left: TxId(2),
                right: TxId(3),
                ledgers: (0, 1)
            }
        );
    }

    #[test]
    fn weak_agreement_cases() {
        let none = |_: TxId, _: TxId| false;
        let s1: BTreeSet<_> = [TxId(1)].into();
        assert!(check_weak_agreement(&[s1.clone(), s1.clone()], none).verdict.is_ok());

        let share_input = |a: TxId, b: TxId| a != b && a.0 + b.0 == 3;
        let s2: BTreeSet<_> = [TxId(2)].into();
        let r = check_weak_agreement(&[s1, s2], share_input);
        assert_eq!(r.verdict, AgreementVerdict::Conflict { a: TxId(1), b: TxId(2) });
        assert_eq!(r.symmetric_difference.len(), 2);

        let empty: [BTreeSet<TxId>; 2] = Default::default();
        assert!(check_weak_agreement(&empty, share_input).verdict.is_ok());
    }

    fn ledger_family() -> impl Strategy<Value = Vec<Vec<TxId>>> {
        // small alphabet so divergences are common
        prop::collection::vec(prop::collection::vec((0u64..3).prop_map(TxId), 0..5), 0..5)
    }

    proptest! {
        #[test]
        fn verdict_ok_is_permutation_invariant(mut ls in ledger_family(), seed in any::<u64>()) {
            let before = check_agreement(&ls).is_ok();
            let n = ls.len();
            if n > 1 {
                let k = (seed as usize) % n;
                ls.rotate_left(k);
                ls.reverse();
            }
            prop_assert_eq!(before, check_agreement(&ls).is_ok());
        }

        #[test]
        fn reflexive(l in prop::collection::vec((0u64..3).prop_map(TxId), 0..6)) {
            prop_assert!(check_agreement(&[l.clone(), l]).is_ok());
        }
    }
}
