// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Quorum arithmetic shared by every protocol.

use serde::{Deserialize, Serialize};

/// Thresholds derived from the chain count `m`.
///
/// `f` rides along as an assumption parameter. Protocol logic only reads the
/// `m`-derived thresholds; `f` is consulted by scenario builders and verdict checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quorums {
    pub m: usize,
    pub f: usize,
    /// Votes needed to commit locally: `floor(2m/3) + 1`.
    pub vote_threshold: usize,
    /// Chains that must report a commit for a client to accept it: `floor(m/3) + 1`.
    pub check_threshold: usize,
    /// Commit count for a consensusless (UTXO) confirmation: `floor(2m/3) + 1`.
    pub lite_threshold: usize,
    /// `m > 3f`.
    pub supermajority_ok: bool,
}

pub fn quorums_for(m: usize, f: usize) -> Quorums {
    Quorums {
        m,
        f,
        vote_threshold: 2 * m / 3 + 1,
        check_threshold: m / 3 + 1,
        lite_threshold: 2 * m / 3 + 1,
        supermajority_ok: m > 3 * f,
    }
}

impl Quorums {
    /// Read quorum of the passive value-reading protocol: the largest count that still
    /// lets honest objects terminate when `f` objects lie or stay silent. Equals `2f + 1`
    /// at `m = 3f + 1`.
    pub fn passive_quorum(&self) -> usize {
        self.m.saturating_sub(self.f).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spot_values() {
        let q = quorums_for(4, 1);
        assert_eq!((q.vote_threshold, q.check_threshold, q.lite_threshold), (3, 2, 3));
        assert!(q.supermajority_ok);

        let q = quorums_for(1, 0);
        assert_eq!((q.vote_threshold, q.check_threshold, q.lite_threshold), (1, 1, 1));
        assert!(q.supermajority_ok);

        let q = quorums_for(10, 3);
        assert_eq!((q.vote_threshold, q.check_threshold, q.lite_threshold), (7, 4, 7));
        assert!(q.supermajority_ok);

        assert!(!quorums_for(3, 1).supermajority_ok);
    }

    #[test]
    fn passive_quorum_matches_two_f_plus_one_at_bound() {
        for f in 0..16 {
            assert_eq!(quorums_for(3 * f + 1, f).passive_quorum(), 2 * f + 1);
        }
    }

    #[test]
    fn vote_and_check_quorums_intersect() {
        for m in 1..=50usize {
            let q = quorums_for(m, (m - 1) / 3);
            assert!(q.vote_threshold + q.check_threshold > m, "m={m}");
            // a vote quorum minus f faulty still leaves an honest majority of any other vote quorum
            let f = (m - 1) / 3;
            assert!(2 * q.vote_threshold > m + f, "m={m}");
        }
    }

    proptest! {
        #[test]
        fn pure_and_floor_exact(m in 1usize..500, f in 0usize..200) {
            let a = quorums_for(m, f);
            prop_assert_eq!(a, quorums_for(m, f));
            prop_assert!(3 * (a.vote_threshold - 1) <= 2 * m && 2 * m < 3 * a.vote_threshold);
            prop_assert!(3 * (a.check_threshold - 1) <= m && m < 3 * a.check_threshold);
        }
    }
}
