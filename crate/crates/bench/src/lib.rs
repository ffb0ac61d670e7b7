// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Workloads shared by the benchmarks.

use trustboost_core::lite::{Outpoint, UtxoBody, UtxoOutput};
use trustboost_core::{NameOp, Payload, Protocol, SimConfig, WorkItem};

/// All-honest view-protocol run deciding `decisions` name registrations.
pub fn view_run(m: usize, decisions: usize) -> SimConfig {
    let mut cfg = SimConfig::new(Protocol::TrustboostView, m, (m - 1) / 3);
    cfg.horizon = 200 + 20 * decisions as u64;
    cfg.workload = (0..decisions)
        .map(|i| {
            WorkItem::new(
                i as u64,
                (i % 2) as u32,
                Payload::Name(NameOp::Buy {
                    name: format!("n{i}.eth"),
                    owner: "alice".into(),
                }),
            )
        })
        .collect();
    cfg
}

/// Lite run with `spends` independent transfers from distinct genesis outputs.
pub fn lite_run(m: usize, spends: u32) -> SimConfig {
    let mut cfg = SimConfig::new(Protocol::Lite, m, (m - 1) / 3);
    cfg.genesis_outputs = spends;
    cfg.workload = (0..spends)
        .map(|i| {
            WorkItem::new(
                u64::from(i),
                i % 2,
                Payload::Utxo(UtxoBody {
                    inputs: vec![Outpoint::genesis(i)],
                    outputs: vec![UtxoOutput {
                        owner: "bob".into(),
                        amount: 1,
                    }],
                }),
            )
        })
        .collect();
    cfg
}
