// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Deterministic simulator and protocol library for consensus on top of `m`
//! blockchains connected by cross-chain channels.

pub mod ccc;
pub mod chain;
pub mod consensus;
pub mod lite;
pub mod metrics;
pub mod quorum;
pub mod sim;
pub mod theory;
pub mod trace;
pub mod types;
pub mod verdict;

pub use metrics::{metrics_from_trace, RunMetrics};
pub use quorum::{quorums_for, Quorums};
pub use sim::{simulate, Protocol, SimConfig, SimOutcome, WorkItem};
pub use types::{
    Asker, BinaryValue, ChainId, Group, NameOp, Payload, ProcessId, Tick, Transaction, TxId, TxIdGen, ViewNumber,
};
pub use verdict::{check_agreement, check_weak_agreement, AgreementVerdict};
