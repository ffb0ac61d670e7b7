// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Line-delimited JSON run traces.
//!
//! A trace is a header row, any number of event rows, and an end row carrying the
//! row count and a SHA-256 over every preceding line (newline included).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ccc::MsgKind;
use crate::types::{ChainId, ProcessId, Tick, TxId};

pub const TRACE_SCHEMA: &str = "trustboost-trace";
pub const TRACE_VERSION: u32 = 1;

/// Run facts the metrics derivation needs and cannot recover from events alone.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub protocol: String,
    pub m: usize,
    pub f: usize,
    pub seed: u64,
    pub gst: Tick,
    pub delta: Tick,
    pub horizon: Tick,
    pub processes: u32,
    pub honest: Vec<bool>,
    /// Transactions every process is expected to commit.
    pub expected: Vec<TxId>,
    /// Conflicting pairs present in the workload.
    pub conflicts: Vec<(TxId, TxId)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "row", rename_all = "snake_case")]
pub enum TraceRow {
    Header {
        schema: String,
        version: u32,
        meta: TraceMeta,
    },
    Submit {
        tick: Tick,
        process: ProcessId,
        tx: TxId,
        chains: Vec<ChainId>,
    },
    Send {
        tick: Tick,
        src: ChainId,
        dst: ChainId,
        kind: MsgKind,
        view: Option<u64>,
        slot: Option<u64>,
        tx: Option<TxId>,
        seq: u64,
        deliver_at: Tick,
    },
    Deliver {
        tick: Tick,
        src: ChainId,
        dst: ChainId,
        kind: MsgKind,
        view: Option<u64>,
        tx: Option<TxId>,
        seq: u64,
        sent_at: Tick,
    },
    Drop {
        tick: Tick,
        src: ChainId,
        dst: ChainId,
        kind: MsgKind,
        reason: String,
    },
    Note {
        tick: Tick,
        chain: ChainId,
        text: String,
    },
    EnterView {
        tick: Tick,
        chain: ChainId,
        view: u64,
    },
    Decide {
        tick: Tick,
        chain: ChainId,
        slot: u64,
        view: u64,
        tx: TxId,
    },
    Block {
        tick: Tick,
        chain: ChainId,
        txs: Vec<TxId>,
    },
    Commit {
        tick: Tick,
        process: ProcessId,
        tx: TxId,
    },
    Violation {
        tick: Tick,
        invariant: String,
        detail: String,
    },
    End {
        tick: Tick,
        rows: u64,
        checksum: String,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("trace is empty")]
    Empty,
    #[error("line {line}: {message}")]
    BadRow { line: usize, message: String },
    #[error("first row is not a header")]
    MissingHeader,
    #[error("unsupported trace version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("unknown trace schema {0:?}")]
    SchemaMismatch(String),
    #[error("trace is truncated: no end row")]
    Truncated,
    #[error("rows after the end row")]
    TrailingRows,
    #[error("row count mismatch: end row says {claimed}, found {found}")]
    RowCount { claimed: u64, found: u64 },
    #[error("checksum mismatch")]
    Checksum,
}

/// Accumulates rows and the running checksum.
#[derive(Debug)]
pub struct TraceWriter {
    text: String,
    rows: Vec<TraceRow>,
    hasher: Sha256,
}

impl TraceWriter {
    pub fn new(meta: TraceMeta) -> Self {
        let mut w = TraceWriter {
            text: String::new(),
            rows: Vec::new(),
            hasher: Sha256::new(),
        };
        w.push(TraceRow::Header {
            schema: TRACE_SCHEMA.to_string(),
            version: TRACE_VERSION,
            meta,
        });
        w
    }

    pub fn push(&mut self, row: TraceRow) {
        let mut line = serde_json::to_string(&row).expect("trace rows serialize");
        line.push('\n');
        self.hasher.update(line.as_bytes());
        self.text.push_str(&line);
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    /// Appends the end row and returns `(rows, text)`.
    pub fn finish(mut self, tick: Tick) -> (Vec<TraceRow>, String) {
        let checksum = hex::encode(self.hasher.clone().finalize());
        let end = TraceRow::End {
            tick,
            rows: self.rows.len() as u64,
            checksum,
        };
        let mut line = serde_json::to_string(&end).expect("trace rows serialize");
        line.push('\n');
        self.text.push_str(&line);
        self.rows.push(end);
        (self.rows, self.text)
    }
}

/// Parses and verifies a trace produced by [`TraceWriter`].
pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>, TraceError> {
    if text.trim().is_empty() {
        return Err(TraceError::Empty);
    }
    let mut hasher = Sha256::new();
    let mut rows = Vec::new();
    let mut ended = false;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if ended {
            return Err(TraceError::TrailingRows);
        }
        let row: TraceRow = serde_json::from_str(line.trim_end()).map_err(|e| TraceError::BadRow {
            line: i + 1,
            message: e.to_string(),
        })?;
        if rows.is_empty() {
            match &row {
                TraceRow::Header { schema, version, .. } => {
                    if schema != TRACE_SCHEMA {
                        return Err(TraceError::SchemaMismatch(schema.clone()));
                    }
                    if *version != TRACE_VERSION {
                        return Err(TraceError::VersionMismatch {
                            found: *version,
                            expected: TRACE_VERSION,
                        });
                    }
                }
                _ => return Err(TraceError::MissingHeader),
            }
        }
        if let TraceRow::End {
            rows: claimed,
            checksum,
            ..
        } = &row
        {
            if *claimed != rows.len() as u64 {
                return Err(TraceError::RowCount {
                    claimed: *claimed,
                    found: rows.len() as u64,
                });
            }
            if hex::encode(hasher.clone().finalize()) != *checksum {
                return Err(TraceError::Checksum);
            }
            ended = true;
        } else {
            hasher.update(line.as_bytes());
        }
        rows.push(row);
    }
    if !ended {
        return Err(TraceError::Truncated);
    }
    Ok(rows)
}

pub fn meta_of(rows: &[TraceRow]) -> Option<&TraceMeta> {
    match rows.first() {
        Some(TraceRow::Header { meta, .. }) => Some(meta),
        _ => None,
    }
}

/// Chains that appear as a send source or destination.
pub fn chains_on_wire(rows: &[TraceRow]) -> BTreeSet<ChainId> {
    rows.iter()
        .filter_map(|r| match r {
            TraceRow::Send { src, dst, .. } => Some([*src, *dst]),
            _ => None,
        })
        .flatten()
        .collect()
}
