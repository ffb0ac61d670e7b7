// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Identity and time scalars, transactions, and the binary value domain.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::lite::UtxoBody;

/// Index of a blockchain within a scenario, in `[0, m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChainId(pub u32);

impl ChainId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// All chain ids of an `m`-chain system, ascending.
    pub fn all(m: usize) -> impl Iterator<Item = ChainId> {
        (0..m as u32).map(ChainId)
    }
}

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "chain{}", self.0)
    }
}

/// A client process (blockchain client). Processes are untrusted and unbounded in number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub u32);

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// The two halves a split-brain adversary keys its answers on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    X,
    Y,
}

impl Group {
    pub fn other(self) -> Group {
        match self {
            Group::X => Group::Y,
            Group::Y => Group::X,
        }
    }
}

/// Who is asking a chain a question. Honest chains ignore the group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Asker {
    pub process: ProcessId,
    pub group: Group,
}

impl Asker {
    pub fn new(process: u32, group: Group) -> Self {
        Asker {
            process: ProcessId(process),
            group,
        }
    }
}

/// Leader epoch of the view engine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ViewNumber(pub u64);

impl ViewNumber {
    pub fn next(self) -> ViewNumber {
        ViewNumber(self.0 + 1)
    }

    pub fn leader(self, m: usize) -> ChainId {
        ChainId((self.0 % m as u64) as u32)
    }
}

/// Logical simulation time.
pub type Tick = u64;

/// Initial or committed value of a binary consensus instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinaryValue {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
}

impl BinaryValue {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            BinaryValue::One
        } else {
            BinaryValue::Zero
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            BinaryValue::Zero => 0,
            BinaryValue::One => 1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            BinaryValue::Zero => BinaryValue::One,
            BinaryValue::One => BinaryValue::Zero,
        }
    }
}

impl fmt::Display for BinaryValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bit())
    }
}

/// Transaction identifier. Derived from a run-local counter and the payload digest,
/// so it pins down `(payload, submitter)` within a run.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxId(pub u64);

impl TxId {
    /// Outputs minted at genesis point at this id.
    pub const GENESIS: TxId = TxId(0);
}

impl fmt::Debug for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl Serialize for TxId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:016x}", self.0))
    }
}

impl<'de> Deserialize<'de> for TxId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        u64::from_str_radix(&s, 16).map(TxId).map_err(serde::de::Error::custom)
    }
}

/// NameService contract calls: the demo application executed on every chain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum NameOp {
    Buy { name: String, owner: String },
    Transfer { name: String, from: String, to: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Payload {
    Name(NameOp),
    Utxo(UtxoBody),
    Value(BinaryValue),
    Raw(String),
}

/// An opaque client transaction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transaction {
    pub id: TxId,
    pub payload: Payload,
    pub submitter: ProcessId,
}

impl Transaction {
    pub fn utxo(&self) -> Option<&UtxoBody> {
        match &self.payload {
            Payload::Utxo(body) => Some(body),
            _ => None,
        }
    }
}

/// Deterministic id assignment: `sha256(counter || submitter || payload)` truncated to 64 bits.
#[derive(Debug, Default, Clone)]
pub struct TxIdGen {
    counter: u64,
}

impl TxIdGen {
    pub fn new() -> Self {
        TxIdGen { counter: 0 }
    }

    pub fn make(&mut self, payload: Payload, submitter: ProcessId) -> Transaction {
        self.counter += 1;
        let id = derive_id(self.counter, &payload, submitter);
        Transaction { id, payload, submitter }
    }
}

pub(crate) fn derive_id(counter: u64, payload: &Payload, submitter: ProcessId) -> TxId {
    let mut hasher = Sha256::new();
    hasher.update(counter.to_le_bytes());
    hasher.update(submitter.0.to_le_bytes());
    hasher.update(serde_json::to_vec(payload).expect("payload serializes"));
    let digest = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    // zero is reserved for genesis
    TxId(u64::from_le_bytes(word).max(1))
}
