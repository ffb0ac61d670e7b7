// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use super::VALUE_KEY;
use crate::types::{NameOp, Payload, Transaction};

/// Contract execution: a NameService for named ops, output bookkeeping for UTXO
/// payloads, and a write-once value slot for binary consensus.
pub fn execute(state: &mut BTreeMap<String, String>, tx: &Transaction) {
    match &tx.payload {
        Payload::Name(NameOp::Buy { name, owner }) => {
            state.entry(format!("name:{name}")).or_insert_with(|| owner.clone());
        }
        Payload::Name(NameOp::Transfer { name, from, to }) => {
            let key = format!("name:{name}");
            if state.get(&key) == Some(from) {
                state.insert(key, to.clone());
            }
        }
        Payload::Utxo(body) => {
            for input in &body.inputs {
                state.remove(&format!("utxo:{}:{}", input.tx, input.index));
            }
            for (i, out) in body.outputs.iter().enumerate() {
                state.insert(format!("utxo:{}:{}", tx.id, i), format!("{}:{}", out.owner, out.amount));
            }
        }
        Payload::Value(v) => {
            state
                .entry(VALUE_KEY.to_string())
                .or_insert_with(|| v.bit().to_string());
        }
        Payload::Raw(_) => {}
    }
}
