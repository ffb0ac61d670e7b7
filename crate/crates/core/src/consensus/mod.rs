// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! TrustBoost: consensus among `m` chains over the cross-chain channel, plus the
//! client-side `check` and `read` rules.

mod client;
mod skeleton;
mod view;

pub use client::{ClientApi, ReadError};
pub use skeleton::SkeletonChain;
pub use view::{EngineEvent, Phase, ViewEngine, ViewState};
