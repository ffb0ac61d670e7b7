// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Scenario runner behind the `trustboost` binary.

pub mod commands;
pub mod config;
pub mod sweep;

pub use commands::{replay, run_config, run_sim, scenario, Outcome, ReplayReport, Status};
pub use config::{Plan, ScenarioConfig, ScenarioError};
pub use sweep::{honest_config, sweep, SweepReport};
