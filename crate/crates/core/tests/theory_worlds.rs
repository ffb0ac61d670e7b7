// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

use trustboost_core::theory::scenarios::{lite_exhaustive_search, run_scenario, LITE_SEARCH_HORIZON};
use trustboost_core::{BinaryValue, Group};

#[test]
fn active_hybrid_splits_and_view_engine_holds() {
    let r = run_scenario("active-hybrid").unwrap();
    let hybrid = r.worlds.last().unwrap();
    assert_eq!(hybrid.value(Group::X), Some(BinaryValue::One));
    assert_eq!(hybrid.value(Group::Y), Some(BinaryValue::Zero));
    assert!(r.views.iter().all(|v| v.identical), "{:?}", r.views);
    for b in &r.batches {
        assert!(b.passed(), "{b:?}");
    }
    assert_eq!(r.batches[0].runs, 1000);
}

#[test]
fn lite_search_has_no_double_accept() {
    let report = lite_exhaustive_search();
    assert_eq!(report.runs, 4 * 125 * 169);
    assert_eq!(report.violations, 0, "{:?}", report.first_violation);
    assert_eq!(report.states, report.runs * 2 * (LITE_SEARCH_HORIZON + 1));
}
