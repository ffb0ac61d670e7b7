// Copyright (c) The TrustBoost Simulator Authors
// SPDX-License-Identifier: Apache-2.0

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use trustboost_bench::{lite_run, view_run};
use trustboost_core::chain::Audience;
use trustboost_core::simulate;
use trustboost_core::theory::scenarios::{lite_search_run, passive_abc_exhaustive, ByzantineClaim, HonestFeed};

fn view_engine(c: &mut Criterion) {
    let mut group = c.benchmark_group("view-engine");
    for m in [4, 7, 10] {
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| {
            b.iter(|| simulate(black_box(view_run(m, 1))).unwrap())
        });
    }
    group.finish();
}

fn lite(c: &mut Criterion) {
    c.bench_function("lite/m4-8-spends", |b| {
        b.iter(|| simulate(black_box(lite_run(4, 8))).unwrap())
    });
    let feeds = [
        HonestFeed::First { tx: 0, at: 0 },
        HonestFeed::First { tx: 1, at: 0 },
        HonestFeed::Nothing,
    ];
    let claims = [
        ByzantineClaim::Reveal {
            audience: Audience::X,
            from: 0,
        },
        ByzantineClaim::Reveal {
            audience: Audience::Y,
            from: 5,
        },
    ];
    c.bench_function("lite/search-run", |b| {
        b.iter(|| lite_search_run(black_box(3), feeds, claims))
    });
}

fn theory(c: &mut Criterion) {
    c.bench_function("theory/passive-abc-exhaustive", |b| b.iter(passive_abc_exhaustive));
}

criterion_group!(benches, view_engine, lite, theory);
criterion_main!(benches);
