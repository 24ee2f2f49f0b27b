use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ffn_bench::{internal_jet, network};
use ffn_core::{
    cross_check, decompose_lift, detect_layers, enumerate_balanced_colorings, enumerate_branches_internal,
    find_colorings_with_quotient, trace_branches, EnumerationOptions, PolynomialCellFunction, TraceConfig,
    DEFAULT_SIZE_BOUND,
};

fn structure(c: &mut Criterion) {
    let fig2 = network("fig2");
    let (fig3, fig1) = (network("fig3"), network("fig1"));
    let (fig5l, fig5r) = (network("fig5_left"), network("fig5_right"));
    c.bench_function("layers/fig2", |b| b.iter(|| detect_layers(black_box(&fig2))));
    c.bench_function("balanced_colorings/fig3", |b| {
        b.iter(|| enumerate_balanced_colorings(black_box(&fig3), DEFAULT_SIZE_BOUND).unwrap())
    });
    c.bench_function("colorings_with_quotient/fig5", |b| {
        b.iter(|| find_colorings_with_quotient(black_box(&fig5r), &fig5l, DEFAULT_SIZE_BOUND).unwrap())
    });
    c.bench_function("decompose/fig3_to_fig1", |b| b.iter(|| decompose_lift(black_box(&fig3), &fig1).unwrap()));
}

fn branches(c: &mut Criterion) {
    let fig2 = network("fig2");
    let jet = internal_jet(fig2.edge_type_count());
    c.bench_function("branches_internal/fig2", |b| {
        b.iter(|| enumerate_branches_internal(black_box(&fig2), &jet, EnumerationOptions::default()).unwrap())
    });
    let (fig3, fig1) = (network("fig3"), network("fig1"));
    let jet = internal_jet(fig1.edge_type_count());
    c.bench_function("cross_check/fig3_to_fig1", |b| b.iter(|| cross_check(black_box(&fig3), &fig1, &jet).unwrap()));
}

fn numeric(c: &mut Criterion) {
    let chain = network("chain3");
    let pcf = PolynomialCellFunction::new(internal_jet(1));
    let cfg = TraceConfig::default();
    let mut group = c.benchmark_group("numeric");
    group.sample_size(10);
    group.bench_function("trace/chain3", |b| b.iter(|| trace_branches(black_box(&chain), &pcf, 1, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, structure, branches, numeric);
criterion_main!(benches);
