use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lossrank_bench::{large_d, small_d, standardized};
use lossrank_core::lasso_path::{candidate_subsets, compute_lars_path, default_max_steps};
use lossrank_core::simbench::{run_study, SimDesign};
use lossrank_core::{select, Criterion as Crit};

fn lars_path(c: &mut Criterion) {
    for (label, data) in [("path/d8_n100", small_d(100)), ("path/d300_n100", large_d(100)), ("path/d300_n500", large_d(500))] {
        let std = standardized(&data);
        let steps = default_max_steps(std.n(), std.d());
        c.bench_function(label, |b| b.iter(|| compute_lars_path(black_box(&std), steps).unwrap()));
    }
}

fn candidates(c: &mut Criterion) {
    let std = standardized(&large_d(500));
    let path = compute_lars_path(&std, default_max_steps(std.n(), std.d())).unwrap();
    c.bench_function("candidates/d300_n500", |b| b.iter(|| candidate_subsets(black_box(&path), &std).unwrap()));
}

fn selection(c: &mut Criterion) {
    let small = small_d(100);
    let large = large_d(100);
    let mut g = c.benchmark_group("select");
    g.sample_size(10);
    g.bench_function("d8_n100_all", |b| b.iter(|| select(black_box(&small), &Crit::ALL).unwrap()));
    g.bench_function("d300_n100_lr", |b| b.iter(|| select(black_box(&large), &[Crit::LossRank]).unwrap()));
    g.bench_function("d300_n100_all", |b| b.iter(|| select(black_box(&large), &Crit::ALL).unwrap()));
    g.finish();
}

fn study(c: &mut Criterion) {
    let design = SimDesign::example1(1.0, 100).with_reps(20);
    let mut g = c.benchmark_group("study");
    g.sample_size(10);
    g.bench_function("example1_20reps_1worker", |b| b.iter(|| run_study(black_box(&design), 1).unwrap()));
    g.finish();
}

criterion_group!(benches, lars_path, candidates, selection, study);
criterion_main!(benches);
