use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use netsel_core::engine::run_simulation;
use netsel_core::metrics::enumerate_nash;
use netsel_core::policies::{probability_update, PolicyKind};
use netsel_core::presets;

fn bench_probability_update(c: &mut Criterion) {
    let weights = vec![1.0, 2.5, 0.7, 13.0, 4.2];
    c.bench_function("probability_update k=5", |b| {
        b.iter(|| probability_update(black_box(&weights), black_box(0.3)).unwrap())
    });
}

fn bench_enumerate_nash(c: &mut Criterion) {
    c.bench_function("enumerate_nash (4,7,22) n=20", |b| {
        b.iter(|| enumerate_nash(black_box(&[4.0, 7.0, 22.0]), black_box(20)))
    });
}

fn bench_run_simulation(c: &mut Criterion) {
    let mut scenario = presets::setting1(PolicyKind::SmartExp3);
    scenario.horizon_slots = 300;
    c.bench_function("run_simulation 20 devices x 300 slots", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            run_simulation(black_box(&scenario), black_box(seed)).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_probability_update,
    bench_enumerate_nash,
    bench_run_simulation
);
criterion_main!(benches);
