use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use standage_bench::{canopy_cloud, scene_stack, training_set};
use standage_core::fitting::{ols_fit, stepwise_select};
use standage_core::mapping::predict_map;
use standage_core::predictors::{als_metrics, metrics_grid};
use standage_core::{Link, ModelRegistry};

fn metrics(c: &mut Criterion) {
    let mut g = c.benchmark_group("metrics");
    for per_cell in [100, 500] {
        let (cloud, template) = canopy_cloud(32, per_cell, 1);
        g.throughput(Throughput::Elements(cloud.len() as u64));
        g.bench_with_input(BenchmarkId::new("als_metrics", cloud.len()), &cloud, |b, cl| {
            b.iter(|| als_metrics(black_box(cl)).unwrap())
        });
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        g.bench_with_input(BenchmarkId::new("metrics_grid_1t", cloud.len()), &cloud, |b, cl| {
            b.iter(|| single.install(|| metrics_grid(black_box(cl), &template).unwrap()))
        });
    }
    g.finish();
}

fn mapping(c: &mut Criterion) {
    let reg = ModelRegistry::builtin();
    let mut g = c.benchmark_group("predict_map");
    for n in [64, 256] {
        let stack = scene_stack(n, n, 2);
        g.throughput(Throughput::Elements((n * n) as u64));
        g.bench_with_input(BenchmarkId::from_parameter(n * n), &stack, |b, s| {
            b.iter(|| predict_map(black_box(s), &reg).unwrap())
        });
    }
    g.finish();
}

fn fitting(c: &mut Criterion) {
    let (data, names) = training_set(500, 3);
    let mut g = c.benchmark_group("fitting");
    g.bench_function("ols_6_terms", |b| b.iter(|| ols_fit(black_box(&data), &names, Link::Log).unwrap()));
    g.bench_function("stepwise_6_candidates", |b| {
        b.iter(|| stepwise_select(black_box(&data), &names, Link::Log).unwrap())
    });
    g.finish();
}

criterion_group!(benches, metrics, mapping, fitting);
criterion_main!(benches);
