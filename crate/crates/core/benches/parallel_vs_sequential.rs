//! Same workloads on a one-thread pool and on the default pool. Build with
//! `--no-default-features` to time the plain sequential code path instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use proxlab_core::checks::{check_cycle_inequality, check_firmly_nonexpansive, OperatorUnderTest};
use proxlab_core::dynamics::{super_regularity_probe, ProbeParams};
use proxlab_core::metric::{metric, ProbeSpec};
use proxlab_core::ConvexFunction;
use rayon::ThreadPool;

fn pools() -> Vec<(String, ThreadPool)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    let n = all.current_num_threads();
    vec![("sequential".into(), one), (format!("parallel-{n}"), all)]
}

fn bench_metric(c: &mut Criterion) {
    let f = ConvexFunction::zero(2).unwrap();
    let g = ConvexFunction::abs_sum(2, 1.0).unwrap();
    let probe = ProbeSpec::Mesh { h: 0.05 };
    let mut group = c.benchmark_group("metric-2d-N8");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| metric(&f, &g, 8, &probe).unwrap()))
        });
    }
    group.finish();
}

fn bench_checks(c: &mut Criterion) {
    let t = OperatorUnderTest::prox(&ConvexFunction::huber(2, 0.5).unwrap(), 1.0).unwrap();
    let mut group = c.benchmark_group("checks-1e4");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("firm", &name), |b| {
            b.iter(|| pool.install(|| check_firmly_nonexpansive(&t, 10_000, 0).unwrap()))
        });
        group.bench_function(BenchmarkId::new("cycle", &name), |b| {
            b.iter(|| pool.install(|| check_cycle_inequality(&t, 6, 10_000, 0).unwrap()))
        });
    }
    group.finish();
}

fn bench_dynamics(c: &mut Criterion) {
    let f = ConvexFunction::perturbed(ConvexFunction::eucl_norm(3, 1.0).unwrap(), 0.01).unwrap();
    let params = ProbeParams { starts: 256, ..Default::default() };
    let mut group = c.benchmark_group("super-regularity-256-starts");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| super_regularity_probe(&f, 2.0, &params).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_metric, bench_checks, bench_dynamics);
criterion_main!(benches);
