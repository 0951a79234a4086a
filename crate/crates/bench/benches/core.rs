use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use mce_core::estimate::count;
use mce_core::simulate::{lazy_cycle, simulate_ensemble};
use mce_core::spectral::pseudo_spectral_gap;
use mce_core::{ChainSpec, EnsembleSpec};

fn ensemble(size: usize, chains: usize, horizon: usize) -> EnsembleSpec {
    let p = lazy_cycle(size, 0.1).unwrap();
    EnsembleSpec::homogeneous(ChainSpec::stationary(p).unwrap(), chains, horizon, 7).unwrap()
}

fn bench_simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    for &(m, t) in &[(2, 5000), (100, 100), (1000, 10)] {
        let spec = ensemble(10, m, t);
        group.throughput(Throughput::Elements((m * t) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(format!("{m}x{t}")), &spec, |b, spec| {
            b.iter(|| simulate_ensemble(black_box(spec)))
        });
    }
    group.finish();
}

fn bench_count(c: &mut Criterion) {
    let mut group = c.benchmark_group("count");
    for &size in &[10, 100] {
        let data = simulate_ensemble(&ensemble(size, 200, 200));
        group.throughput(Throughput::Elements(200 * 200));
        group.bench_with_input(BenchmarkId::from_parameter(size), &data, |b, data| b.iter(|| count(black_box(data))));
    }
    group.finish();
}

fn bench_pseudo_gap(c: &mut Criterion) {
    let mut group = c.benchmark_group("pseudo_spectral_gap");
    group.sample_size(10);
    for &size in &[10, 20, 40] {
        let p = lazy_cycle(size, 0.25).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(size), &p, |b, p| {
            b.iter(|| pseudo_spectral_gap(black_box(p)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_simulate, bench_count, bench_pseudo_gap);
criterion_main!(benches);
