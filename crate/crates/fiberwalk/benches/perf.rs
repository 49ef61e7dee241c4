//! Criterion benchmarks for the data-parallel inner loops.
//!
//! The ensemble estimators run under rayon when the default `parallel`
//! feature is on and sequentially otherwise; bench IDs carry the compiled
//! mode so `cargo bench` and `cargo bench --no-default-features` produce
//! directly comparable entries. Within a single parallel-mode run, the
//! `single_chunk` series is the sequential reference (one chunk, one
//! thread), so the speedup is visible without rebuilding.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use fiberwalk::equivalence::reconstruct_quantum_kernel;
use fiberwalk::lattice::LatticeSpec;
use fiberwalk::model::presets;
use fiberwalk::model::{FieldConfig, ModelSpec, PhysicalConstants};
use fiberwalk::montecarlo::{accumulate_lifted_kernel, estimate_lifted_kernel, JumpProcess};
use fiberwalk::operators::build_lifted_generator;
use fiberwalk::semigroup::{dense_kernel, expm, uniformize, KernelSource};

fn larger_model(sites: usize) -> ModelSpec {
    let lattice = LatticeSpec::new(1, sites, 1.0).unwrap();
    let fields = FieldConfig::zero(&lattice);
    ModelSpec::new(lattice, PhysicalConstants::natural(), fields, None).unwrap()
}

fn bench_path_sampling(c: &mut Criterion) {
    let model = presets::free();
    let process = JumpProcess::new(&model).unwrap();
    let mode = fiberwalk::parallelism();
    let mut group = c.benchmark_group("path_sampling");
    for &n in &[10_000u64, 40_000] {
        group.bench_with_input(BenchmarkId::new(mode, n), &n, |b, &n| {
            b.iter(|| black_box(estimate_lifted_kernel(&model, 0, 0.5, n, 7).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("single_chunk", n), &n, |b, &n| {
            b.iter(|| black_box(accumulate_lifted_kernel(&process, 0, 0.5, 7, 0..n)))
        });
    }
    group.finish();
}

fn bench_kernels(c: &mut Criterion) {
    let mode = fiberwalk::parallelism();
    let mut group = c.benchmark_group("kernels");
    group.sample_size(20);

    let model = larger_model(48); // 192 fiber states
    let lifted = build_lifted_generator(&model).unwrap();
    group.bench_function(BenchmarkId::new(format!("uniformize_{mode}"), 192), |b| {
        b.iter(|| black_box(uniformize(&lifted, 1.0, 1e-10).unwrap()))
    });

    let dense = lifted.matrix.to_dense();
    group.bench_function(BenchmarkId::new("expm_dense", 192), |b| {
        b.iter(|| black_box(expm(&dense, 1.0).unwrap()))
    });
    group.finish();
}

fn bench_reconstruction(c: &mut Criterion) {
    let mut group = c.benchmark_group("reconstruction");
    group.sample_size(20);
    let model = larger_model(16);
    let lifted = build_lifted_generator(&model).unwrap();
    group.bench_function("fiber_sum_corrected_L16", |b| {
        b.iter(|| {
            let kernel = dense_kernel(&lifted, 0.2, KernelSource::Lifted).unwrap();
            black_box(reconstruct_quantum_kernel(&kernel, &model).unwrap())
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_path_sampling,
    bench_kernels,
    bench_reconstruction
);
criterion_main!(benches);
