//! Criterion suite comparing the rayon data-parallel paths against the
//! sequential fallbacks (the same code compiled with
//! `--no-default-features`). Both variants are benchmarked from one binary:
//! the `*_seq` twins are always built, the parallel entry points dispatch to
//! them when the `parallel` feature is off.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pn_core::grid::{Grid1D, Grid2D};
use pn_core::kernel::{AngularKernel, KernelEval};
use pn_core::operator::HalflapOperator;
use pn_core::params::ElasticParams;
use pn_core::spectral::SpectralField2D;
use pn_core::stability::CellPairQuadrature;
use std::hint::black_box;

fn bench_pair_energy(c: &mut Criterion) {
    let grid = Grid2D::new(36.0, 36.0, 96, 96).unwrap();
    let ke = KernelEval::build(ElasticParams::with_beta(4.0 / 3.0).unwrap()).unwrap();
    let quad = CellPairQuadrature::new(grid, &ke).unwrap();
    let field = SpectralField2D::from_fn(grid, |x1, x2| (0.4 * x1).sin() * (0.3 * x2).cos());
    let in_ball = quad.ball_indicator(12.0);

    let mut group = c.benchmark_group("pair_energy_96x96");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("parallel", "default"), |b| {
        b.iter(|| black_box(quad.nonlocal_energy(&field.samples, &in_ball)))
    });
    group.bench_function(BenchmarkId::new("sequential", "fallback"), |b| {
        b.iter(|| black_box(quad.nonlocal_energy_seq(&field.samples, &in_ball)))
    });
    group.finish();
}

fn bench_halflap_apply(c: &mut Criterion) {
    let grid = Grid1D::new(200.0, 4096).unwrap();
    let op = HalflapOperator::new(grid, (-1.0, 1.0), 2.0 / std::f64::consts::PI);
    let values: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| (2.0 / std::f64::consts::PI) * x.atan())
        .collect();

    let mut group = c.benchmark_group("halflap_apply_4096");
    group.sample_size(20);
    group.bench_function(BenchmarkId::new("parallel", "default"), |b| {
        b.iter(|| black_box(op.apply(&values)))
    });
    group.bench_function(BenchmarkId::new("sequential", "fallback"), |b| {
        b.iter(|| black_box(op.apply_seq(&values)))
    });
    group.finish();
}

fn bench_angular_tables(c: &mut Criterion) {
    // Independent tables may build in parallel at the caller's level; the
    // per-call construction stays single-threaded.
    let betas = [0.75, 0.9, 1.2, 4.0 / 3.0];
    let mut group = c.benchmark_group("angular_tables_4betas");
    group.sample_size(10);
    #[cfg(feature = "parallel")]
    group.bench_function(BenchmarkId::new("parallel", "rayon over betas"), |b| {
        use rayon::prelude::*;
        b.iter(|| {
            let tables: Vec<_> = betas
                .par_iter()
                .map(|&beta| AngularKernel::solve(beta, 256, 16).unwrap())
                .collect();
            black_box(tables)
        })
    });
    group.bench_function(BenchmarkId::new("sequential", "loop over betas"), |b| {
        b.iter(|| {
            let tables: Vec<_> = betas
                .iter()
                .map(|&beta| AngularKernel::solve(beta, 256, 16).unwrap())
                .collect();
            black_box(tables)
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_pair_energy,
    bench_halflap_apply,
    bench_angular_tables
);
criterion_main!(benches);
