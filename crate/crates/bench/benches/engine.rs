use bloch_bench::{phonon, phonon_assembly};
use bloch_core::kernels::RateTable;
use bloch_core::solvers::{solve_direct, solve_leading_order};
use bloch_core::spectral::eigendecompose;
use bloch_core::{Grid, KernelIndex, SolverOptions};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn rate_table(c: &mut Criterion) {
    let spec = phonon();
    let mut group = c.benchmark_group("rate_table");
    for n in [100usize, 400] {
        let grid = Grid::build(n, 40.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &grid, |b, g| {
            b.iter(|| RateTable::build(black_box(g), &spec, 0.01).unwrap())
        });
    }
    group.finish();
}

fn assembly(c: &mut Criterion) {
    let a = phonon_assembly(400);
    c.bench_function("assemble_k0_n400", |b| {
        b.iter(|| black_box(a.kernel(KernelIndex::Zero)))
    });
}

fn spectrum(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigendecompose");
    group.sample_size(10);
    for n in [100usize, 400] {
        let a = phonon_assembly(n);
        let sym = a.symmetrized().unwrap();
        let m = a.measure();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| eigendecompose(black_box(&sym), &m).unwrap())
        });
    }
    group.finish();
}

fn solvers(c: &mut Criterion) {
    let a = phonon_assembly(400);
    let opts = SolverOptions::default();
    let mut group = c.benchmark_group("solve_n400");
    group.sample_size(10);
    group.bench_function("direct", |b| b.iter(|| solve_direct(black_box(&a), &opts).unwrap()));
    group.bench_function("leading", |b| {
        b.iter(|| solve_leading_order(black_box(&a), &opts).unwrap())
    });
    group.finish();
}

criterion_group!(benches, rate_table, assembly, spectrum, solvers);
criterion_main!(benches);
