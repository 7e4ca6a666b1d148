use std::f64::consts::PI;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use floquet_core::bands::{build_band_table, uniform_grid, BandOptions};
use floquet_core::desk::cosine_example;
use floquet_core::galerkin::{assemble_fiber_matrix, solve_fiber, DEFAULT_GUARD, DEFAULT_HERMITIAN_TOL};
use floquet_core::monodromy::{DeterminantEvaluator, MonodromyOptions};

fn fiber(c: &mut Criterion) {
    let spec = cosine_example(PI * PI);
    let mut group = c.benchmark_group("fiber");
    for k in [10usize, 20, 40] {
        group.bench_with_input(BenchmarkId::new("assemble", k), &k, |b, &k| {
            b.iter(|| assemble_fiber_matrix(&spec, black_box(0.3), 1.0, k, DEFAULT_HERMITIAN_TOL).unwrap())
        });
        let matrix = assemble_fiber_matrix(&spec, 0.3, 1.0, k, DEFAULT_HERMITIAN_TOL).unwrap();
        group.bench_with_input(BenchmarkId::new("solve", k), &matrix, |b, m| {
            b.iter(|| solve_fiber(black_box(m), DEFAULT_GUARD).unwrap())
        });
    }
    group.finish();
}

fn band_table(c: &mut Criterion) {
    let spec = cosine_example(PI * PI);
    let grid = uniform_grid(-1.0, 1.0, 17);
    let opts = BandOptions::defaults(&spec);
    let mut group = c.benchmark_group("bands");
    group.sample_size(10);
    group.bench_function("table_17_points", |b| {
        b.iter(|| build_band_table(&spec, black_box(&grid), &opts).unwrap())
    });
    group.finish();
}

fn determinant(c: &mut Criterion) {
    let spec = cosine_example(PI * PI);
    let eval = DeterminantEvaluator::new(&spec, MonodromyOptions::default());
    let mut group = c.benchmark_group("determinant");
    group.sample_size(10);
    for lambda in [100.0, 2000.0, 20000.0] {
        group.bench_with_input(BenchmarkId::new("evaluate", lambda), &lambda, |b, &l| {
            b.iter(|| eval.determinant(black_box(Complex64::new(l, 0.0)), 0.5).unwrap())
        });
    }
    let root = (2.0 * PI * 2.0 + 0.5 * PI).powi(3);
    group.bench_function("count_roots_b2", |b| {
        b.iter(|| eval.count_roots(0.5, root - 800.0, root + 800.0, 400.0, 128).unwrap())
    });
    group.finish();
}

criterion_group!(benches, fiber, band_table, determinant);
criterion_main!(benches);
