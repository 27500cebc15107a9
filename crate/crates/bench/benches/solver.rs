use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rlr_bench::{ridge, sparse_l1};
use rlr_core::scalar_math::gauss_hermite;
use rlr_core::theory::{solve_fixed_point, solve_l2_reduced, system_map_with, PenaltyRoute};
use rlr_core::{FixedPoint, SolverKnobs};

fn quadrature(c: &mut Criterion) {
    let mut group = c.benchmark_group("gauss_hermite");
    for order in [20, 80, 200] {
        group.bench_with_input(BenchmarkId::from_parameter(order), &order, |b, &n| {
            b.iter(|| rlr_core::scalar_math::gauss_hermite(black_box(n)).unwrap())
        });
    }
    group.finish();
}

fn system_map(c: &mut Criterion) {
    let rule = gauss_hermite(80).unwrap();
    let v = FixedPoint::new(0.3, 0.3, 0.2, 0.4, 15.0, 0.45);
    let spec = sparse_l1(4.0, 0.8);
    let mut group = c.benchmark_group("system_map_l1");
    for (name, route) in [("quadrature", PenaltyRoute::Quadrature), ("closed_form", PenaltyRoute::ClosedForm)] {
        group.bench_function(name, |b| b.iter(|| system_map_with(black_box(&v), &spec, &rule, route).unwrap()));
    }
    group.finish();
}

fn solves(c: &mut Criterion) {
    let knobs = SolverKnobs::default();
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    let ridge_spec = ridge(4.0, 0.5);
    group.bench_function("l2sq_full", |b| b.iter(|| solve_fixed_point(black_box(&ridge_spec), &knobs).unwrap()));
    group.bench_function("l2sq_reduced", |b| b.iter(|| solve_l2_reduced(black_box(&ridge_spec), &knobs).unwrap()));
    let l1_spec = sparse_l1(4.0, 0.8);
    let closed = SolverKnobs {
        route: PenaltyRoute::ClosedForm,
        ..knobs
    };
    group.bench_function("l1_quadrature", |b| b.iter(|| solve_fixed_point(black_box(&l1_spec), &knobs).unwrap()));
    group.bench_function("l1_closed_form", |b| b.iter(|| solve_fixed_point(black_box(&l1_spec), &closed).unwrap()));
    group.finish();
}

criterion_group!(benches, quadrature, system_map, solves);
criterion_main!(benches);
