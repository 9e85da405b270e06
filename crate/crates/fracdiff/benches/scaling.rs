//! Criterion benchmarks: linear-vs-quadratic scaling of the evaluators and,
//! when the `parallel` feature is active, serial-pool vs parallel-pool runs
//! of the same workloads.
//!
//! Run `cargo bench` for the rayon-backed build and
//! `cargo bench --no-default-features` for the sequential fallback.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fracdiff::expsum::{build_expsum, select_truncation};
use fracdiff::fast::evaluate_fast;
use fracdiff::laguerre::{run_gl, SteppingMethod};
use fracdiff::oracle::direct_integral;
use fracdiff::problem::{FractionalOrder, FractionalProblem, SourceFunction, TimeGrid};
use fracdiff::split::{split_evaluate, HistoryWindow};

fn problem() -> FractionalProblem {
    let order = FractionalOrder::new(0.5).unwrap();
    FractionalProblem::new(order, 0.0, 1.0, SourceFunction::Sine).unwrap()
}

fn bench_gl(c: &mut Criterion) {
    let p = problem();
    let mut group = c.benchmark_group("run_gl_trap_lambda40");
    for steps in [4096usize, 8192, 16384] {
        let grid = TimeGrid::uniform(0.0, 1.0, steps).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(steps), &grid, |b, grid| {
            b.iter(|| run_gl(black_box(&p), grid, 40, SteppingMethod::Trapezoidal).unwrap());
        });
    }
    group.finish();
}

fn bench_fast(c: &mut Criterion) {
    let p = problem();
    let order = p.order();
    let mut group = c.benchmark_group("evaluate_fast");
    for steps in [4096usize, 8192, 16384] {
        let grid = TimeGrid::uniform(0.0, 1.0, steps).unwrap();
        let delta = grid.min_step();
        let (m, n) = select_truncation(order, 0.25, delta, 1.0, 1e-8).unwrap();
        let expsum = build_expsum(order, 0.25, m, n).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(steps), &grid, |b, grid| {
            b.iter(|| evaluate_fast(black_box(&p), grid, &expsum, delta).unwrap());
        });
    }
    group.finish();
}

fn bench_split(c: &mut Criterion) {
    let p = problem();
    let window = HistoryWindow::for_problem(0.25, &p).unwrap();
    let mut group = c.benchmark_group("split_evaluate_trap_lambda40");
    for steps in [512usize, 1024] {
        let grid = TimeGrid::uniform(0.25, 1.0, steps).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(steps), &grid, |b, grid| {
            b.iter(|| {
                split_evaluate(black_box(&p), grid, window, 40, SteppingMethod::Trapezoidal)
                    .unwrap()
            });
        });
    }
    group.finish();
}

fn bench_oracle(c: &mut Criterion) {
    let p = problem();
    let mut group = c.benchmark_group("direct_integral");
    group.sample_size(20);
    for steps in [512usize, 1024, 2048] {
        let grid = TimeGrid::uniform(0.0, 1.0, steps).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(steps), &grid, |b, grid| {
            b.iter(|| direct_integral(black_box(&p), grid).unwrap());
        });
    }
    group.finish();
}

#[cfg(feature = "parallel")]
fn bench_pools(c: &mut Criterion) {
    let p = problem();
    let grid = TimeGrid::uniform(0.0, 1.0, 2048).unwrap();
    let mut group = c.benchmark_group("direct_integral_pools_p2048");
    group.sample_size(20);
    group.bench_function("one_thread", |b| {
        b.iter(|| fracdiff::with_threads(1, || direct_integral(black_box(&p), &grid).unwrap()));
    });
    group.bench_function("all_threads", |b| {
        b.iter(|| direct_integral(black_box(&p), &grid).unwrap());
    });
    group.finish();
}

#[cfg(not(feature = "parallel"))]
fn bench_pools(_c: &mut Criterion) {}

criterion_group!(
    benches,
    bench_gl,
    bench_fast,
    bench_split,
    bench_oracle,
    bench_pools
);
criterion_main!(benches);
