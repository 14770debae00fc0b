use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use topovor_bench::atsp_matrix;
use topovor_core::mapper::DistanceField;
use topovor_core::planner::{solve_exact, solve_heuristic, CostField, GridParams};
use topovor_core::{Cell, OccupancyGrid, Point2};

fn atsp(c: &mut Criterion) {
    let mut grp = c.benchmark_group("atsp");
    for n in [5, 8, 12] {
        let m = atsp_matrix(n, n as u64);
        grp.bench_with_input(BenchmarkId::new("exact", n), &m, |b, m| {
            b.iter(|| solve_exact(black_box(m)))
        });
    }
    for n in [12, 20] {
        let m = atsp_matrix(n, n as u64);
        grp.bench_with_input(BenchmarkId::new("heuristic", n), &m, |b, m| {
            b.iter(|| solve_heuristic(black_box(m)))
        });
    }
    grp.finish();
}

fn grid_cost(c: &mut Criterion) {
    let mut g = OccupancyGrid::filled(100, 100, 0.1, Cell::Free);
    for k in 0..100 {
        g.set(k, 0, Cell::Occupied);
        g.set(k, 99, Cell::Occupied);
        g.set(0, k, Cell::Occupied);
        g.set(99, k, Cell::Occupied);
        if k < 80 {
            g.set(50, k, Cell::Occupied);
        }
    }
    let f = DistanceField::compute(&g, 2.0);
    let p = GridParams::default();
    c.bench_function("cost_field/100x100", |b| {
        b.iter(|| CostField::compute(black_box(&g), &f, Point2::new(1.0, 1.0), &p).unwrap())
    });
}

criterion_group!(benches, atsp, grid_cost);
criterion_main!(benches);
