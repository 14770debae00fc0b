use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use topovor_bench::lattice;
use topovor_core::{balance, graph_voronoi, BalanceConfig, Metric, NodeId, PowerPointSet};

fn corners(w: usize, h: usize) -> PowerPointSet {
    let c = [0, w - 1, w * (h - 1)];
    PowerPointSet::new(
        c.iter()
            .enumerate()
            .map(|(i, &v)| (i as u32, NodeId(v as u64)))
            .collect(),
    )
}

fn voronoi(c: &mut Criterion) {
    let mut grp = c.benchmark_group("graph_voronoi");
    for side in [10, 30, 60] {
        let g = lattice(side, side);
        let pp = corners(side, side);
        grp.bench_with_input(BenchmarkId::from_parameter(side * side), &g, |b, g| {
            b.iter(|| graph_voronoi(black_box(g), &pp, Metric::Online).unwrap())
        });
    }
    grp.finish();
}

fn balancing(c: &mut Criterion) {
    let g = lattice(30, 30);
    let pp = corners(30, 30);
    let nb = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
    let cfg = BalanceConfig {
        b_lambda: 5.0,
        ..BalanceConfig::default()
    };
    c.bench_function("balance/900", |b| {
        b.iter(|| balance(black_box(&g), &pp, &cfg, Metric::Plain, &nb, None).unwrap())
    });
}

criterion_group!(benches, voronoi, balancing);
criterion_main!(benches);
