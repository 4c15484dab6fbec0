use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use hyperperc::graphs::{build_tiling, build_tree, TreeBall};
use hyperperc::operators::{exact_tree_tmatrix, mc_tmatrix, norm_2, norm_q};
use hyperperc::oracles::{tree_cluster_size_pmf, tree_polygon};
use hyperperc::percolation::{cluster_tail, sample, susceptibility_estimate};

fn sampling(c: &mut Criterion) {
    let w = build_tiling(3, 7, 5).unwrap();
    c.bench_function("sample_tiling_3_7_r5", |b| b.iter(|| sample(&w, black_box(0.3), 7).unwrap()));
    let ball = TreeBall { k: 3, radius: 200 };
    c.bench_function("susceptibility_treeball_1e3", |b| {
        b.iter(|| susceptibility_estimate(&ball, black_box(0.45), 0, 1000, 1).unwrap())
    });
    c.bench_function("cluster_tail_treeball_1e3", |b| {
        b.iter(|| cluster_tail(&ball, black_box(0.5), 0, &[10, 100], 1000, 1).unwrap())
    });
}

fn operators(c: &mut Criterion) {
    let w = build_tree(3, 6).unwrap();
    let t = exact_tree_tmatrix(&w, 0.4).unwrap();
    c.bench_function("norm2_tree_r6", |b| b.iter(|| norm_2(black_box(&t))));
    c.bench_function("norm_q_1_5_tree_r6", |b| b.iter(|| norm_q(black_box(&t), 1.5).unwrap()));
    let tiling = build_tiling(3, 7, 2).unwrap();
    c.bench_function("mc_tmatrix_tiling_1e3", |b| b.iter(|| mc_tmatrix(&tiling, black_box(0.2), 1000, 3).unwrap()));
}

fn oracles(c: &mut Criterion) {
    c.bench_function("tree_polygon_n4", |b| b.iter(|| tree_polygon(3, black_box(0.4), 4, 100).unwrap()));
    c.bench_function("dwass_pmf_1e5", |b| b.iter(|| tree_cluster_size_pmf(3, black_box(0.5), 100_000)));
}

criterion_group!(benches, sampling, operators, oracles);
criterion_main!(benches);
