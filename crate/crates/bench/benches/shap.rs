use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use extshap_core::random::{random_distribution, random_function};
use extshap_core::kernelshap::kernelshap_rows;
use extshap_core::verify::random_lp;
use extshap_core::{
    find_counterexample, ring_support, scramble_columns, shap_field, solve_lp, CounterexampleOptions,
    Dataset, DiscreteDistribution, Grid, KernelShapConfig,
};

fn exact_shap(c: &mut Criterion) {
    let mut group = c.benchmark_group("shap_field");
    for d in [3usize, 4, 5] {
        let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
        let grid = Grid::integer(&vec![3; d]).unwrap();
        let dist = random_distribution(&mut rng, &grid, 0.3).unwrap();
        let f = random_function(&mut rng, &grid);
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, _| {
            b.iter(|| shap_field(black_box(&dist), black_box(&f), 0).unwrap())
        });
    }
    group.finish();
}

fn kernel_shap(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = Grid::integer(&[3, 3, 3, 3]).unwrap();
    let f = random_function(&mut rng, &grid);
    let cells: Vec<usize> = (0..200).map(|k| (k * 37) % grid.num_cells()).collect();
    let data = Dataset::from_cells(&grid, &cells).unwrap();
    let full = KernelShapConfig::full();
    let sampled = KernelShapConfig::sampled(256, 5);
    c.bench_function("kernelshap_full_200x4", |b| b.iter(|| kernelshap_rows(black_box(&data), &f, &full).unwrap()));
    c.bench_function("kernelshap_sampled_200x4", |b| b.iter(|| kernelshap_rows(black_box(&data), &f, &sampled).unwrap()));
    c.bench_function("scramble_200x4", |b| b.iter(|| scramble_columns(black_box(&data), 3)));
}

fn simplex(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let problems: Vec<_> = (0..32).map(|_| random_lp(&mut rng)).collect();
    c.bench_function("simplex_random_32", |b| {
        b.iter(|| {
            for p in &problems {
                black_box(solve_lp(p).unwrap());
            }
        })
    });
}

fn counterexample(c: &mut Criterion) {
    let mut group = c.benchmark_group("counterexample_ring");
    group.sample_size(20);
    for n in [3usize, 5, 9] {
        let grid = Grid::integer(&[n, n]).unwrap();
        let mask = ring_support(n, n, 0.55, 1.0).unwrap();
        let opts = CounterexampleOptions::default();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| find_counterexample(black_box(&grid), &mask, 0, &opts).unwrap())
        });
    }
    group.finish();
    let grid = Grid::integer(&[3, 3]).unwrap();
    let dist = DiscreteDistribution::uniform(grid);
    let opts = CounterexampleOptions { full_extended: true, ..Default::default() };
    c.bench_function("counterexample_full_extended_3x3", |b| {
        b.iter(|| extshap_core::find_counterexample_for(black_box(&dist), 0, &opts).unwrap())
    });
}

criterion_group!(benches, exact_shap, kernel_shap, simplex, counterexample);
criterion_main!(benches);
