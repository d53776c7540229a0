//! Counterexample construction on ring-shaped supports.

use extshap_core::counterexample::pair_objectives;
use extshap_core::{
    admissible_pairs, aggregate_shap, find_counterexample, ring_support, shap_field, CounterexampleOptions,
    DiscreteDistribution, Grid,
};

#[test]
fn ring_on_larger_grid_hides_feature() {
    let grid = Grid::integer(&[7, 7]).unwrap();
    let mask = ring_support(7, 7, 0.6, 1.0).unwrap();
    let search = find_counterexample(&grid, &mask, 0, &CounterexampleOptions::default()).unwrap();
    let report = search.report.expect("counterexample on the ring");
    let f = report.function().unwrap();
    let mu = report.distribution().unwrap();
    // Aggregate over the data is zero; over the extended distribution it is not.
    assert!(aggregate_shap(&mu, &mu, &f, 0).unwrap() <= 1e-8);
    let star = mu.extended();
    assert!(aggregate_shap(&star, &mu, &f, 0).unwrap() > 1e-6);
    assert!(report.max_abs_shap_on_extended > 1e-6);
    let (a, b) = report.pair;
    assert!(mask[a] && mask[b]);
    assert!(f.at(a) - f.at(b) > 1e-6);
}

#[test]
fn four_by_four_ring() {
    let grid = Grid::integer(&[4, 4]).unwrap();
    let mask = ring_support(4, 4, 0.8, 1.2).unwrap();
    let search = find_counterexample(&grid, &mask, 0, &CounterexampleOptions::default()).unwrap();
    let report = search.report.expect("counterexample");
    assert!(report.max_abs_shap_on_support <= 1e-8);
    assert!(report.max_abs_shap_on_extended > 1e-6);
}

#[test]
fn full_support_admits_no_counterexample() {
    // Data on the whole grid: support and extended support coincide.
    for n in 2..=4 {
        let grid = Grid::integer(&[n, n]).unwrap();
        let mask = vec![true; n * n];
        let search = find_counterexample(&grid, &mask, 1, &CounterexampleOptions::default()).unwrap();
        assert!(search.report.is_none());
        assert!(search.best_objective <= 1e-8);
    }
}

#[test]
fn exhaustive_full_extended_pairs_on_rings() {
    for (n, lo, hi) in [(3, 0.9, 1.1), (4, 0.8, 1.2), (4, 0.0, 0.8)] {
        let grid = Grid::integer(&[n, n]).unwrap();
        let mask = ring_support(n, n, lo, hi).unwrap();
        let mu = DiscreteDistribution::uniform_on(grid.clone(), &mask).unwrap();
        let ext = mu.extended().support_mask(0.0);
        for i in 0..2 {
            let pairs = admissible_pairs(&grid, &ext, i).unwrap();
            let objectives = pair_objectives(&mu, &ext, i, &pairs).unwrap();
            assert!(objectives.iter().all(|&v| v <= 1e-8), "{objectives:?}");
        }
    }
}

#[test]
fn returned_function_checked_against_exact_shap() {
    let grid = Grid::integer(&[5, 5]).unwrap();
    let mask = ring_support(5, 5, 0.7, 1.0).unwrap();
    let search = find_counterexample(&grid, &mask, 1, &CounterexampleOptions::default()).unwrap();
    let report = search.report.expect("counterexample");
    let field = shap_field(&report.distribution().unwrap(), &report.function().unwrap(), 1).unwrap();
    for (c, v) in field.iter().enumerate() {
        if mask[c] {
            assert!(v.abs() <= 1e-8);
        }
    }
}
