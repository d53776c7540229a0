//! Fast paths against the slow reference implementations.

use extshap_core::kernelshap::kernelshap_rows;
use extshap_core::oracle::{permutation_shap, vertex_enumeration};
use extshap_core::random::{random_distribution, random_function, random_grid};
use extshap_core::verify::random_lp;
use extshap_core::{
    empirical_distribution, kernelshap_limit, kernelshap_point, shap_all, solve_lp, Dataset, DiscreteDistribution,
    Grid, KernelShapConfig, LpStatus, TabularFunction,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn exact_shap_matches_permutation_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..60 {
        let d = rng.random_range(1..=4);
        let grid = random_grid(&mut rng, d, 3).unwrap();
        let mu = random_distribution(&mut rng, &grid, 0.4).unwrap();
        let f = random_function(&mut rng, &grid);
        for x in 0..grid.num_cells() {
            let fast = shap_all(&mu, &f, x).unwrap().per_feature;
            let slow = permutation_shap(&mu, &f, x);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12, "{fast:?} vs {slow:?}");
            }
        }
    }
}

#[test]
fn five_feature_permutation_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let grid = Grid::integer(&[2, 2, 2, 2, 2]).unwrap();
    let mu = random_distribution(&mut rng, &grid, 0.5).unwrap();
    let f = random_function(&mut rng, &grid);
    for x in [0, 7, 19, 31] {
        let fast = shap_all(&mu, &f, x).unwrap().per_feature;
        let slow = permutation_shap(&mu, &f, x);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut optimal = 0;
    for _ in 0..500 {
        let p = random_lp(&mut rng);
        let sol = solve_lp(&p).unwrap();
        let oracle = vertex_enumeration(&p.objective, &p.eq_matrix, &p.rhs, &p.lower, &p.upper, 1e-9);
        match (sol.status, oracle) {
            (LpStatus::Optimal, Some(best)) => {
                optimal += 1;
                assert!((sol.objective - best).abs() < 1e-8, "{p:?}: {} vs {best}", sol.objective);
                assert!(sol.residual <= 1e-8);
                for j in 0..p.num_vars() {
                    assert!(sol.x[j] >= p.lower[j] && sol.x[j] <= p.upper[j]);
                }
            }
            (LpStatus::Infeasible, None) => {}
            other => panic!("{p:?}: {other:?}"),
        }
    }
    assert!(optimal > 300);
}

#[test]
fn full_enumeration_equals_limit_on_empirical_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let d = rng.random_range(2..=4);
        let grid = random_grid(&mut rng, d, 3).unwrap();
        let n = rng.random_range(1..=25);
        let cells: Vec<usize> = (0..n).map(|_| rng.random_range(0..grid.num_cells())).collect();
        let data = Dataset::from_cells(&grid, &cells).unwrap();
        let f = random_function(&mut rng, &grid);
        let emp = extshap_core::model::empirical_on_grid(&grid, &data).unwrap();
        let rows = kernelshap_rows(&data, &f, &KernelShapConfig::full()).unwrap();
        for (row, &x) in rows.iter().zip(&cells) {
            let limit = kernelshap_limit(&emp, &f, x).unwrap();
            let exact = shap_all(&emp, &f, x).unwrap();
            for k in 0..d {
                assert!((row.per_feature[k] - limit.per_feature[k]).abs() < 1e-10);
                assert!((row.per_feature[k] - exact.per_feature[k]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn sampled_kernelshap_approaches_exact() {
    let grid = Grid::integer(&[3, 3, 2]).unwrap();
    let f = TabularFunction::from_fn(grid.clone(), |x| (x[0] * x[1] + x[2]) / 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cells: Vec<usize> = (0..400).map(|_| rng.random_range(0..grid.num_cells())).collect();
    let data = Dataset::from_cells(&grid, &cells).unwrap();
    let (_, emp) = empirical_distribution(&data).unwrap();
    let emp = DiscreteDistribution::new(grid.clone(), emp.mass().to_vec()).unwrap();
    let x = 17;
    let exact = shap_all(&emp, &f, x).unwrap().per_feature;
    let cfg = KernelShapConfig::sampled(200_000, 1);
    let approx = kernelshap_point(&data, &f, x, &cfg).unwrap().per_feature;
    for (a, b) in approx.iter().zip(&exact) {
        assert!((a - b).abs() < 0.02, "{approx:?} vs {exact:?}");
    }
}
