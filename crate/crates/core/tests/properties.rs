//! Invariants over random instances.

use extshap_core::kernelshap::{constrained_solution, structured_solution};
use extshap_core::random::{random_determined, random_distribution, random_function, random_grid, random_product};
use extshap_core::{
    aggregate_shap, determinedness, m_matrix, reconstruct_determined, scramble_columns, shap_all, shap_field,
    value_function, Dataset, FeatureSubset, ProblemFile,
};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn efficiency_and_bounds(seed in any::<u64>(), d in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = random_grid(&mut rng, d, 3).unwrap();
        let mu = random_distribution(&mut rng, &grid, 0.3).unwrap();
        let f = random_function(&mut rng, &grid);
        for x in 0..grid.num_cells() {
            let r = shap_all(&mu, &f, x).unwrap();
            let total: f64 = r.per_feature.iter().sum();
            prop_assert!((total - (f.at(x) - r.base_value)).abs() < 1e-12);
            // f in [0, 1] keeps every attribution in [-1, 1].
            prop_assert!(r.per_feature.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn null_feature_gets_zero(seed in any::<u64>(), d in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = random_grid(&mut rng, d, 3).unwrap();
        let mu = random_distribution(&mut rng, &grid, 0.3).unwrap();
        let i = rng.random_range(0..d);
        let f = random_determined(&mut rng, &grid, FeatureSubset::full(d).without(i));
        let field = shap_field(&mu, &f, i).unwrap();
        prop_assert!(field.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn linear_in_f(seed in any::<u64>(), d in 1usize..=3, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = random_grid(&mut rng, d, 3).unwrap();
        let mu = random_distribution(&mut rng, &grid, 0.3).unwrap();
        let f = random_function(&mut rng, &grid);
        let g = random_function(&mut rng, &grid);
        let h = f.combine(a, &g, b).unwrap();
        let x = rng.random_range(0..grid.num_cells());
        let (rf, rg, rh) = (shap_all(&mu, &f, x).unwrap(), shap_all(&mu, &g, x).unwrap(), shap_all(&mu, &h, x).unwrap());
        for k in 0..d {
            prop_assert!((rh.per_feature[k] - (a * rf.per_feature[k] + b * rg.per_feature[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn value_function_endpoints(seed in any::<u64>(), d in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = random_grid(&mut rng, d, 3).unwrap();
        let mu = random_distribution(&mut rng, &grid, 0.3).unwrap();
        let f = random_function(&mut rng, &grid);
        let x = rng.random_range(0..grid.num_cells());
        prop_assert_eq!(value_function(&mu, &f, x, FeatureSubset::full(d)).unwrap(), f.at(x));
        let mean = mu.expectation(&f).unwrap();
        prop_assert!((value_function(&mu, &f, x, FeatureSubset::EMPTY).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_is_feature_free_and_bounded(seed in any::<u64>(), d in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = random_grid(&mut rng, d, 3).unwrap();
        let star = random_product(&mut rng, &grid, 0.3).unwrap();
        let f = random_function(&mut rng, &grid);
        let i = rng.random_range(0..d);
        let r = reconstruct_determined(&star, &f, i).unwrap();
        let ext = star.support_mask(0.0);
        prop_assert!(determinedness(&r.g, FeatureSubset::full(d).without(i), &ext, 1e-9).unwrap().determined);
        prop_assert!(r.residual < 1e-10);
        prop_assert!(r.distance_sq <= (d * d) as f64 * r.aggregate_shap + 1e-9);
        let agg = aggregate_shap(&star, &star, &f, i).unwrap();
        prop_assert!((agg - r.aggregate_shap).abs() < 1e-12);
    }

    #[test]
    fn kernel_solutions_agree(d in 2usize..=12, seed in any::<u64>(), total in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = m_matrix(d).unwrap();
        let b = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let generic = constrained_solution(&k.matrix, &b, total).unwrap();
        let fast = structured_solution(k.p, k.q, &b, total);
        prop_assert!((generic - fast).amax() < 1e-9);
    }

    #[test]
    fn scramble_keeps_columns(seed in any::<u64>(), n in 1usize..40, d in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(0..5) as f64).collect()).collect();
        let data = Dataset::new(rows).unwrap();
        let s = scramble_columns(&data, seed);
        prop_assert_eq!(&s, &scramble_columns(&data, seed));
        for j in 0..d {
            let (mut a, mut b) = (data.column(j), s.column(j));
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn problem_file_round_trip(seed in any::<u64>(), d in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = random_grid(&mut rng, d, 3).unwrap();
        let mu = random_distribution(&mut rng, &grid, 0.3).unwrap();
        let f = random_function(&mut rng, &grid);
        let file = ProblemFile::from_parts(&grid, Some(&mu), Some(&f));
        let back = ProblemFile::from_json(&file.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.distribution().unwrap().unwrap(), mu);
        prop_assert_eq!(back.function().unwrap().unwrap(), f);
    }
}
