//! Seeded random instances for property checks.

use rand::Rng;

use crate::error::Result;
use crate::model::{DiscreteDistribution, FeatureSubset, Grid, TabularFunction};

/// Integer grid with `d` features of size `1..=max_size` (at least 2 when
/// `max_size >= 2`, so every feature can vary).
pub fn random_grid(rng: &mut impl Rng, d: usize, max_size: usize) -> Result<Grid> {
    let lo = max_size.min(2);
    let sizes: Vec<usize> = (0..d).map(|_| rng.random_range(lo..=max_size)).collect();
    Grid::integer(&sizes)
}

/// Random masses, each cell dropped with probability `zero_prob`; at least
/// one cell keeps mass.
pub fn random_distribution(rng: &mut impl Rng, grid: &Grid, zero_prob: f64) -> Result<DiscreteDistribution> {
    let n = grid.num_cells();
    let mut w: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(zero_prob) { 0.0 } else { rng.random_range(0.05..1.0) })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        w[rng.random_range(0..n)] = 1.0;
    }
    DiscreteDistribution::from_weights(grid.clone(), w)
}

/// Product of random marginals; each value dropped from its marginal with
/// probability `zero_prob`, keeping at least one.
pub fn random_product(rng: &mut impl Rng, grid: &Grid, zero_prob: f64) -> Result<DiscreteDistribution> {
    let marginals: Vec<Vec<f64>> = (0..grid.d())
        .map(|i| {
            let k = grid.size(i);
            let mut w: Vec<f64> =
                (0..k).map(|_| if rng.random_bool(zero_prob) { 0.0 } else { rng.random_range(0.05..1.0) }).collect();
            if w.iter().all(|&v| v == 0.0) {
                w[rng.random_range(0..k)] = 1.0;
            }
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect()
        })
        .collect();
    DiscreteDistribution::product(grid.clone(), &marginals)
}

/// Values uniform on `[0, 1)`.
pub fn random_function(rng: &mut impl Rng, grid: &Grid) -> TabularFunction {
    let values = (0..grid.num_cells()).map(|_| rng.random::<f64>()).collect();
    TabularFunction::new(grid.clone(), values).expect("sized to grid")
}

/// Values in `[0, 1)` that depend only on the coordinates in `subset`.
pub fn random_determined(rng: &mut impl Rng, grid: &Grid, subset: FeatureSubset) -> TabularFunction {
    let table: Vec<f64> = (0..grid.num_cells()).map(|_| rng.random::<f64>()).collect();
    let values = (0..grid.num_cells()).map(|x| table[grid.project(x, subset)]).collect();
    TabularFunction::new(grid.clone(), values).expect("sized to grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::is_determined;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_respect_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let grid = random_grid(&mut rng, 3, 3).unwrap();
            assert!(grid.sizes().iter().all(|&s| (2..=3).contains(&s)));
            let mu = random_distribution(&mut rng, &grid, 0.3).unwrap();
            assert!((mu.mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let star = random_product(&mut rng, &grid, 0.3).unwrap();
            assert!(star.product_deviation() < 1e-12);
            let s = FeatureSubset::from_features(&[0, 2]);
            let g = random_determined(&mut rng, &grid, s);
            assert!(is_determined(&g, s, &vec![true; grid.num_cells()], 0.0).unwrap());
            assert!(random_function(&mut rng, &grid).values().iter().all(|v| (0.0..1.0).contains(v)));
        }
    }
}
