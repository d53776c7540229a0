//! Exact interventional SHAP by full subset enumeration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DiscreteDistribution, FeatureSubset, TabularFunction};

/// Shapley weights `1 / (d * C(d-1, |S|))`, kept as denominators so each
/// weighted difference is a single division.
#[derive(Debug, Clone)]
pub struct ShapleyWeights {
    denominators: Vec<f64>,
}

impl ShapleyWeights {
    pub fn new(d: usize) -> Self {
        // Pascal triangle row d-1; exact in f64 for d <= 20.
        let mut row = vec![1.0f64];
        for _ in 1..d {
            let mut next = vec![1.0; row.len() + 1];
            for k in 1..row.len() {
                next[k] = row[k - 1] + row[k];
            }
            row = next;
        }
        let dd = d as f64;
        Self { denominators: row.into_iter().map(|c| dd * c).collect() }
    }

    /// Weights with the sign of the `size` entry flipped; a deliberate fault
    /// used to confirm that the verification battery catches broken weights.
    pub fn with_negated(mut self, size: usize) -> Self {
        if let Some(w) = self.denominators.get_mut(size) {
            *w = -*w;
        }
        self
    }

    /// Apply the weight for subsets of size `size` to `diff`.
    #[inline]
    pub fn apply(&self, size: usize, diff: f64) -> f64 {
        diff / self.denominators[size]
    }

    pub fn weight(&self, size: usize) -> f64 {
        1.0 / self.denominators[size]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapReport {
    pub point: usize,
    pub per_feature: Vec<f64>,
    pub base_value: f64,
}

/// Interventional value functions of one `(dist, f)` pair.
pub(crate) struct ValueFunctions<'a> {
    dist: &'a DiscreteDistribution,
    f: &'a TabularFunction,
    support: Vec<(usize, f64)>,
    /// Subtracted before averaging; SHAP values do not depend on it.
    offset: f64,
}

impl<'a> ValueFunctions<'a> {
    pub(crate) fn new(dist: &'a DiscreteDistribution, f: &'a TabularFunction) -> Result<Self> {
        if dist.grid() != f.grid() {
            return Err(Error::GridMismatch("distribution and function"));
        }
        let offset = f.values().first().copied().unwrap_or(0.0);
        Ok(Self { dist, f, support: dist.support(), offset })
    }

    /// `E_{X ~ dist}[f(x_S, X_{S^c})]`.
    pub(crate) fn value(&self, x: usize, subset: FeatureSubset) -> f64 {
        let grid = self.dist.grid();
        let rest = subset.complement(grid.d());
        if rest.is_empty() {
            return self.f.at(x);
        }
        let head = grid.project(x, subset);
        self.support.iter().map(|&(y, m)| m * self.f.at(head + grid.project(y, rest))).sum()
    }

    /// `value(x, subset) - offset`, with the subtraction inside the average.
    fn shifted(&self, x: usize, subset: FeatureSubset) -> f64 {
        let grid = self.dist.grid();
        let rest = subset.complement(grid.d());
        if rest.is_empty() {
            return self.f.at(x) - self.offset;
        }
        let head = grid.project(x, subset);
        self.support.iter().map(|&(y, m)| m * (self.f.at(head + grid.project(y, rest)) - self.offset)).sum()
    }

    /// All `2^d` value functions at `x` minus `offset`, indexed by bitmask.
    pub(crate) fn table(&self, x: usize) -> Vec<f64> {
        FeatureSubset::all(self.dist.d()).map(|s| self.shifted(x, s)).collect()
    }
}

pub(crate) fn shap_from_table(table: &[f64], d: usize, i: usize, weights: &ShapleyWeights) -> f64 {
    let others = FeatureSubset::full(d).without(i);
    let mut acc = 0.0;
    // Enumerate subsets of [d] \ {i} via the submask trick.
    let mut s = others.0;
    loop {
        let subset = FeatureSubset(s);
        let diff = table[subset.with(i).0 as usize] - table[s as usize];
        acc += weights.apply(subset.len(), diff);
        if s == 0 {
            break;
        }
        s = (s - 1) & others.0;
    }
    acc
}

fn check_point(dist: &DiscreteDistribution, x: usize) -> Result<()> {
    let cells = dist.grid().num_cells();
    if x < cells {
        Ok(())
    } else {
        Err(Error::CellOutOfRange { cell: x, cells })
    }
}

/// Interventional value function `v_S(dist, f, x)`.
pub fn value_function(
    dist: &DiscreteDistribution,
    f: &TabularFunction,
    x: usize,
    subset: FeatureSubset,
) -> Result<f64> {
    check_point(dist, x)?;
    if !subset.is_subset_of(FeatureSubset::full(dist.d())) {
        return Err(Error::InvalidArgument(format!("subset {:#b} exceeds d = {}", subset.0, dist.d())));
    }
    Ok(ValueFunctions::new(dist, f)?.value(x, subset))
}

/// SHAP value of feature `i` at cell `x`.
pub fn shap_value(dist: &DiscreteDistribution, f: &TabularFunction, x: usize, i: usize) -> Result<f64> {
    check_point(dist, x)?;
    dist.grid().check_feature(i)?;
    let vf = ValueFunctions::new(dist, f)?;
    let d = dist.d();
    let weights = ShapleyWeights::new(d);
    let others = FeatureSubset::full(d).without(i);
    let mut acc = 0.0;
    let mut s = others.0;
    loop {
        let subset = FeatureSubset(s);
        let diff = vf.shifted(x, subset.with(i)) - vf.shifted(x, subset);
        acc += weights.apply(subset.len(), diff);
        if s == 0 {
            break;
        }
        s = (s - 1) & others.0;
    }
    Ok(acc)
}

/// All SHAP values at `x`, sharing one table of value functions.
pub fn shap_all(dist: &DiscreteDistribution, f: &TabularFunction, x: usize) -> Result<ShapReport> {
    shap_all_weighted(dist, f, x, &ShapleyWeights::new(dist.d()))
}

pub fn shap_all_weighted(
    dist: &DiscreteDistribution,
    f: &TabularFunction,
    x: usize,
    weights: &ShapleyWeights,
) -> Result<ShapReport> {
    check_point(dist, x)?;
    let vf = ValueFunctions::new(dist, f)?;
    let d = dist.d();
    let table = vf.table(x);
    let per_feature = (0..d).map(|i| shap_from_table(&table, d, i, weights)).collect();
    Ok(ShapReport { point: x, per_feature, base_value: vf.value(x, FeatureSubset::EMPTY) })
}

/// `phi_i(dist, f, x)` for every cell of the grid.
pub fn shap_field(dist: &DiscreteDistribution, f: &TabularFunction, i: usize) -> Result<Vec<f64>> {
    dist.grid().check_feature(i)?;
    let vf = ValueFunctions::new(dist, f)?;
    let d = dist.d();
    let weights = ShapleyWeights::new(d);
    Ok((0..dist.grid().num_cells())
        .map(|x| shap_from_table(&vf.table(x), d, i, &weights))
        .collect())
}

/// `E_{x ~ weight_dist} |phi_i(value_dist, f, x)|`.
///
/// Averaging and value-function measures are separate: `(mu, mu)` gives the
/// usual aggregate, `(mu*, mu*)` the extended-distribution aggregate.
pub fn aggregate_shap(
    weight_dist: &DiscreteDistribution,
    value_dist: &DiscreteDistribution,
    f: &TabularFunction,
    i: usize,
) -> Result<f64> {
    if weight_dist.grid() != value_dist.grid() {
        return Err(Error::GridMismatch("weighting and value distributions"));
    }
    value_dist.grid().check_feature(i)?;
    let vf = ValueFunctions::new(value_dist, f)?;
    let d = value_dist.d();
    let weights = ShapleyWeights::new(d);
    Ok(weight_dist
        .support()
        .into_iter()
        .map(|(x, w)| w * shap_from_table(&vf.table(x), d, i, &weights).abs())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Grid;

    fn uniform2() -> DiscreteDistribution {
        DiscreteDistribution::uniform(Grid::integer(&[2, 2]).unwrap())
    }

    #[test]
    fn weights_sum_to_one_per_feature() {
        for d in 1..=20 {
            let w = ShapleyWeights::new(d);
            // sum over S subset of [d]\{i} of w(|S|) = sum_k C(d-1,k) / (d C(d-1,k)) = 1
            let mut binom = 1.0f64;
            let mut total = 0.0;
            for k in 0..d {
                total += binom * w.weight(k);
                binom = binom * (d - 1 - k) as f64 / (k + 1) as f64;
            }
            assert!((total - 1.0).abs() < 1e-12, "d = {d}: {total}");
        }
    }

    #[test]
    fn product_function_on_uniform_square() {
        let dist = uniform2();
        let f = TabularFunction::from_fn(dist.grid().clone(), |x| x[0] * x[1]);
        let x = 3;
        assert_eq!(value_function(&dist, &f, x, FeatureSubset::singleton(0)).unwrap(), 0.5);
        assert_eq!(value_function(&dist, &f, x, FeatureSubset::EMPTY).unwrap(), 0.25);
        assert_eq!(value_function(&dist, &f, x, FeatureSubset::full(2)).unwrap(), 1.0);
        let report = shap_all(&dist, &f, x).unwrap();
        assert_eq!(report.per_feature, vec![0.375, 0.375]);
        assert_eq!(report.base_value, 0.25);
        assert_eq!(shap_value(&dist, &f, x, 1).unwrap(), 0.375);
    }

    #[test]
    fn constant_function_has_zero_shap() {
        let dist = uniform2();
        let f = TabularFunction::constant(dist.grid().clone(), 2.5);
        for x in 0..4 {
            let r = shap_all(&dist, &f, x).unwrap();
            assert_eq!(r.per_feature, vec![0.0, 0.0]);
            assert_eq!(r.base_value, 2.5);
            for s in FeatureSubset::all(2) {
                assert_eq!(value_function(&dist, &f, x, s).unwrap(), 2.5);
            }
        }
        assert_eq!(aggregate_shap(&dist, &dist, &f, 0).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let dist = uniform2();
        let f = TabularFunction::constant(dist.grid().clone(), 0.0);
        assert!(matches!(shap_value(&dist, &f, 0, 2), Err(Error::FeatureOutOfRange { .. })));
        assert!(matches!(shap_value(&dist, &f, 4, 0), Err(Error::CellOutOfRange { .. })));
        let other = TabularFunction::constant(Grid::integer(&[3, 2]).unwrap(), 0.0);
        assert!(matches!(shap_all(&dist, &other, 0), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn negated_weight_breaks_efficiency() {
        let dist = uniform2();
        let f = TabularFunction::from_fn(dist.grid().clone(), |x| x[0] * x[1]);
        let bad = ShapleyWeights::new(2).with_negated(0);
        let r = shap_all_weighted(&dist, &f, 3, &bad).unwrap();
        let sum: f64 = r.per_feature.iter().sum();
        assert!((sum - (1.0 - r.base_value)).abs() > 0.1);
    }
}
