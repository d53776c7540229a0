//! Finite grids, discrete distributions over their cells, and tabular
//! functions.
//!
//! Every object lives on a [`Grid`]: a Cartesian product of finite, strictly
//! increasing value lists, one per feature. Cells are addressed by a flat
//! row-major index (first feature slowest, last feature fastest), so two
//! cells are the same cell iff their indices agree. Raw feature values are
//! only compared when a dataset row is located on a grid.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported feature count; subsets are stored as `u32` bitmasks and
/// exact SHAP enumerates all `2^d` of them.
pub const MAX_FEATURES: usize = 20;

/// Tolerance on the total mass of a distribution.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    features: Vec<Vec<f64>>,
    strides: Vec<usize>,
    cells: usize,
}

impl Grid {
    pub fn new(features: Vec<Vec<f64>>) -> Result<Self> {
        let d = features.len();
        if d == 0 {
            return Err(Error::InvalidGrid("at least one feature is required".into()));
        }
        if d > MAX_FEATURES {
            return Err(Error::TooManyFeatures { d, max: MAX_FEATURES });
        }
        for (j, vals) in features.iter().enumerate() {
            if vals.is_empty() {
                return Err(Error::InvalidGrid(format!("feature {j} has no values")));
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidGrid(format!("feature {j} has a non-finite value")));
            }
            if vals.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGrid(format!(
                    "values of feature {j} must be strictly increasing"
                )));
            }
        }
        let mut strides = vec![1usize; d];
        for j in (0..d.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1]
                .checked_mul(features[j + 1].len())
                .ok_or_else(|| Error::InvalidGrid("grid has too many cells".into()))?;
        }
        let cells = strides[0]
            .checked_mul(features[0].len())
            .ok_or_else(|| Error::InvalidGrid("grid has too many cells".into()))?;
        Ok(Self { features, strides, cells })
    }

    /// Grid whose feature `j` takes the values `0, 1, .., sizes[j] - 1`.
    pub fn integer(sizes: &[usize]) -> Result<Self> {
        Self::new(sizes.iter().map(|&n| (0..n).map(|v| v as f64).collect()).collect())
    }

    pub fn d(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn size(&self, feature: usize) -> usize {
        self.features[feature].len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.features.iter().map(Vec::len).collect()
    }

    pub fn stride(&self, feature: usize) -> usize {
        self.strides[feature]
    }

    pub fn num_cells(&self) -> usize {
        self.cells
    }

    /// Index of `cell` along `feature`.
    #[inline]
    pub fn coord(&self, cell: usize, feature: usize) -> usize {
        (cell / self.strides[feature]) % self.features[feature].len()
    }

    pub fn coords(&self, cell: usize) -> Vec<usize> {
        (0..self.d()).map(|j| self.coord(cell, j)).collect()
    }

    pub fn cell_of(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.d() {
            return Err(Error::ShapeMismatch { expected: self.d(), actual: coords.len() });
        }
        let mut cell = 0;
        for (j, &k) in coords.iter().enumerate() {
            if k >= self.size(j) {
                return Err(Error::InvalidArgument(format!(
                    "coordinate {k} out of range for feature {j} of size {}",
                    self.size(j)
                )));
            }
            cell += k * self.strides[j];
        }
        Ok(cell)
    }

    pub fn value(&self, cell: usize, feature: usize) -> f64 {
        self.features[feature][self.coord(cell, feature)]
    }

    pub fn point(&self, cell: usize) -> Vec<f64> {
        (0..self.d()).map(|j| self.value(cell, j)).collect()
    }

    /// Part of the flat index contributed by the features in `subset`.
    #[inline]
    pub fn project(&self, cell: usize, subset: FeatureSubset) -> usize {
        subset.iter().map(|j| self.coord(cell, j) * self.strides[j]).sum()
    }

    /// Cell taking the `subset` coordinates of `x` and the others from `y`.
    #[inline]
    pub fn splice(&self, x: usize, y: usize, subset: FeatureSubset) -> usize {
        let full = FeatureSubset::full(self.d());
        self.project(x, subset) + self.project(y, full.difference(subset))
    }

    /// Locate a data row on the grid by exact value match.
    pub fn locate(&self, row: &[f64]) -> std::result::Result<usize, (usize, f64)> {
        let mut cell = 0;
        for (j, &v) in row.iter().enumerate() {
            let k = self.features[j]
                .binary_search_by(|probe| probe.total_cmp(&v))
                .map_err(|_| (j, v))?;
            cell += k * self.strides[j];
        }
        Ok(cell)
    }

    pub(crate) fn check_cell(&self, cell: usize) -> Result<()> {
        if cell < self.cells {
            Ok(())
        } else {
            Err(Error::CellOutOfRange { cell, cells: self.cells })
        }
    }

    pub(crate) fn check_feature(&self, index: usize) -> Result<()> {
        if index < self.d() {
            Ok(())
        } else {
            Err(Error::FeatureOutOfRange { index, d: self.d() })
        }
    }
}

/// A subset of `[d]` stored as a bitmask; bit `j` is feature `j` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureSubset(pub u32);

impl FeatureSubset {
    pub const EMPTY: FeatureSubset = FeatureSubset(0);

    pub fn full(d: usize) -> Self {
        debug_assert!(d <= MAX_FEATURES);
        FeatureSubset(((1u64 << d) - 1) as u32)
    }

    pub fn singleton(i: usize) -> Self {
        FeatureSubset(1 << i)
    }

    pub fn from_features(features: &[usize]) -> Self {
        FeatureSubset(features.iter().fold(0, |acc, &j| acc | (1 << j)))
    }

    /// All `2^d` subsets in increasing bitmask order.
    pub fn all(d: usize) -> impl Iterator<Item = FeatureSubset> {
        (0..1u32 << d).map(FeatureSubset)
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn with(self, i: usize) -> Self {
        FeatureSubset(self.0 | 1 << i)
    }

    pub fn without(self, i: usize) -> Self {
        FeatureSubset(self.0 & !(1 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn complement(self, d: usize) -> Self {
        FeatureSubset(!self.0 & Self::full(d).0)
    }

    pub fn intersect(self, other: Self) -> Self {
        FeatureSubset(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        FeatureSubset(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |j| bits >> j & 1 == 1)
    }

    /// The indicator vector `1_S` in `R^d`.
    pub fn indicator(self, d: usize) -> Vec<f64> {
        (0..d).map(|j| if self.contains(j) { 1.0 } else { 0.0 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    grid: Grid,
    mass: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(grid: Grid, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != grid.num_cells() {
            return Err(Error::ShapeMismatch { expected: grid.num_cells(), actual: mass.len() });
        }
        if let Some((cell, m)) = mass.iter().enumerate().find(|(_, m)| !m.is_finite() || **m < 0.0) {
            return Err(Error::InvalidDistribution(format!("mass {m} at cell {cell}")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { grid, mass })
    }

    /// Rescale nonnegative weights to a distribution.
    pub fn from_weights(grid: Grid, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDistribution("weights must have a positive finite sum".into()));
        }
        let mass = weights.into_iter().map(|w| w / total).collect();
        Self::new(grid, mass)
    }

    pub fn uniform(grid: Grid) -> Self {
        let n = grid.num_cells();
        Self { mass: vec![1.0 / n as f64; n], grid }
    }

    /// Uniform over the cells where `mask` is true.
    pub fn uniform_on(grid: Grid, mask: &[bool]) -> Result<Self> {
        if mask.len() != grid.num_cells() {
            return Err(Error::ShapeMismatch { expected: grid.num_cells(), actual: mask.len() });
        }
        let count = mask.iter().filter(|&&b| b).count();
        if count == 0 {
            return Err(Error::InvalidDistribution("mask selects no cells".into()));
        }
        let w = 1.0 / count as f64;
        let mass = mask.iter().map(|&b| if b { w } else { 0.0 }).collect();
        Ok(Self { grid, mass })
    }

    pub fn point_mass(grid: Grid, cell: usize) -> Result<Self> {
        grid.check_cell(cell)?;
        let mut mass = vec![0.0; grid.num_cells()];
        mass[cell] = 1.0;
        Ok(Self { grid, mass })
    }

    /// Product distribution from per-feature mass vectors.
    pub fn product(grid: Grid, marginals: &[Vec<f64>]) -> Result<Self> {
        if marginals.len() != grid.d() {
            return Err(Error::ShapeMismatch { expected: grid.d(), actual: marginals.len() });
        }
        for (j, m) in marginals.iter().enumerate() {
            if m.len() != grid.size(j) {
                return Err(Error::ShapeMismatch { expected: grid.size(j), actual: m.len() });
            }
        }
        let mass = (0..grid.num_cells())
            .map(|cell| (0..grid.d()).map(|j| marginals[j][grid.coord(cell, j)]).product())
            .collect();
        Self::new(grid, mass)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn d(&self) -> usize {
        self.grid.d()
    }

    /// Mass vector of feature `i` over its grid values.
    pub fn marginal(&self, i: usize) -> Result<Vec<f64>> {
        self.grid.check_feature(i)?;
        let mut out = vec![0.0; self.grid.size(i)];
        for (cell, &m) in self.mass.iter().enumerate() {
            out[self.grid.coord(cell, i)] += m;
        }
        Ok(out)
    }

    pub fn marginals(&self) -> Vec<Vec<f64>> {
        (0..self.d()).map(|i| self.marginal(i).expect("feature in range")).collect()
    }

    /// The product of the marginals.
    pub fn extended(&self) -> DiscreteDistribution {
        let marginals = self.marginals();
        let mass = (0..self.grid.num_cells())
            .map(|cell| (0..self.d()).map(|j| marginals[j][self.grid.coord(cell, j)]).product())
            .collect();
        DiscreteDistribution { grid: self.grid.clone(), mass }
    }

    /// Largest cellwise gap between this distribution and its extension.
    pub fn product_deviation(&self) -> f64 {
        self.extended()
            .mass
            .iter()
            .zip(&self.mass)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn require_product(&self) -> Result<()> {
        let deviation = self.product_deviation();
        if deviation > MASS_TOL {
            Err(Error::NotProduct { deviation })
        } else {
            Ok(())
        }
    }

    pub fn support_mask(&self, tol: f64) -> Vec<bool> {
        self.mass.iter().map(|&m| m > tol).collect()
    }

    /// Cells with positive mass, paired with their mass.
    pub fn support(&self) -> Vec<(usize, f64)> {
        self.mass.iter().copied().enumerate().filter(|&(_, m)| m > 0.0).collect()
    }

    pub fn expectation(&self, f: &TabularFunction) -> Result<f64> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch("function and distribution"));
        }
        Ok(self.mass.iter().zip(f.values()).map(|(m, v)| m * v).sum())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl TabularFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::ShapeMismatch { expected: grid.num_cells(), actual: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        let values = vec![c; grid.num_cells()];
        Self { grid, values }
    }

    /// Tabulate `f` at every cell from the cell's feature values.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.num_cells()).map(|c| f(&grid.point(c))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    pub fn map(&self, op: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| op(v)).collect() }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &TabularFunction, b: f64) -> Result<Self> {
        if other.grid != self.grid {
            return Err(Error::GridMismatch("combined functions"));
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }
}

/// `n` data points in `R^d`, one row each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<Vec<f64>>,
    d: usize,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let d = first.len();
        if d == 0 {
            return Err(Error::InvalidDataset("rows have no columns".into()));
        }
        if d > MAX_FEATURES {
            return Err(Error::TooManyFeatures { d, max: MAX_FEATURES });
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidDataset(format!(
                    "row {r} has {} columns, expected {d}",
                    row.len()
                )));
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!("non-finite value at row {r}, column {c}")));
            }
        }
        Ok(Self { rows, d })
    }

    /// One row per cell, feature values of that cell.
    pub fn from_cells(grid: &Grid, cells: &[usize]) -> Result<Self> {
        Self::new(cells.iter().map(|&c| grid.point(c)).collect())
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Cell index of every row on `grid`.
    pub fn cells_on(&self, grid: &Grid) -> Result<Vec<usize>> {
        if grid.d() != self.d {
            return Err(Error::ShapeMismatch { expected: grid.d(), actual: self.d });
        }
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| grid.locate(row).map_err(|(column, value)| Error::OffGrid { row: r, column, value }))
            .collect()
    }
}

/// Grid of distinct column values and the empirical distribution of the rows.
pub fn empirical_distribution(data: &Dataset) -> Result<(Grid, DiscreteDistribution)> {
    let features = (0..data.d())
        .map(|j| {
            let mut col = data.column(j);
            col.sort_by(f64::total_cmp);
            col.dedup();
            col
        })
        .collect();
    let grid = Grid::new(features)?;
    let dist = empirical_on_grid(&grid, data)?;
    Ok((grid, dist))
}

/// Empirical distribution of the rows on a given grid.
pub fn empirical_on_grid(grid: &Grid, data: &Dataset) -> Result<DiscreteDistribution> {
    let cells = data.cells_on(grid)?;
    let mut counts = vec![0usize; grid.num_cells()];
    for c in cells {
        counts[c] += 1;
    }
    let n = data.n() as f64;
    let mass: Vec<f64> = counts.into_iter().map(|k| k as f64 / n).collect();
    // k/n is exact per cell, but their float sum may drift from 1 by a few ulps.
    DiscreteDistribution::new(grid.clone(), mass)
}

/// Outcome of a determinedness check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Determinedness {
    pub determined: bool,
    /// Largest spread of `f` among masked cells sharing their `S` coordinates.
    pub max_gap: f64,
    /// The mask was empty, so the answer is vacuously true.
    pub empty_mask: bool,
}

/// Whether `f` restricted to `mask` depends only on the coordinates in `subset`.
pub fn determinedness(
    f: &TabularFunction,
    subset: FeatureSubset,
    mask: &[bool],
    tol: f64,
) -> Result<Determinedness> {
    let grid = f.grid();
    if mask.len() != grid.num_cells() {
        return Err(Error::ShapeMismatch { expected: grid.num_cells(), actual: mask.len() });
    }
    if !subset.is_subset_of(FeatureSubset::full(grid.d())) {
        return Err(Error::InvalidArgument(format!("subset {:#b} exceeds d = {}", subset.0, grid.d())));
    }
    let mut ranges: HashMap<usize, (f64, f64)> = HashMap::new();
    let mut any = false;
    for cell in (0..grid.num_cells()).filter(|&c| mask[c]) {
        any = true;
        let v = f.at(cell);
        ranges
            .entry(grid.project(cell, subset))
            .and_modify(|(lo, hi)| {
                *lo = lo.min(v);
                *hi = hi.max(v);
            })
            .or_insert((v, v));
    }
    let max_gap = ranges.values().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
    Ok(Determinedness { determined: max_gap <= tol, max_gap, empty_mask: !any })
}

pub fn is_determined(f: &TabularFunction, subset: FeatureSubset, mask: &[bool], tol: f64) -> Result<bool> {
    determinedness(f, subset, mask, tol).map(|r| r.determined)
}

/// JSON layout shared by grids, distributions and functions:
/// `{"features": [[..], ..], "mass": [..], "values": [..]}`, flat arrays in
/// row-major order with the last feature fastest.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProblemFile {
    pub features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl ProblemFile {
    pub fn from_parts(grid: &Grid, dist: Option<&DiscreteDistribution>, f: Option<&TabularFunction>) -> Self {
        Self {
            features: grid.features().to_vec(),
            mass: dist.map(|d| d.mass().to_vec()),
            values: f.map(|f| f.values().to_vec()),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.features.clone())
    }

    pub fn distribution(&self) -> Result<Option<DiscreteDistribution>> {
        self.mass.clone().map(|m| DiscreteDistribution::new(self.grid()?, m)).transpose()
    }

    pub fn function(&self) -> Result<Option<TabularFunction>> {
        self.values.clone().map(|v| TabularFunction::new(self.grid()?, v)).transpose()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> Grid {
        Grid::integer(&[2, 2]).unwrap()
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid::new(vec![]).is_err());
        assert!(Grid::new(vec![vec![]]).is_err());
        assert!(Grid::new(vec![vec![1.0, 1.0]]).is_err());
        assert!(Grid::new(vec![vec![2.0, 1.0]]).is_err());
        assert!(matches!(
            Grid::new(vec![vec![0.0]; 21]),
            Err(Error::TooManyFeatures { d: 21, .. })
        ));
        assert!(Grid::new(vec![vec![0.0]; 20]).is_ok());
    }

    #[test]
    fn row_major_last_feature_fastest() {
        let g = Grid::integer(&[2, 3]).unwrap();
        assert_eq!(g.num_cells(), 6);
        assert_eq!(g.coords(1), vec![0, 1]);
        assert_eq!(g.coords(3), vec![1, 0]);
        assert_eq!(g.cell_of(&[1, 2]).unwrap(), 5);
        assert_eq!(g.splice(5, 0, FeatureSubset::singleton(0)), 3);
    }

    #[test]
    fn empirical_counts() {
        let data = Dataset::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let (grid, dist) = empirical_distribution(&data).unwrap();
        assert_eq!(grid.features(), &[vec![0.0, 1.0], vec![0.0, 1.0]]);
        assert_eq!(dist.mass(), &[0.5, 0.0, 0.0, 0.5]);

        let data = Dataset::new(vec![vec![5.0]]).unwrap();
        let (grid, dist) = empirical_distribution(&data).unwrap();
        assert_eq!(grid.features(), &[vec![5.0]]);
        assert_eq!(dist.mass(), &[1.0]);

        let data =
            Dataset::new(vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let (_, dist) = empirical_distribution(&data).unwrap();
        assert_eq!(dist.mass(), &[0.5, 0.25, 0.0, 0.25]);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(matches!(Dataset::new(vec![]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn marginal_and_extension_of_diagonal() {
        let dist = DiscreteDistribution::new(grid2(), vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert_eq!(dist.marginal(0).unwrap(), vec![0.5, 0.5]);
        assert_eq!(dist.marginal(1).unwrap(), vec![0.5, 0.5]);
        assert!(dist.marginal(2).is_err());
        let ext = dist.extended();
        assert_eq!(ext.mass(), &[0.25; 4]);
        assert_eq!(dist.support_mask(0.0), vec![true, false, false, true]);
        assert_eq!(ext.support_mask(0.0), vec![true; 4]);
        assert!(dist.require_product().is_err());
        assert!(ext.require_product().is_ok());
    }

    #[test]
    fn product_distribution_is_fixed_by_extension() {
        let g = Grid::integer(&[3, 2]).unwrap();
        let m = vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.4]];
        let dist = DiscreteDistribution::product(g, &m).unwrap();
        assert_eq!(dist.marginal(0).unwrap().len(), 3);
        for (a, b) in dist.marginal(0).unwrap().iter().zip(&m[0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let ext = dist.extended();
        for (a, b) in ext.mass().iter().zip(dist.mass()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(DiscreteDistribution::uniform(grid2()).support_mask(0.0), vec![true; 4]);
    }

    #[test]
    fn distribution_validation() {
        assert!(DiscreteDistribution::new(grid2(), vec![0.5, 0.5, 0.5, -0.5]).is_err());
        assert!(DiscreteDistribution::new(grid2(), vec![0.5, 0.5, 0.5, 0.5]).is_err());
        assert!(DiscreteDistribution::new(grid2(), vec![1.0]).is_err());
    }

    #[test]
    fn determinedness_examples() {
        let g = grid2();
        let full = vec![true; 4];
        let x2 = TabularFunction::from_fn(g.clone(), |x| x[1]);
        assert!(is_determined(&x2, FeatureSubset::singleton(1), &full, 0.0).unwrap());
        assert!(!is_determined(&x2, FeatureSubset::singleton(0), &full, 0.0).unwrap());
        let prod = TabularFunction::from_fn(g.clone(), |x| x[0] * x[1]);
        assert!(!is_determined(&prod, FeatureSubset::singleton(1), &full, 0.0).unwrap());
        assert!(is_determined(&prod, FeatureSubset::full(2), &full, 0.0).unwrap());
        // Empty subset means constant on the mask.
        assert!(!is_determined(&prod, FeatureSubset::EMPTY, &full, 0.0).unwrap());
        assert!(is_determined(&prod, FeatureSubset::EMPTY, &[true, true, true, false], 0.0).unwrap());
        let r = determinedness(&prod, FeatureSubset::EMPTY, &[false; 4], 0.0).unwrap();
        assert!(r.determined && r.empty_mask);
    }

    #[test]
    fn locate_rows() {
        let g = Grid::new(vec![vec![-1.0, 0.5], vec![2.0, 3.0, 4.0]]).unwrap();
        assert_eq!(g.locate(&[0.5, 3.0]), Ok(4));
        assert_eq!(g.locate(&[0.5, 3.5]), Err((1, 3.5)));
        let data = Dataset::new(vec![vec![0.5, 7.0]]).unwrap();
        assert!(matches!(data.cells_on(&g), Err(Error::OffGrid { row: 0, column: 1, .. })));
    }

    #[test]
    fn problem_file_json() {
        let text = r#"{"features": [[0, 1], [0, 1]], "mass": [0.5, 0, 0, 0.5], "values": [1, 2, 3, 4]}"#;
        let p = ProblemFile::from_json(text).unwrap();
        let dist = p.distribution().unwrap().unwrap();
        let f = p.function().unwrap().unwrap();
        assert_eq!(dist.mass()[3], 0.5);
        assert_eq!(f.at(2), 3.0);
        let back = ProblemFile::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
