//! Value and SHAP operators as dense matrices on functions over the extended
//! support, together with the numerical checks built on them: spectra of
//! `A_i`, self-adjointness under the extended measure, the derived series of
//! the algebra generated by value operators, and the reconstruction of a
//! feature-free function from `A_i*` and `B_i*`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Schur};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::ShapleyWeights;
use crate::model::{DiscreteDistribution, FeatureSubset, Grid, TabularFunction};

/// A linear map on functions over `supp(mu*)`; row/column `k` is the cell
/// `basis[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub matrix: DMatrix<f64>,
    pub basis: Vec<usize>,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Values of `f` on the basis cells.
    pub fn restrict(&self, f: &TabularFunction) -> DVector<f64> {
        DVector::from_iterator(self.basis.len(), self.basis.iter().map(|&c| f.at(c)))
    }

    pub fn apply(&self, f: &TabularFunction) -> DVector<f64> {
        &self.matrix * self.restrict(f)
    }

    /// Scatter a basis vector back onto the grid, filling other cells from `fill`.
    pub fn extend(&self, v: &DVector<f64>, fill: &TabularFunction) -> TabularFunction {
        let mut values = fill.values().to_vec();
        for (k, &c) in self.basis.iter().enumerate() {
            values[c] = v[k];
        }
        TabularFunction::new(fill.grid().clone(), values).expect("same grid")
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.matrix.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Cells of `supp(mu*)` and the inverse lookup.
#[derive(Debug, Clone)]
pub struct ExtendedBasis {
    pub cells: Vec<usize>,
    position: Vec<Option<usize>>,
}

impl ExtendedBasis {
    pub fn of(dist: &DiscreteDistribution) -> Self {
        let mask = dist.extended().support_mask(0.0);
        let cells: Vec<usize> = (0..mask.len()).filter(|&c| mask[c]).collect();
        let mut position = vec![None; mask.len()];
        for (k, &c) in cells.iter().enumerate() {
            position[c] = Some(k);
        }
        Self { cells, position }
    }

    pub fn position(&self, cell: usize) -> Option<usize> {
        self.position[cell]
    }

    pub fn mask(&self) -> Vec<bool> {
        self.position.iter().map(Option::is_some).collect()
    }
}

fn value_operator_on(
    grid: &Grid,
    support: &[(usize, f64)],
    basis: &ExtendedBasis,
    subset: FeatureSubset,
) -> DMatrix<f64> {
    let m = basis.cells.len();
    let rest = subset.complement(grid.d());
    let mut mat = DMatrix::zeros(m, m);
    for (r, &x) in basis.cells.iter().enumerate() {
        let head = grid.project(x, subset);
        for &(y, mass) in support {
            // (x_S, y_{S^c}) lies in supp(mu*) whenever x does and y is in supp(mu).
            let col = basis.position(head + grid.project(y, rest)).expect("spliced cell in extended support");
            mat[(r, col)] += mass;
        }
    }
    mat
}

/// Matrix of `v_S` over `supp(dist*)`:
/// `entry[x][y] = 1(y_S = x_S) * P_dist[X_{S^c} = y_{S^c}]`.
pub fn value_operator_matrix(dist: &DiscreteDistribution, subset: FeatureSubset) -> Result<OperatorMatrix> {
    if !subset.is_subset_of(FeatureSubset::full(dist.d())) {
        return Err(Error::InvalidArgument(format!("subset {:#b} exceeds d = {}", subset.0, dist.d())));
    }
    let basis = ExtendedBasis::of(dist);
    let matrix = value_operator_on(dist.grid(), &dist.support(), &basis, subset);
    Ok(OperatorMatrix { matrix, basis: basis.cells })
}

/// All `2^d` value operators, indexed by bitmask.
pub fn value_operators(dist: &DiscreteDistribution) -> Vec<OperatorMatrix> {
    let basis = ExtendedBasis::of(dist);
    let support = dist.support();
    FeatureSubset::all(dist.d())
        .map(|s| OperatorMatrix {
            matrix: value_operator_on(dist.grid(), &support, &basis, s),
            basis: basis.cells.clone(),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ShapOperators {
    pub a: OperatorMatrix,
    pub b: OperatorMatrix,
    pub phi: OperatorMatrix,
}

/// `A_i`, `B_i` and `Phi_i = A_i - B_i` for feature `i`.
pub fn shap_operator_matrices(dist: &DiscreteDistribution, i: usize) -> Result<ShapOperators> {
    dist.grid().check_feature(i)?;
    let d = dist.d();
    let basis = ExtendedBasis::of(dist);
    let support = dist.support();
    let weights = ShapleyWeights::new(d);
    let m = basis.cells.len();
    let mut a = DMatrix::zeros(m, m);
    let mut b = DMatrix::zeros(m, m);
    for s in FeatureSubset::all(d).filter(|s| !s.contains(i)) {
        let w = weights.weight(s.len());
        a += value_operator_on(dist.grid(), &support, &basis, s.with(i)) * w;
        b += value_operator_on(dist.grid(), &support, &basis, s) * w;
    }
    let phi = &a - &b;
    let wrap = |matrix| OperatorMatrix { matrix, basis: basis.cells.clone() };
    Ok(ShapOperators { a: wrap(a), b: wrap(b), phi: wrap(phi) })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// `(re, im)` pairs.
    pub eigenvalues: Vec<(f64, f64)>,
    pub min_real: f64,
    pub max_imag_abs: f64,
    pub lower_bound: f64,
    pub violation: bool,
}

pub const SPECTRUM_TOL: f64 = 1e-8;

/// Eigenvalues of an `A_i` matrix, flagged if any is complex or below `1/d`.
pub fn spectrum_check(a: &OperatorMatrix, d: usize) -> Result<SpectrumReport> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    let n = a.dim();
    let schur = Schur::try_new(a.matrix.clone(), 1e-15, 10_000).ok_or(Error::EigenNonConvergence(n))?;
    let eigenvalues: Vec<(f64, f64)> = schur.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
    let min_real = eigenvalues.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
    let max_imag_abs = eigenvalues.iter().map(|e| e.1.abs()).fold(0.0, f64::max);
    let lower_bound = 1.0 / d as f64;
    let violation = min_real < lower_bound - SPECTRUM_TOL || max_imag_abs > SPECTRUM_TOL;
    Ok(SpectrumReport { eigenvalues, min_real, max_imag_abs, lower_bound, violation })
}

/// Largest entry of `D M_S - (D M_S)^T` with `D = diag(mu*)`; zero iff `v_S*`
/// is self-adjoint in the `mu*`-weighted inner product.
pub fn hermitian_check(dist_star: &DiscreteDistribution, subset: FeatureSubset) -> Result<f64> {
    dist_star.require_product()?;
    let op = value_operator_matrix(dist_star, subset)?;
    let weights: Vec<f64> = op.basis.iter().map(|&c| dist_star.mass()[c]).collect();
    let m = op.dim();
    let mut worst = 0.0f64;
    for r in 0..m {
        for c in (r + 1)..m {
            let gap = weights[r] * op.matrix[(r, c)] - weights[c] * op.matrix[(c, r)];
            worst = worst.max(gap.abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy)]
pub struct DerivedSeriesOptions {
    pub rank_tol: f64,
    pub dim_cap: usize,
    pub max_basis_cells: usize,
}

impl Default for DerivedSeriesOptions {
    fn default() -> Self {
        Self { rank_tol: 1e-9, dim_cap: 4096, max_basis_cells: 64 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivedSeriesReport {
    pub dims: Vec<usize>,
    pub vanish_level: Option<usize>,
}

/// Orthonormal (Frobenius) basis of a span of matrices.
struct Span {
    basis: Vec<DMatrix<f64>>,
    tol: f64,
}

impl Span {
    fn new(tol: f64) -> Self {
        Self { basis: Vec::new(), tol }
    }

    /// Add `candidate` if it is independent of the current span; `scale` is the
    /// norm the rank tolerance is relative to.
    fn try_add(&mut self, mut candidate: DMatrix<f64>, scale: f64) -> bool {
        // Two Gram-Schmidt passes keep the basis orthonormal to working precision.
        for _ in 0..2 {
            for b in &self.basis {
                let coef = b.dot(&candidate);
                candidate -= b * coef;
            }
        }
        let norm = candidate.norm();
        if norm > self.tol * scale.max(1.0) {
            self.basis.push(candidate / norm);
            true
        } else {
            false
        }
    }
}

fn bracket(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    x * y - y * x
}

/// Dimensions of the derived series of the Lie algebra generated by the
/// value operators of `dist`.
///
/// Level 0 is the Lie closure of `span{v_S}`; level `k` is the span of the
/// brackets of a basis of level `k - 1`.
pub fn derived_series(
    dist: &DiscreteDistribution,
    max_level: usize,
    opts: DerivedSeriesOptions,
) -> Result<DerivedSeriesReport> {
    let ops = value_operators(dist);
    let m = ops[0].dim();
    if m > opts.max_basis_cells {
        return Err(Error::OperatorTooLarge { size: m, limit: opts.max_basis_cells });
    }

    let mut level0 = Span::new(opts.rank_tol);
    let scale = ops.iter().map(|o| o.matrix.norm()).fold(0.0, f64::max);
    for op in &ops {
        level0.try_add(op.matrix.clone(), scale);
    }
    // Close under brackets: every new element is bracketed with everything.
    let mut done = 0;
    while done < level0.basis.len() {
        let end = level0.basis.len();
        for p in done..end {
            for q in 0..p {
                let c = bracket(&level0.basis[p], &level0.basis[q]);
                let n = c.norm();
                level0.try_add(c, n);
                if level0.basis.len() > opts.dim_cap {
                    return Err(Error::DimensionBlowUp { level: 0, dim: level0.basis.len(), cap: opts.dim_cap });
                }
            }
        }
        done = end;
    }

    let mut dims = vec![level0.basis.len()];
    let mut current = level0.basis;
    let mut vanish_level = if current.is_empty() { Some(0) } else { None };
    for level in 1..=max_level {
        if vanish_level.is_some() {
            break;
        }
        let mut next = Span::new(opts.rank_tol);
        for p in 0..current.len() {
            for q in 0..p {
                let c = bracket(&current[p], &current[q]);
                let n = c.norm();
                next.try_add(c, n);
                if next.basis.len() > opts.dim_cap {
                    return Err(Error::DimensionBlowUp { level, dim: next.basis.len(), cap: opts.dim_cap });
                }
            }
        }
        dims.push(next.basis.len());
        if next.basis.is_empty() {
            vanish_level = Some(level);
        }
        current = next.basis;
    }
    Ok(DerivedSeriesReport { dims, vanish_level })
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Feature-`i`-free function; equal to `f` outside `supp(mu*)`.
    pub g: TabularFunction,
    /// `int (f - g)^2 dmu*`.
    pub distance_sq: f64,
    /// `E_{mu*} |Phi_i* f|`.
    pub aggregate_shap: f64,
    pub condition_number: f64,
    /// `max |A_i* g - B_i* f|` over the whole extended support.
    pub residual: f64,
}

pub const MAX_CONDITION: f64 = 1e12;

/// Solve `A_i* g = B_i* f` for `g` constant along feature `i`.
///
/// `g` is parameterized by its values on the cells with feature `i`
/// collapsed; since `A_i*` maps that subspace into itself, one representative
/// row per collapsed cell gives a square system.
pub fn reconstruct_determined(dist_star: &DiscreteDistribution, f: &TabularFunction, i: usize) -> Result<Reconstruction> {
    dist_star.require_product()?;
    if f.grid() != dist_star.grid() {
        return Err(Error::GridMismatch("distribution and function"));
    }
    let ops = shap_operator_matrices(dist_star, i)?;
    let grid = dist_star.grid();
    let rest = FeatureSubset::full(grid.d()).without(i);

    let mut column_of: HashMap<usize, usize> = HashMap::new();
    let mut representatives = Vec::new();
    let mut membership = Vec::with_capacity(ops.a.dim());
    for (k, &cell) in ops.a.basis.iter().enumerate() {
        let key = grid.project(cell, rest);
        let next = column_of.len();
        let col = *column_of.entry(key).or_insert_with(|| {
            representatives.push(k);
            next
        });
        membership.push(col);
    }
    let (m, w) = (ops.a.dim(), representatives.len());
    let embed = DMatrix::from_fn(m, w, |r, c| if membership[r] == c { 1.0 } else { 0.0 });

    let a_embed = &ops.a.matrix * &embed;
    let system = DMatrix::from_fn(w, w, |r, c| a_embed[(representatives[r], c)]);
    let fv = ops.a.restrict(f);
    let bf = &ops.b.matrix * &fv;
    let rhs = DVector::from_fn(w, |r, _| bf[representatives[r]]);

    let sv = system.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition_number > MAX_CONDITION {
        return Err(Error::Singular(format!("restricted A_i* has condition number {condition_number:e}")));
    }
    let coeffs = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("restricted A_i* is not invertible".into()))?;
    let gv = &embed * coeffs;

    let residual = (&ops.a.matrix * &gv - &bf).amax();
    let masses: Vec<f64> = ops.a.basis.iter().map(|&c| dist_star.mass()[c]).collect();
    let distance_sq = (0..m).map(|k| masses[k] * (fv[k] - gv[k]).powi(2)).sum();
    let phi = &ops.phi.matrix * &fv;
    let aggregate_shap = (0..m).map(|k| masses[k] * phi[k].abs()).sum();
    Ok(Reconstruction { g: ops.a.extend(&gv, f), distance_sq, aggregate_shap, condition_number, residual })
}

/// `(<Phi_i* f, Phi_i* f>, E_{mu*}|Phi_i* f|)` for `f` with values in `[0, 1]`.
pub fn l1_l2_bound_check(dist_star: &DiscreteDistribution, f: &TabularFunction, i: usize) -> Result<(f64, f64)> {
    dist_star.require_product()?;
    if f.grid() != dist_star.grid() {
        return Err(Error::GridMismatch("distribution and function"));
    }
    let ops = shap_operator_matrices(dist_star, i)?;
    for &c in &ops.phi.basis {
        let v = f.at(c);
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::RangeViolation { cell: c, value: v });
        }
    }
    let phi = ops.phi.apply(f);
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for (k, &c) in ops.phi.basis.iter().enumerate() {
        let m = dist_star.mass()[c];
        lhs += m * phi[k] * phi[k];
        rhs += m * phi[k].abs();
    }
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact;
    use crate::model::{determinedness, Grid};

    fn uniform2() -> DiscreteDistribution {
        DiscreteDistribution::uniform(Grid::integer(&[2, 2]).unwrap())
    }

    #[test]
    fn full_subset_is_identity_and_empty_is_expectation() {
        let dist = DiscreteDistribution::new(Grid::integer(&[2, 2]).unwrap(), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let id = value_operator_matrix(&dist, FeatureSubset::full(2)).unwrap();
        assert_eq!(id.matrix, DMatrix::identity(4, 4));
        let e = value_operator_matrix(&dist, FeatureSubset::EMPTY).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(e.matrix[(r, c)], dist.mass()[c]);
            }
        }
    }

    #[test]
    fn slice_averaging_on_uniform_square() {
        // v_{feature 0}: average over feature 1 within each feature-0 slice.
        let op = value_operator_matrix(&uniform2(), FeatureSubset::singleton(0)).unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5],
        );
        assert_eq!(op.matrix, expected);
    }

    #[test]
    fn basis_excludes_cells_outside_extended_support() {
        // Feature 0 never takes its middle value.
        let dist = DiscreteDistribution::new(
            Grid::integer(&[3, 2]).unwrap(),
            vec![0.25, 0.25, 0.0, 0.0, 0.5, 0.0],
        )
        .unwrap();
        let op = value_operator_matrix(&dist, FeatureSubset::singleton(1)).unwrap();
        assert_eq!(op.basis, vec![0, 1, 4, 5]);
        assert!(op.max_row_sum_error() < 1e-15);
    }

    #[test]
    fn single_feature_operators() {
        let dist = DiscreteDistribution::new(Grid::integer(&[3]).unwrap(), vec![0.2, 0.3, 0.5]).unwrap();
        let ops = shap_operator_matrices(&dist, 0).unwrap();
        assert_eq!(ops.a.matrix, DMatrix::identity(3, 3));
        for r in 0..3 {
            assert_eq!(ops.b.matrix.row(r).iter().copied().collect::<Vec<_>>(), vec![0.2, 0.3, 0.5]);
        }
        let f = TabularFunction::new(dist.grid().clone(), vec![1.0, 4.0, -2.0]).unwrap();
        let mean = dist.expectation(&f).unwrap();
        let phi = ops.phi.apply(&f);
        for k in 0..3 {
            assert!((phi[k] - (f.at(k) - mean)).abs() < 1e-15);
        }
        let s = spectrum_check(&ops.a, 1).unwrap();
        assert!(!s.violation);
        assert!(s.eigenvalues.iter().all(|e| (e.0 - 1.0).abs() < 1e-12));
    }

    #[test]
    fn operator_matches_pointwise_shap() {
        let dist = DiscreteDistribution::new(Grid::integer(&[2, 3]).unwrap(), vec![0.1, 0.0, 0.2, 0.3, 0.25, 0.15])
            .unwrap();
        let f = TabularFunction::new(dist.grid().clone(), vec![0.3, -1.0, 2.0, 0.7, 0.1, 1.5]).unwrap();
        for i in 0..2 {
            let ops = shap_operator_matrices(&dist, i).unwrap();
            let phi = ops.phi.apply(&f);
            for (k, &c) in ops.phi.basis.iter().enumerate() {
                let exact = exact::shap_value(&dist, &f, c, i).unwrap();
                assert!((phi[k] - exact).abs() < 1e-12);
            }
            assert!(ops.a.max_row_sum_error() < 1e-14);
            assert!(ops.b.max_row_sum_error() < 1e-14);
        }
    }

    #[test]
    fn hermitian_requires_product() {
        let dist = DiscreteDistribution::new(Grid::integer(&[2, 2]).unwrap(), vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(matches!(hermitian_check(&dist, FeatureSubset::EMPTY), Err(Error::NotProduct { .. })));
        let star = dist.extended();
        assert_eq!(hermitian_check(&star, FeatureSubset::full(2)).unwrap(), 0.0);
        assert!(hermitian_check(&star, FeatureSubset::EMPTY).unwrap() <= 1e-15);
    }

    #[test]
    fn derived_series_of_one_feature_vanishes_at_level_one() {
        let dist = DiscreteDistribution::new(Grid::integer(&[3]).unwrap(), vec![0.2, 0.3, 0.5]).unwrap();
        let r = derived_series(&dist, 2, DerivedSeriesOptions::default()).unwrap();
        assert_eq!(r.dims, vec![2, 0]);
        assert_eq!(r.vanish_level, Some(1));
    }

    #[test]
    fn derived_series_uniform_square() {
        let r = derived_series(&uniform2(), 3, DerivedSeriesOptions::default()).unwrap();
        assert!(r.vanish_level.is_some_and(|l| l <= 3), "{r:?}");
        assert!(r.dims.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn derived_series_rejects_large_operators() {
        let dist = DiscreteDistribution::uniform(Grid::integer(&[9, 8]).unwrap());
        assert!(matches!(
            derived_series(&dist, 3, DerivedSeriesOptions::default()),
            Err(Error::OperatorTooLarge { size: 72, limit: 64 })
        ));
    }

    #[test]
    fn reconstruction_fixes_determined_and_constant_functions() {
        let star = DiscreteDistribution::product(
            Grid::integer(&[3, 2]).unwrap(),
            &[vec![0.2, 0.5, 0.3], vec![0.4, 0.6]],
        )
        .unwrap();
        let f = TabularFunction::from_fn(star.grid().clone(), |x| 0.2 + 0.5 * x[1]);
        let rec = reconstruct_determined(&star, &f, 0).unwrap();
        for (a, b) in rec.g.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let c = TabularFunction::constant(star.grid().clone(), 0.7);
        let rec = reconstruct_determined(&star, &c, 1).unwrap();
        assert!(rec.g.values().iter().all(|v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn reconstruction_of_indicator() {
        let star = DiscreteDistribution::uniform(Grid::integer(&[2, 2]).unwrap());
        let mut values = vec![0.0; 4];
        values[3] = 1.0;
        let f = TabularFunction::new(star.grid().clone(), values).unwrap();
        let rec = reconstruct_determined(&star, &f, 0).unwrap();
        let mask = vec![true; 4];
        assert!(determinedness(&rec.g, FeatureSubset::singleton(1), &mask, 1e-12).unwrap().determined);
        assert!(rec.residual < 1e-12);
        assert!(rec.distance_sq <= 4.0 * rec.aggregate_shap + 1e-12);
        let (lhs, rhs) = l1_l2_bound_check(&star, &f, 0).unwrap();
        assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn l1_l2_range_and_trivial_cases() {
        let star = DiscreteDistribution::uniform(Grid::integer(&[2, 2]).unwrap());
        let one = TabularFunction::constant(star.grid().clone(), 1.0);
        assert_eq!(l1_l2_bound_check(&star, &one, 1).unwrap(), (0.0, 0.0));
        let big = TabularFunction::constant(star.grid().clone(), 1.5);
        assert!(matches!(l1_l2_bound_check(&star, &big, 0), Err(Error::RangeViolation { .. })));
    }
}
