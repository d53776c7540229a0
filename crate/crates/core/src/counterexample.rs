//! Functions whose SHAP values for one feature vanish on the support of the
//! data while the function still varies along that feature.
//!
//! Variables are the values of `f` on every grid cell, boxed to `[0, 1]`.
//! The rows of `Phi_i` (built from the data distribution) are set to zero on
//! the constrained cells, and `f(a) - f(b)` is maximized for a pair of cells
//! that differ only in feature `i`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::shap_field;
use crate::lp::{solve_lp, LpProblem, LpSolution, LpStatus};
use crate::model::{DiscreteDistribution, Grid, ProblemFile, TabularFunction};
use crate::operators::shap_operator_matrices;

/// Cells of a `d1 x d2` grid whose normalized distance from the center lies
/// in `[r_inner, r_outer]`. Each axis is scaled so its outermost cells sit
/// at distance 1; an axis of length 1 contributes nothing.
pub fn ring_support(d1: usize, d2: usize, r_inner: f64, r_outer: f64) -> Result<Vec<bool>> {
    if d1 == 0 || d2 == 0 {
        return Err(Error::InvalidGrid("ring grid needs both sides >= 1".into()));
    }
    if r_inner.is_nan() || r_outer.is_nan() || r_inner < 0.0 || r_inner >= r_outer {
        return Err(Error::InvalidArgument(format!("need 0 <= r_inner < r_outer, got {r_inner}, {r_outer}")));
    }
    let axis = |k: usize, n: usize| {
        let half = (n as f64 - 1.0) / 2.0;
        if half == 0.0 {
            0.0
        } else {
            (k as f64 - half) / half
        }
    };
    let mut mask = Vec::with_capacity(d1 * d2);
    for a in 0..d1 {
        for b in 0..d2 {
            let r = axis(a, d1).hypot(axis(b, d2));
            mask.push(r >= r_inner && r <= r_outer);
        }
    }
    if !mask.contains(&true) {
        return Err(Error::InvalidArgument(format!("ring [{r_inner}, {r_outer}] selects no cells")));
    }
    Ok(mask)
}

/// Pairs `(a, b)` of allowed cells that differ only in feature `i`, with
/// `a` lower than `b` in that feature. Neighbouring pairs come first, then
/// the rest; each group in lexicographic order.
pub fn admissible_pairs(grid: &Grid, allowed: &[bool], i: usize) -> Result<Vec<(usize, usize)>> {
    grid.check_feature(i)?;
    if allowed.len() != grid.num_cells() {
        return Err(Error::ShapeMismatch { expected: grid.num_cells(), actual: allowed.len() });
    }
    let stride = grid.stride(i);
    let mut adjacent = Vec::new();
    let mut distant = Vec::new();
    for a in (0..grid.num_cells()).filter(|&c| allowed[c]) {
        let start = grid.coord(a, i);
        for k in start + 1..grid.size(i) {
            let b = a + (k - start) * stride;
            if allowed[b] {
                if k == start + 1 {
                    adjacent.push((a, b));
                } else {
                    distant.push((a, b));
                }
            }
        }
    }
    adjacent.extend(distant);
    Ok(adjacent)
}

/// The linear program for one objective pair, plus any non-fatal notes.
#[derive(Debug, Clone)]
pub struct CounterexampleLp {
    pub problem: LpProblem,
    pub warnings: Vec<String>,
}

/// Zero the `Phi_i` rows (built from `dist`) of the cells in `constrained`
/// and maximize `f(a) - f(b)`. Variables cover the whole grid; cells outside
/// the extended support have empty columns.
pub fn build_lp(
    dist: &DiscreteDistribution,
    constrained: &[bool],
    i: usize,
    pair: (usize, usize),
) -> Result<CounterexampleLp> {
    let grid = dist.grid();
    let cells = grid.num_cells();
    if constrained.len() != cells {
        return Err(Error::ShapeMismatch { expected: cells, actual: constrained.len() });
    }
    let (a, b) = pair;
    grid.check_cell(a)?;
    grid.check_cell(b)?;
    grid.check_feature(i)?;
    let differs: Vec<usize> = (0..grid.d()).filter(|&k| grid.coord(a, k) != grid.coord(b, k)).collect();
    if differs != [i] {
        return Err(Error::InvalidArgument(format!(
            "objective pair ({a}, {b}) must differ in feature {i} only"
        )));
    }
    let ops = shap_operator_matrices(dist, i)?;
    let basis = &ops.phi.basis;
    let mut warnings = Vec::new();
    for c in [a, b] {
        if !basis.contains(&c) {
            return Err(Error::InvalidArgument(format!("objective cell {c} is outside the extended support")));
        }
        if !constrained[c] {
            warnings.push(format!("objective cell {c} is not a constrained cell"));
        }
    }
    let rows: Vec<usize> = (0..basis.len()).filter(|&k| constrained[basis[k]]).collect();
    if let Some(c) = (0..cells).find(|&c| constrained[c] && !basis.contains(&c)) {
        return Err(Error::InvalidArgument(format!("constrained cell {c} is outside the extended support")));
    }
    let mut eq = DMatrix::zeros(rows.len(), cells);
    for (r, &k) in rows.iter().enumerate() {
        for (col, &cell) in basis.iter().enumerate() {
            eq[(r, cell)] = ops.phi.matrix[(k, col)];
        }
    }
    let mut objective = vec![0.0; cells];
    objective[a] = 1.0;
    objective[b] = -1.0;
    let problem = LpProblem::unit_box(objective, eq, vec![0.0; rows.len()])?;
    Ok(CounterexampleLp { problem, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleOptions {
    /// Constrain every extended-support cell instead of only the data support.
    pub full_extended: bool,
    /// Smallest objective counted as a counterexample.
    pub threshold: f64,
    /// In-support `|phi_i|` allowed when re-checking a solution.
    pub support_tol: f64,
}

impl Default for CounterexampleOptions {
    fn default() -> Self {
        Self { full_extended: false, threshold: 1e-6, support_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub feature: usize,
    pub pair: (usize, usize),
    /// `f(a) - f(b)`.
    pub objective_value: f64,
    /// `f(a) - f(b)` with `f` rescaled to `[0, 1]` on the data support.
    pub normalized_objective: f64,
    /// `f(a) - f(b)` with `f` rescaled to `[0, 1]` on the whole grid.
    pub grid_normalized_objective: f64,
    pub max_abs_shap_on_support: f64,
    pub max_abs_shap_on_extended: f64,
    pub full_extended: bool,
    pub support_mask: Vec<bool>,
    /// Grid, data distribution and the function `f`.
    pub problem: ProblemFile,
}

impl CounterexampleReport {
    pub fn function(&self) -> Result<TabularFunction> {
        self.problem
            .function()?
            .ok_or_else(|| Error::InvalidArgument("counterexample report carries no function".into()))
    }

    pub fn distribution(&self) -> Result<DiscreteDistribution> {
        self.problem
            .distribution()?
            .ok_or_else(|| Error::InvalidArgument("counterexample report carries no distribution".into()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleSearch {
    /// First pair in search order whose optimum exceeds the threshold.
    pub report: Option<CounterexampleReport>,
    pub pairs_tried: usize,
    /// Largest optimum seen over the tried pairs.
    pub best_objective: f64,
}

/// Optimal `f(a) - f(b)` for every pair in order.
pub fn pair_objectives(
    dist: &DiscreteDistribution,
    constrained: &[bool],
    i: usize,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|&pair| {
            let lp = build_lp(dist, constrained, i, pair)?;
            let sol = solve_lp(&lp.problem)?;
            match sol.status {
                LpStatus::Optimal => Ok(sol.objective),
                status => Err(Error::InvalidArgument(format!("counterexample LP for {pair:?} ended {status:?}"))),
            }
        })
        .collect()
}

/// Search for a counterexample with `mu` uniform on `mask`.
pub fn find_counterexample(grid: &Grid, mask: &[bool], i: usize, opts: &CounterexampleOptions) -> Result<CounterexampleSearch> {
    let dist = DiscreteDistribution::uniform_on(grid.clone(), mask)?;
    find_counterexample_for(&dist, i, opts)
}

/// Search for a counterexample with a given data distribution; its support
/// is the mask.
pub fn find_counterexample_for(
    dist: &DiscreteDistribution,
    i: usize,
    opts: &CounterexampleOptions,
) -> Result<CounterexampleSearch> {
    let grid = dist.grid();
    grid.check_feature(i)?;
    let support = dist.support_mask(0.0);
    let extended = dist.extended().support_mask(0.0);
    let (constrained, allowed) = if opts.full_extended { (&extended, &extended) } else { (&support, &support) };
    let pairs = admissible_pairs(grid, allowed, i)?;
    let mut best = 0.0f64;
    for (tried, &pair) in pairs.iter().enumerate() {
        let lp = build_lp(dist, constrained, i, pair)?;
        let sol = solve_lp(&lp.problem)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::InvalidArgument(format!("counterexample LP for {pair:?} ended {:?}", sol.status)));
        }
        best = best.max(sol.objective);
        if sol.objective > opts.threshold {
            let report = verify_solution(dist, i, pair, &sol, &support, &extended, opts)?;
            return Ok(CounterexampleSearch { report: Some(report), pairs_tried: tried + 1, best_objective: best });
        }
    }
    Ok(CounterexampleSearch { report: None, pairs_tried: pairs.len(), best_objective: best })
}

fn verify_solution(
    dist: &DiscreteDistribution,
    i: usize,
    pair: (usize, usize),
    sol: &LpSolution,
    support: &[bool],
    extended: &[bool],
    opts: &CounterexampleOptions,
) -> Result<CounterexampleReport> {
    let grid = dist.grid();
    let f = TabularFunction::new(grid.clone(), sol.x.clone())?;
    let field = shap_field(dist, &f, i)?;
    let max_on = |mask: &[bool]| {
        field.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| v.abs()).fold(0.0, f64::max)
    };
    let on_support = max_on(support);
    if on_support > opts.support_tol {
        return Err(Error::ReconstructionMismatch { max_error: on_support, tol: opts.support_tol });
    }
    let range = |mask: Option<&[bool]>| {
        let (lo, hi) = (0..f.values().len())
            .filter(|&c| mask.is_none_or(|m| m[c]))
            .map(|c| f.at(c))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        hi - lo
    };
    let objective = f.at(pair.0) - f.at(pair.1);
    let scaled = |r: f64| if r > 0.0 { objective / r } else { 0.0 };
    Ok(CounterexampleReport {
        feature: i,
        pair,
        objective_value: objective,
        normalized_objective: scaled(range(Some(support))),
        grid_normalized_objective: scaled(range(None)),
        max_abs_shap_on_support: on_support,
        max_abs_shap_on_extended: max_on(extended),
        full_extended: opts.full_extended,
        support_mask: support.to_vec(),
        problem: ProblemFile::from_parts(grid, Some(dist), Some(&f)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_masks() {
        assert!(ring_support(4, 5, 0.0, f64::INFINITY).unwrap().iter().all(|&m| m));
        let m = ring_support(3, 3, 0.9, 1.1).unwrap();
        assert_eq!(m, vec![false, true, false, true, false, true, false, true, false]);
        let m = ring_support(4, 4, 0.8, 1.2).unwrap();
        let count = m.iter().filter(|&&b| b).count();
        assert_eq!(count, 8);
        assert!(ring_support(3, 3, 0.1, 0.2).is_err());
        assert!(ring_support(3, 3, 1.0, 1.0).is_err());
        assert!(ring_support(3, 3, -1.0, 1.0).is_err());
        assert_eq!(ring_support(1, 1, 0.0, 0.5).unwrap(), vec![true]);
    }

    #[test]
    fn pair_order() {
        let grid = Grid::integer(&[3, 2]).unwrap();
        let all = vec![true; 6];
        assert_eq!(admissible_pairs(&grid, &all, 0).unwrap(), vec![(0, 2), (1, 3), (2, 4), (3, 5), (0, 4), (1, 5)]);
        assert_eq!(admissible_pairs(&grid, &all, 1).unwrap(), vec![(0, 1), (2, 3), (4, 5)]);
        let some = vec![true, false, false, true, true, true];
        assert_eq!(admissible_pairs(&grid, &some, 0).unwrap(), vec![(3, 5), (0, 4)]);
    }

    #[test]
    fn lp_shape_and_zero_feasibility() {
        let grid = Grid::integer(&[3, 3]).unwrap();
        let mask = ring_support(3, 3, 0.9, 1.1).unwrap();
        let dist = DiscreteDistribution::uniform_on(grid, &mask).unwrap();
        let lp = build_lp(&dist, &mask, 0, (1, 7)).unwrap();
        assert_eq!(lp.problem.num_constraints(), 4);
        assert_eq!(lp.problem.num_vars(), 9);
        assert!(lp.warnings.is_empty());
        assert_eq!(lp.problem.residual(&[0.0; 9]), 0.0);
        assert!(build_lp(&dist, &mask, 0, (1, 5)).is_err());
        let warned = build_lp(&dist, &mask, 0, (0, 6)).unwrap();
        assert_eq!(warned.warnings.len(), 2);
    }

    #[test]
    fn four_cell_square_counterexample() {
        let grid = Grid::integer(&[3, 3]).unwrap();
        let mask = ring_support(3, 3, 0.9, 1.1).unwrap();
        let search = find_counterexample(&grid, &mask, 0, &CounterexampleOptions::default()).unwrap();
        let report = search.report.expect("counterexample");
        assert!(report.objective_value > 1e-6);
        assert!(report.max_abs_shap_on_support <= 1e-8);
        assert!(report.max_abs_shap_on_extended > 1e-6);
        let f = report.function().unwrap();
        assert!(f.values().iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
    }

    #[test]
    fn full_extended_mode_finds_nothing() {
        let grid = Grid::integer(&[3, 3]).unwrap();
        let mask = ring_support(3, 3, 0.9, 1.1).unwrap();
        let opts = CounterexampleOptions { full_extended: true, ..Default::default() };
        let search = find_counterexample(&grid, &mask, 0, &opts).unwrap();
        assert!(search.report.is_none());
        assert!(search.best_objective <= 1e-8);
        assert_eq!(search.pairs_tried, 9);
    }
}
