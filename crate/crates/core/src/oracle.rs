//! Slow reference implementations used to cross-check the fast paths.
//! They share no code with the modules they check.

use nalgebra::{DMatrix, DVector};

use crate::model::{DiscreteDistribution, TabularFunction};

/// SHAP values by averaging marginal contributions over all `d!` feature
/// orderings, with value functions evaluated by a direct sum over the grid.
pub fn permutation_shap(dist: &DiscreteDistribution, f: &TabularFunction, x: usize) -> Vec<f64> {
    let grid = dist.grid();
    let d = grid.d();
    let xc = grid.coords(x);
    let value = |fixed: &[bool]| -> f64 {
        let mut total = 0.0;
        for y in 0..grid.num_cells() {
            let m = dist.mass()[y];
            if m == 0.0 {
                continue;
            }
            let mut yc = grid.coords(y);
            for k in 0..d {
                if fixed[k] {
                    yc[k] = xc[k];
                }
            }
            total += m * f.at(grid.cell_of(&yc).expect("in range"));
        }
        total
    };
    let mut phi = vec![0.0; d];
    let mut order: Vec<usize> = (0..d).collect();
    let mut count = 0usize;
    permute(&mut order, 0, &mut |perm| {
        count += 1;
        let mut fixed = vec![false; d];
        let mut before = value(&fixed);
        for &k in perm {
            fixed[k] = true;
            let after = value(&fixed);
            phi[k] += after - before;
            before = after;
        }
    });
    phi.into_iter().map(|v| v / count as f64).collect()
}

fn permute(items: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for j in k..items.len() {
        items.swap(k, j);
        permute(items, k + 1, visit);
        items.swap(k, j);
    }
}

/// Maximum of `c^T x` over `{A x = b, l <= x <= u}` with finite bounds, by
/// trying every basic solution: each set of linearly independent free
/// columns, with all other variables at one of their bounds. `None` when
/// infeasible.
pub fn vertex_enumeration(
    objective: &[f64],
    a: &DMatrix<f64>,
    b: &[f64],
    lower: &[f64],
    upper: &[f64],
    tol: f64,
) -> Option<f64> {
    let n = objective.len();
    let m = b.len();
    assert!(n <= 16, "vertex enumeration is exponential");
    assert!(lower.iter().chain(upper).all(|v| v.is_finite()), "bounds must be finite");
    let mut best: Option<f64> = None;
    for free_mask in 0u32..(1 << n) {
        let free: Vec<usize> = (0..n).filter(|&j| free_mask >> j & 1 == 1).collect();
        if free.len() > m {
            continue;
        }
        let fixed: Vec<usize> = (0..n).filter(|&j| free_mask >> j & 1 == 0).collect();
        let sub = DMatrix::from_fn(m, free.len(), |r, c| a[(r, free[c])]);
        if !free.is_empty() {
            let sv = sub.clone().singular_values();
            if sv.min() <= 1e-10 * sv.max().max(1.0) {
                continue;
            }
        }
        for bounds in 0u32..(1 << fixed.len()) {
            let mut x = vec![0.0; n];
            for (k, &j) in fixed.iter().enumerate() {
                x[j] = if bounds >> k & 1 == 1 { upper[j] } else { lower[j] };
            }
            let rest = DVector::from_fn(m, |r, _| b[r] - fixed.iter().map(|&j| a[(r, j)] * x[j]).sum::<f64>());
            if !free.is_empty() {
                let svd = sub.clone().svd(true, true);
                let Ok(sol) = svd.solve(&rest, 1e-12) else { continue };
                for (c, &j) in free.iter().enumerate() {
                    x[j] = sol[c];
                }
            }
            let feasible_bounds = (0..n).all(|j| x[j] >= lower[j] - tol && x[j] <= upper[j] + tol);
            let residual = (0..m)
                .map(|r| ((0..n).map(|j| a[(r, j)] * x[j]).sum::<f64>() - b[r]).abs())
                .fold(0.0, f64::max);
            if feasible_bounds && residual <= tol {
                let value: f64 = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(value, |b: f64| b.max(value)));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Grid;

    #[test]
    fn permutation_shap_on_product() {
        let dist = DiscreteDistribution::uniform(Grid::integer(&[2, 2]).unwrap());
        let f = TabularFunction::from_fn(dist.grid().clone(), |x| x[0] * x[1]);
        assert_eq!(permutation_shap(&dist, &f, 3), vec![0.375, 0.375]);
    }

    #[test]
    fn vertex_enumeration_small() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert_eq!(vertex_enumeration(&[1.0, 2.0], &a, &[1.0], &[0.0, 0.0], &[1.0, 1.0], 1e-9), Some(2.0));
        assert_eq!(vertex_enumeration(&[1.0, 2.0], &a, &[3.0], &[0.0, 0.0], &[1.0, 1.0], 1e-9), None);
        let empty = DMatrix::zeros(0, 2);
        assert_eq!(vertex_enumeration(&[1.0, -1.0], &empty, &[], &[0.0, 0.0], &[1.0, 1.0], 1e-9), Some(1.0));
    }
}
