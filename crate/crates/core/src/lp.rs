//! Dense bounded-variable primal simplex.
//!
//! Maximizes `c^T x` subject to `A x = b` and `l <= x <= u`, with finite lower
//! bounds and finite or infinite upper bounds. Two phases with artificial
//! variables; Bland's rule for both entering and leaving choices.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    /// Maximized.
    pub objective: Vec<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// All variables boxed to `[0, 1]`.
    pub fn unit_box(objective: Vec<f64>, eq_matrix: DMatrix<f64>, rhs: Vec<f64>) -> Result<Self> {
        let n = objective.len();
        let p = Self { objective, eq_matrix, rhs, lower: vec![0.0; n], upper: vec![1.0; n] };
        p.validate()?;
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rhs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if self.eq_matrix.ncols() != n && self.eq_matrix.nrows() > 0 {
            return Err(Error::ShapeMismatch { expected: n, actual: self.eq_matrix.ncols() });
        }
        if self.eq_matrix.nrows() != self.rhs.len() {
            return Err(Error::ShapeMismatch { expected: self.eq_matrix.nrows(), actual: self.rhs.len() });
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::ShapeMismatch { expected: n, actual: self.lower.len().min(self.upper.len()) });
        }
        if self.rhs.iter().chain(&self.objective).chain(self.eq_matrix.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("objective, constraints and rhs must be finite".into()));
        }
        for j in 0..n {
            if !self.lower[j].is_finite() || self.upper[j].is_nan() || self.upper[j] < self.lower[j] {
                return Err(Error::InvalidArgument(format!(
                    "bad bounds on variable {j}: [{}, {}]",
                    self.lower[j], self.upper[j]
                )));
            }
        }
        Ok(())
    }

    /// `max_r |A x - b|_r`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        (0..self.num_constraints())
            .map(|r| {
                let ax: f64 = (0..self.num_vars()).map(|j| self.eq_matrix[(r, j)] * x[j]).sum();
                (ax - self.rhs[r]).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point when `status` is optimal, otherwise the last iterate.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub pivot_tol: f64,
    pub optimality_tol: f64,
    pub feasibility_tol: f64,
    /// `None` picks `50 (n + m) + 1000`.
    pub iteration_cap: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { pivot_tol: 1e-9, optimality_tol: 1e-9, feasibility_tol: 1e-8, iteration_cap: None }
    }
}

pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    solve_lp_with(problem, &SimplexOptions::default())
}

/// Shifted problem `x' = x - l`, `x' in [0, u - l]`, rows flipped so the
/// right-hand side is nonnegative, plus one artificial per row.
struct Tableau {
    n: usize,
    m: usize,
    /// `B^-1 [A | I]`, `m x (n + m)`.
    t: DMatrix<f64>,
    /// Sign applied to each original row.
    sign: Vec<f64>,
    /// Upper bounds of all `n + m` shifted variables.
    upper: Vec<f64>,
    basis: Vec<usize>,
    /// Basic variable values.
    xb: Vec<f64>,
    at_upper: Vec<bool>,
    is_basic: Vec<bool>,
    rhs: Vec<f64>,
    iterations: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

impl Tableau {
    fn new(p: &LpProblem) -> Self {
        let n = p.num_vars();
        let m = p.num_constraints();
        let mut rhs = vec![0.0; m];
        let mut sign = vec![1.0; m];
        let mut t = DMatrix::zeros(m, n + m);
        for r in 0..m {
            let shifted = p.rhs[r] - (0..n).map(|j| p.eq_matrix[(r, j)] * p.lower[j]).sum::<f64>();
            sign[r] = if shifted < 0.0 { -1.0 } else { 1.0 };
            rhs[r] = sign[r] * shifted;
            for j in 0..n {
                t[(r, j)] = sign[r] * p.eq_matrix[(r, j)];
            }
            t[(r, n + r)] = 1.0;
        }
        let mut upper: Vec<f64> = (0..n).map(|j| p.upper[j] - p.lower[j]).collect();
        upper.extend(std::iter::repeat(f64::INFINITY).take(m));
        let mut is_basic = vec![false; n + m];
        for r in 0..m {
            is_basic[n + r] = true;
        }
        Self {
            n,
            m,
            t,
            sign,
            upper,
            basis: (n..n + m).collect(),
            xb: rhs.clone(),
            at_upper: vec![false; n + m],
            is_basic,
            rhs,
            iterations: 0,
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.upper[j]
        } else {
            0.0
        }
    }

    /// One Bland iteration for objective `c` over the shifted variables,
    /// letting only columns `j < allowed` enter.
    fn step(&mut self, c: &[f64], allowed: usize, opts: &SimplexOptions) -> Step {
        let entering = (0..allowed).find_map(|j| {
            if self.is_basic[j] || self.upper[j] == 0.0 {
                return None;
            }
            let reduced = c[j] - (0..self.m).map(|r| c[self.basis[r]] * self.t[(r, j)]).sum::<f64>();
            if !self.at_upper[j] && reduced > opts.optimality_tol {
                Some((j, 1.0))
            } else if self.at_upper[j] && reduced < -opts.optimality_tol {
                Some((j, -1.0))
            } else {
                None
            }
        });
        let Some((j, dir)) = entering else {
            return Step::Optimal;
        };

        // Moving x_j by dir * step changes x_B by -dir * step * T_j.
        let mut best: Option<(f64, usize, usize)> = None; // (ratio, basic var, row)
        for r in 0..self.m {
            let alpha = dir * self.t[(r, j)];
            let var = self.basis[r];
            let ratio = if alpha > opts.pivot_tol {
                self.xb[r].max(0.0) / alpha
            } else if alpha < -opts.pivot_tol && self.upper[var].is_finite() {
                (self.upper[var] - self.xb[r]).max(0.0) / -alpha
            } else {
                continue;
            };
            let better = match best {
                None => true,
                Some((b, bv, _)) => ratio < b - 1e-12 || (ratio <= b + 1e-12 && var < bv),
            };
            if better {
                best = Some((ratio, var, r));
            }
        }
        let flip = self.upper[j];
        let step = match best {
            Some((ratio, _, _)) if ratio < flip => ratio,
            _ if flip.is_finite() => flip,
            _ => return Step::Unbounded,
        };

        for r in 0..self.m {
            self.xb[r] -= dir * step * self.t[(r, j)];
        }
        self.iterations += 1;
        let pivot = match best {
            Some((ratio, _, row)) if ratio < flip => row,
            _ => {
                self.at_upper[j] = !self.at_upper[j];
                return Step::Moved;
            }
        };

        let leaving = self.basis[pivot];
        let alpha = dir * self.t[(pivot, j)];
        self.at_upper[leaving] = alpha < 0.0;
        self.is_basic[leaving] = false;
        let entering_value = if dir > 0.0 { step } else { self.upper[j] - step };
        self.basis[pivot] = j;
        self.is_basic[j] = true;
        self.at_upper[j] = false;
        self.xb[pivot] = entering_value;
        self.pivot(pivot, j);
        Step::Moved
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[(row, col)];
        let width = self.t.ncols();
        for k in 0..width {
            self.t[(row, k)] /= p;
        }
        for r in 0..self.m {
            if r == row {
                continue;
            }
            let factor = self.t[(r, col)];
            if factor != 0.0 {
                for k in 0..width {
                    let v = self.t[(row, k)];
                    self.t[(r, k)] -= factor * v;
                }
            }
        }
    }

    fn run(&mut self, c: &[f64], allowed: usize, cap: usize, opts: &SimplexOptions) -> Result<Step> {
        loop {
            if self.iterations >= cap {
                return Err(Error::IterationCap { cap, basis: self.basis.clone() });
            }
            match self.step(c, allowed, opts) {
                Step::Moved => {}
                other => return Ok(other),
            }
        }
    }

    /// Recompute basic values from the original rows to shed drift.
    fn refresh(&mut self, p: &LpProblem) {
        if self.m == 0 {
            return;
        }
        let mut b = DMatrix::zeros(self.m, self.m);
        let mut rhs = DVector::from_vec(self.rhs.clone());
        for r in 0..self.m {
            for (k, &var) in self.basis.iter().enumerate() {
                b[(r, k)] = self.column_entry(p, r, var);
            }
            for j in 0..self.n + self.m {
                if !self.is_basic[j] {
                    rhs[r] -= self.column_entry(p, r, j) * self.nonbasic_value(j);
                }
            }
        }
        if let Some(xb) = b.lu().solve(&rhs) {
            self.xb = xb.iter().copied().collect();
        }
    }

    fn column_entry(&self, p: &LpProblem, row: usize, var: usize) -> f64 {
        if var < self.n {
            self.sign[row] * p.eq_matrix[(row, var)]
        } else if var - self.n == row {
            1.0
        } else {
            0.0
        }
    }

    fn shifted_point(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.n + self.m).map(|j| self.nonbasic_value(j)).collect();
        for (r, &var) in self.basis.iter().enumerate() {
            x[var] = self.xb[r];
        }
        x
    }
}

pub fn solve_lp_with(problem: &LpProblem, opts: &SimplexOptions) -> Result<LpSolution> {
    problem.validate()?;
    let n = problem.num_vars();
    let m = problem.num_constraints();
    let cap = opts.iteration_cap.unwrap_or(50 * (n + m) + 1000);
    let mut tab = Tableau::new(problem);

    // Phase 1: maximize minus the sum of artificials.
    let mut phase1 = vec![0.0; n + m];
    for a in &mut phase1[n..] {
        *a = -1.0;
    }
    tab.run(&phase1, n + m, cap, opts)?;
    tab.refresh(problem);
    let infeasibility: f64 = tab.shifted_point()[n..].iter().sum();
    let finish = |tab: &Tableau, status: LpStatus| {
        let shifted = tab.shifted_point();
        let x: Vec<f64> = (0..n)
            .map(|j| (problem.lower[j] + shifted[j]).clamp(problem.lower[j], problem.upper[j]))
            .collect();
        let objective = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpSolution { status, residual: problem.residual(&x), x, objective, iterations: tab.iterations }
    };
    if infeasibility > opts.feasibility_tol {
        return Ok(finish(&tab, LpStatus::Infeasible));
    }

    // Pin artificials at zero; pivot basic ones out where a structural column allows.
    for a in n..n + m {
        tab.upper[a] = 0.0;
    }
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(j) = (0..n).find(|&j| !tab.is_basic[j] && tab.t[(r, j)].abs() > 1e-7) {
                let leaving = tab.basis[r];
                tab.is_basic[leaving] = false;
                tab.at_upper[leaving] = false;
                let value = tab.nonbasic_value(j);
                tab.basis[r] = j;
                tab.is_basic[j] = true;
                tab.at_upper[j] = false;
                tab.xb[r] = value;
                tab.pivot(r, j);
            }
        }
    }
    tab.refresh(problem);

    let mut phase2 = problem.objective.clone();
    phase2.extend(std::iter::repeat(0.0).take(m));
    let status = match tab.run(&phase2, n, cap, opts)? {
        Step::Unbounded => LpStatus::Unbounded,
        _ => LpStatus::Optimal,
    };
    tab.refresh(problem);
    Ok(finish(&tab, status))
}
