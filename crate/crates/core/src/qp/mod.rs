//! Convex quadratic programs: representation, solver and KKT verification.
//!
//! Problems have the form
//!
//! ```text
//! minimize    ½ xᵀQx + cᵀx + k
//! subject to  A_eq x = b_eq,  A_ineq x ≤ b_ineq,  lower ≤ x ≤ upper
//! ```
//!
//! Multipliers follow the sign convention of the Lagrangian stationarity
//! condition
//!
//! ```text
//! Qx + c − A_eqᵀ y + A_ineqᵀ z − z_lower + z_upper = 0
//! ```
//!
//! so `y_k` is the marginal change of the optimum per unit increase of
//! `b_eq[k]`, and all inequality and bound multipliers are non-negative.

mod kkt;
mod polish;
mod solver;
mod sparse;

pub use kkt::{check_kkt, KktReport};
pub use solver::{solve_qp, solve_qp_with_bounds, QpOptions};
pub use sparse::SparseMatrix;

use crate::error::{Error, Result};

/// Default solve tolerance on the internally normalized problem.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Most negative eigenvalue accepted for `Q`, relative to `max |Q_ij|`.
pub const TOL_PSD: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub struct QuadraticProgram {
    /// Full symmetric storage: both `(i, j)` and `(j, i)` are present.
    pub q: SparseMatrix,
    pub c: Vec<f64>,
    pub constant: f64,
    pub a_eq: SparseMatrix,
    pub b_eq: Vec<f64>,
    pub a_ineq: SparseMatrix,
    pub b_ineq: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Optional variable names, for diagnostics only.
    pub names: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub duals_eq: Vec<f64>,
    pub duals_ineq: Vec<f64>,
    pub duals_lower: Vec<f64>,
    pub duals_upper: Vec<f64>,
    pub objective: f64,
    pub status: QpStatus,
    pub iterations: u32,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

impl QuadraticProgram {
    /// `n` free variables, zero objective, no constraints.
    pub fn new(n: usize) -> Self {
        Self {
            q: SparseMatrix::new(n, n),
            c: vec![0.0; n],
            constant: 0.0,
            a_eq: SparseMatrix::new(0, n),
            b_eq: Vec::new(),
            a_ineq: SparseMatrix::new(0, n),
            b_ineq: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            names: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    /// Adds `h` to `Q_ij` and, off the diagonal, to `Q_ji` as well. On the
    /// diagonal this contributes `½ h x_i²` to the objective, off it `h x_i x_j`.
    pub fn add_hessian(&mut self, i: usize, j: usize, h: f64) {
        self.q.push(i, j, h);
        if i != j {
            self.q.push(j, i, h);
        }
    }

    /// Adds `(weight / 2) (aᵀx − target)²` to the objective.
    pub fn add_square_penalty(&mut self, a: &[(usize, f64)], target: f64, weight: f64) {
        for &(i, ai) in a {
            for &(j, aj) in a {
                self.q.push(i, j, weight * ai * aj);
            }
            self.c[i] -= weight * ai * target;
        }
        self.constant += 0.5 * weight * target * target;
    }

    /// Adds `mult (aᵀx − target)` to the objective.
    pub fn add_linear_penalty(&mut self, a: &[(usize, f64)], target: f64, mult: f64) {
        for &(i, ai) in a {
            self.c[i] += mult * ai;
        }
        self.constant -= mult * target;
    }

    pub fn add_eq(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        self.b_eq.push(rhs);
        self.a_eq.push_row(coeffs)
    }

    pub fn add_le(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        self.b_ineq.push(rhs);
        self.a_ineq.push_row(coeffs)
    }

    pub fn add_ge(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        let neg: Vec<(usize, f64)> = coeffs.iter().map(|&(j, v)| (j, -v)).collect();
        self.add_le(&neg, -rhs)
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        let qx = self.q.mul_vec(x);
        let quad: f64 = x.iter().zip(&qx).map(|(a, b)| a * b).sum();
        let lin: f64 = x.iter().zip(&self.c).map(|(a, b)| a * b).sum();
        0.5 * quad + lin + self.constant
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for (ax, b) in self.a_eq.mul_vec(x).iter().zip(&self.b_eq) {
            v = v.max((ax - b).abs());
        }
        for (ax, b) in self.a_ineq.mul_vec(x).iter().zip(&self.b_ineq) {
            v = v.max(ax - b);
        }
        for ((xi, lo), up) in x.iter().zip(&self.lower).zip(&self.upper) {
            v = v.max(lo - xi).max(xi - up);
        }
        v
    }

    pub fn check_dimensions(&self) -> Result<()> {
        let n = self.num_vars();
        let dims_ok = self.q.nrows == n
            && self.q.ncols == n
            && self.a_eq.ncols == n
            && self.a_ineq.ncols == n
            && self.a_eq.nrows == self.b_eq.len()
            && self.a_ineq.nrows == self.b_ineq.len()
            && self.lower.len() == n
            && self.upper.len() == n
            && (self.names.is_empty() || self.names.len() == n);
        if !dims_ok {
            return Err(Error::Dimension(format!(
                "n = {n}, Q {}x{}, A_eq {}x{} (b {}), A_ineq {}x{} (b {}), bounds {}/{}",
                self.q.nrows,
                self.q.ncols,
                self.a_eq.nrows,
                self.a_eq.ncols,
                self.b_eq.len(),
                self.a_ineq.nrows,
                self.a_ineq.ncols,
                self.b_ineq.len(),
                self.lower.len(),
                self.upper.len()
            )));
        }
        Ok(())
    }

    /// Checks symmetry and positive semidefiniteness of `Q`, one connected
    /// block of its sparsity graph at a time.
    pub fn check_convex(&self) -> Result<()> {
        let q = self.q.compressed();
        let n = self.num_vars();
        let scale = q.iter().fold(1.0f64, |m, e| m.max(e.2.abs()));
        let mut lookup = std::collections::HashMap::with_capacity(q.len());
        for &(i, j, v) in &q {
            lookup.insert((i, j), v);
        }
        for &(i, j, v) in &q {
            let back = lookup.get(&(j, i)).copied().unwrap_or(0.0);
            if (v - back).abs() > 1e-12 * scale {
                return Err(Error::Dimension(format!("Q is not symmetric at ({i}, {j})")));
            }
        }

        // union-find over the off-diagonal pattern
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for &(i, j, _) in &q {
            if i != j {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let mut blocks: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for &(i, _, _) in &q {
            let r = find(&mut parent, i);
            blocks.entry(r).or_default().push(i);
        }
        let mut diag = vec![0.0; n];
        let mut offsum = vec![0.0; n];
        for &(i, j, v) in &q {
            if i == j {
                diag[i] += v;
            } else {
                offsum[i] += v.abs();
            }
        }
        let tol = TOL_PSD * scale;
        for (_, mut members) in blocks {
            members.sort_unstable();
            members.dedup();
            if members.iter().all(|&i| diag[i] >= offsum[i] - tol) {
                continue;
            }
            let pos: std::collections::HashMap<usize, usize> =
                members.iter().enumerate().map(|(k, &i)| (i, k)).collect();
            let m = members.len();
            let mut dense = nalgebra::DMatrix::<f64>::zeros(m, m);
            for &(i, j, v) in &q {
                if let (Some(&a), Some(&b)) = (pos.get(&i), pos.get(&j)) {
                    dense[(a, b)] += v;
                }
            }
            let eig = nalgebra::SymmetricEigen::new(dense);
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            if min < -tol {
                return Err(Error::NotConvex(min));
            }
        }
        Ok(())
    }
}
