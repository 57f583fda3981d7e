use super::{QpSolution, QuadraticProgram};

/// Infinity norms of the four KKT residual groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Recompute KKT residuals of `sol` from the raw problem data.
pub fn check_kkt(qp: &QuadraticProgram, sol: &QpSolution, _tol: f64) -> KktReport {
    let x = &sol.x;
    let mut grad = qp.q.mul_vec(x);
    for (g, c) in grad.iter_mut().zip(&qp.c) {
        *g += c;
    }
    let ay = qp.a_eq.tmul_vec(&sol.duals_eq);
    let az = qp.a_ineq.tmul_vec(&sol.duals_ineq);
    let mut stationarity: f64 = 0.0;
    for j in 0..x.len() {
        let r = grad[j] - ay[j] + az[j] - sol.duals_lower[j] + sol.duals_upper[j];
        stationarity = stationarity.max(r.abs());
    }

    let primal = qp.max_violation(x).max(0.0);

    let mut dual: f64 = 0.0;
    for v in sol
        .duals_ineq
        .iter()
        .chain(&sol.duals_lower)
        .chain(&sol.duals_upper)
    {
        dual = dual.max(-v);
    }

    let mut complementarity: f64 = 0.0;
    let ax = qp.a_ineq.mul_vec(x);
    for ((ax, b), z) in ax.iter().zip(&qp.b_ineq).zip(&sol.duals_ineq) {
        complementarity = complementarity.max((z * (b - ax)).abs());
    }
    for j in 0..x.len() {
        if qp.lower[j].is_finite() {
            complementarity = complementarity.max((sol.duals_lower[j] * (x[j] - qp.lower[j])).abs());
        }
        if qp.upper[j].is_finite() {
            complementarity = complementarity.max((sol.duals_upper[j] * (qp.upper[j] - x[j])).abs());
        }
    }

    KktReport {
        stationarity,
        primal,
        dual,
        complementarity,
    }
}
