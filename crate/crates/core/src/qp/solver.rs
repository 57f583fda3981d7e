//! Interior-point backend. Rows are normalized to unit max-coefficient and
//! the objective to unit scale before the solve; multipliers are mapped back
//! to the caller's scaling and sign convention.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::polish::{polish, ConicForm};
use super::{QpSolution, QpStatus, QuadraticProgram, DEFAULT_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct QpOptions {
    pub tol: f64,
    pub max_iter: u32,
    /// Skip the convexity check (callers that build `Q` from known PSD terms).
    pub trust_convex: bool,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: 300,
            trust_convex: false,
        }
    }
}

pub fn solve_qp(qp: &QuadraticProgram, tol: f64) -> Result<QpSolution> {
    if !(tol > 0.0) {
        return Err(Error::Dimension("solve tolerance must be positive".into()));
    }
    solve_qp_with_bounds(
        qp,
        &qp.lower,
        &qp.upper,
        QpOptions {
            tol,
            ..Default::default()
        },
    )
}

enum RowKind {
    Eq(usize),
    Ineq(usize),
    Upper(usize),
    Lower(usize),
    Fixed(usize),
}

/// Solve with the variable bounds replaced by `lower`/`upper`.
pub fn solve_qp_with_bounds(
    qp: &QuadraticProgram,
    lower: &[f64],
    upper: &[f64],
    opts: QpOptions,
) -> Result<QpSolution> {
    qp.check_dimensions()?;
    let n = qp.num_vars();
    if lower.len() != n || upper.len() != n {
        return Err(Error::Dimension("bound override length".into()));
    }
    if !opts.trust_convex {
        qp.check_convex()?;
    }

    let infeasible = |n_eq: usize, n_in: usize| QpSolution {
        x: vec![0.0; n],
        duals_eq: vec![0.0; n_eq],
        duals_ineq: vec![0.0; n_in],
        duals_lower: vec![0.0; n],
        duals_upper: vec![0.0; n],
        objective: f64::INFINITY,
        status: QpStatus::Infeasible,
        iterations: 0,
    };
    let (n_eq, n_in) = (qp.b_eq.len(), qp.b_ineq.len());
    if (0..n).any(|j| lower[j] > upper[j] + 1e-12) {
        return Ok(infeasible(n_eq, n_in));
    }

    let obj_scale = {
        let m = qp.q.max_abs().max(qp.c.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        if m > 0.0 {
            1.0 / m
        } else {
            1.0
        }
    };

    let eq_rows = qp.a_eq.row_abs_max();
    let in_rows = qp.a_ineq.row_abs_max();

    let mut rows_i = Vec::new();
    let mut rows_j = Vec::new();
    let mut vals = Vec::new();
    let mut b = Vec::new();
    let mut kinds = Vec::new();
    let mut row_scale = Vec::new();

    // Zero cone block: equality rows then fixed variables.
    let mut eq_map = vec![usize::MAX; n_eq];
    for (k, &m) in eq_rows.iter().enumerate() {
        if m == 0.0 {
            if qp.b_eq[k].abs() > 1e-9 {
                return Ok(infeasible(n_eq, n_in));
            }
            continue;
        }
        eq_map[k] = kinds.len();
        kinds.push(RowKind::Eq(k));
        row_scale.push(1.0 / m);
        b.push(qp.b_eq[k] / m);
    }
    for j in 0..n {
        if lower[j] == upper[j] {
            rows_i.push(kinds.len());
            rows_j.push(j);
            vals.push(1.0);
            kinds.push(RowKind::Fixed(j));
            row_scale.push(1.0);
            b.push(lower[j]);
        }
    }
    let n_zero = kinds.len();

    let mut in_map = vec![usize::MAX; n_in];
    for (k, &m) in in_rows.iter().enumerate() {
        if m == 0.0 {
            if qp.b_ineq[k] < -1e-9 {
                return Ok(infeasible(n_eq, n_in));
            }
            continue;
        }
        in_map[k] = kinds.len();
        kinds.push(RowKind::Ineq(k));
        row_scale.push(1.0 / m);
        b.push(qp.b_ineq[k] / m);
    }
    for j in 0..n {
        if lower[j] == upper[j] {
            continue;
        }
        if upper[j].is_finite() {
            rows_i.push(kinds.len());
            rows_j.push(j);
            vals.push(1.0);
            kinds.push(RowKind::Upper(j));
            row_scale.push(1.0);
            b.push(upper[j]);
        }
        if lower[j].is_finite() {
            rows_i.push(kinds.len());
            rows_j.push(j);
            vals.push(-1.0);
            kinds.push(RowKind::Lower(j));
            row_scale.push(1.0);
            b.push(-lower[j]);
        }
    }
    for &(i, j, v) in &qp.a_eq.entries {
        if eq_map[i] != usize::MAX {
            rows_i.push(eq_map[i]);
            rows_j.push(j);
            vals.push(v * row_scale[eq_map[i]]);
        }
    }
    for &(i, j, v) in &qp.a_ineq.entries {
        if in_map[i] != usize::MAX {
            rows_i.push(in_map[i]);
            rows_j.push(j);
            vals.push(v * row_scale[in_map[i]]);
        }
    }
    let m_rows = kinds.len();

    let mut pi = Vec::new();
    let mut pj = Vec::new();
    let mut pv = Vec::new();
    for &(i, j, v) in &qp.q.entries {
        if i <= j {
            pi.push(i);
            pj.push(j);
            pv.push(v * obj_scale);
        }
    }
    let p_upper: Vec<(usize, usize, f64)> = pi.iter().zip(&pj).zip(&pv).map(|((&i, &j), &v)| (i, j, v)).collect();
    let a_trip: Vec<(usize, usize, f64)> = rows_i.iter().zip(&rows_j).zip(&vals).map(|((&i, &j), &v)| (i, j, v)).collect();
    let p = CscMatrix::new_from_triplets(n, n, pi, pj, pv);
    let a = CscMatrix::new_from_triplets(m_rows, n, rows_i, rows_j, vals);
    let q: Vec<f64> = qp.c.iter().map(|v| v * obj_scale).collect();
    let mut cones = Vec::new();
    if n_zero > 0 {
        cones.push(SupportedConeT::ZeroConeT(n_zero));
    }
    if m_rows > n_zero {
        cones.push(SupportedConeT::NonnegativeConeT(m_rows - n_zero));
    }

    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(opts.max_iter)
        .tol_gap_abs(opts.tol)
        .tol_gap_rel(opts.tol)
        .tol_feas(opts.tol)
        .max_threads(1)
        .build()
        .expect("valid solver settings");
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
        .map_err(|e| Error::Dimension(format!("solver setup: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;

    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => QpStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => QpStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => QpStatus::Unbounded,
        _ => QpStatus::IterationLimit,
    };

    let form = ConicForm {
        n,
        p: &p_upper,
        q: &q,
        a: &a_trip,
        b: &b,
        n_zero,
    };
    let polished = match status {
        QpStatus::Optimal => polish(&form, &sol.s, &sol.z, 1e-9).filter(|pl| {
            let (a, b) = (qp.objective_at(&pl.x), qp.objective_at(&sol.x));
            pl.is_kkt() || a <= b + opts.tol * b.abs().max(1.0)
        }),
        _ => None,
    };
    let (x, z) = match &polished {
        Some(pl) => (pl.x.clone(), pl.z.as_deref().unwrap_or(&sol.z)),
        None => (sol.x.clone(), sol.z.as_slice()),
    };

    let mut out = QpSolution {
        x,
        duals_eq: vec![0.0; n_eq],
        duals_ineq: vec![0.0; n_in],
        duals_lower: vec![0.0; n],
        duals_upper: vec![0.0; n],
        objective: 0.0,
        status,
        iterations: sol.iterations,
    };
    if status != QpStatus::Optimal {
        out.objective = match status {
            QpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        return Ok(out);
    }
    for (r, kind) in kinds.iter().enumerate() {
        let z = z[r] * row_scale[r] / obj_scale;
        match *kind {
            RowKind::Eq(k) => out.duals_eq[k] = -z,
            RowKind::Ineq(k) => out.duals_ineq[k] = z.max(0.0),
            RowKind::Upper(j) => out.duals_upper[j] = z.max(0.0),
            RowKind::Lower(j) => out.duals_lower[j] = z.max(0.0),
            RowKind::Fixed(j) => {
                out.duals_upper[j] = z.max(0.0);
                out.duals_lower[j] = (-z).max(0.0);
            }
        }
    }
    // clip tiny bound excursions from the interior iterates
    for j in 0..n {
        out.x[j] = out.x[j].clamp(lower[j], upper[j]);
    }
    out.objective = qp.objective_at(&out.x);
    Ok(out)
}
