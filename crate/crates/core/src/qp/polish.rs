//! Active-set refinement of an interior-point solution.
//!
//! Works on the conic form `A x + s = b`, `s` in zero cone (first `n_zero`
//! rows) or nonnegative orthant. Rows whose slack is smaller than their
//! multiplier are taken as active and the equality-constrained KKT system on
//! that set is solved directly. The result is kept only if it is feasible and
//! the multipliers carry the right sign, so a wrong guess costs nothing.

use clarabel::algebra::CscMatrix;
use clarabel::qdldl::{QDLDLFactorisation, QDLDLSettingsBuilder};

const DELTA: f64 = 1e-9;
const REFINE_STEPS: usize = 30;

pub(crate) struct ConicForm<'a> {
    pub n: usize,
    /// Upper triangle of `P`.
    pub p: &'a [(usize, usize, f64)],
    pub q: &'a [f64],
    pub a: &'a [(usize, usize, f64)],
    pub b: &'a [f64],
    pub n_zero: usize,
}

pub(crate) struct Polished {
    pub x: Vec<f64>,
    /// Multipliers on the conic rows; `None` when some active inequality
    /// kept a negative multiplier (degenerate or unresolved active set).
    pub z: Option<Vec<f64>>,
}

impl Polished {
    /// Both primal and dual feasible on the final active set, so `x` is an
    /// exact minimizer up to linear-algebra round-off.
    pub fn is_kkt(&self) -> bool {
        self.z.is_some()
    }
}

const ROUNDS: usize = 6;

/// Starts from the rows whose slack is below their multiplier, then adds
/// violated rows and drops rows with negative multipliers for a few rounds.
/// Returns the last primal-feasible point found.
pub(crate) fn polish(f: &ConicForm, s: &[f64], z: &[f64], feas_tol: f64) -> Option<Polished> {
    let m = f.b.len();
    let mut active: Vec<bool> = (0..m).map(|r| r < f.n_zero || s[r] < z[r]).collect();
    let mut best: Option<Polished> = None;
    for _ in 0..ROUNDS {
        let (x, y) = solve_active(f, &active)?;
        let mut ax = vec![0.0; m];
        for &(r, j, v) in f.a {
            ax[r] += v * x[j];
        }
        let violated: Vec<usize> = (0..m)
            .filter(|&r| !active[r] && ax[r] > f.b[r] + feas_tol * f.b[r].abs().max(1.0))
            .collect();
        let negative: Vec<usize> = (f.n_zero..m).filter(|&r| active[r] && y[r] < -feas_tol).collect();
        if violated.is_empty() {
            let done = negative.is_empty();
            best = Some(Polished {
                x,
                z: done.then_some(y),
            });
            if done {
                break;
            }
        }
        for r in violated {
            active[r] = true;
        }
        for r in negative {
            active[r] = false;
        }
    }
    best
}

/// Solve the equality-constrained KKT system with the `active` rows held
/// tight. Returns the point and the multipliers (zero on inactive rows).
fn solve_active(f: &ConicForm, active: &[bool]) -> Option<(Vec<f64>, Vec<f64>)> {
    let (n, m) = (f.n, f.b.len());
    let rows: Vec<usize> = (0..m).filter(|&r| active[r]).collect();
    let mut slot = vec![usize::MAX; m];
    for (k, &r) in rows.iter().enumerate() {
        slot[r] = k;
    }
    let dim = n + rows.len();

    let (mut ki, mut kj, mut kv) = (Vec::new(), Vec::new(), Vec::new());
    for &(i, j, v) in f.p {
        ki.push(i);
        kj.push(j);
        kv.push(v);
    }
    for &(r, j, v) in f.a {
        if slot[r] != usize::MAX {
            ki.push(j);
            kj.push(n + slot[r]);
            kv.push(v);
        }
    }
    for d in 0..dim {
        ki.push(d);
        kj.push(d);
        kv.push(if d < n { DELTA } else { -DELTA });
    }
    let k = CscMatrix::new_from_triplets(dim, dim, ki, kj, kv);
    let signs: Vec<i8> = (0..dim).map(|d| if d < n { 1 } else { -1 }).collect();
    let settings = QDLDLSettingsBuilder::default().Dsigns(signs).build().ok()?;
    let mut ldl = QDLDLFactorisation::new(&k, Some(settings)).ok()?;

    // unregularized KKT product
    let apply = |sol: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for &(i, j, v) in f.p {
            out[i] += v * sol[j];
            if i != j {
                out[j] += v * sol[i];
            }
        }
        for &(r, j, v) in f.a {
            let k = slot[r];
            if k != usize::MAX {
                out[j] += v * sol[n + k];
                out[n + k] += v * sol[j];
            }
        }
        out
    };
    let mut rhs = vec![0.0; dim];
    rhs[..n].iter_mut().zip(f.q).for_each(|(r, q)| *r = -q);
    for (k, &r) in rows.iter().enumerate() {
        rhs[n + k] = f.b[r];
    }
    let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));

    let mut sol = vec![0.0; dim];
    let mut resid = f64::INFINITY;
    for _ in 0..REFINE_STEPS {
        let kx = apply(&sol);
        let mut r: Vec<f64> = rhs.iter().zip(&kx).map(|(a, b)| a - b).collect();
        resid = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if resid <= 1e-14 * scale {
            break;
        }
        ldl.solve(&mut r);
        for (s, d) in sol.iter_mut().zip(&r) {
            *s += d;
        }
    }
    // inconsistent active rows: the guessed set over-determines x
    if !(resid <= 1e-10 * scale) {
        return None;
    }
    let mut y = vec![0.0; m];
    for (k, &r) in rows.iter().enumerate() {
        y[r] = sol[n + k];
    }
    sol.truncate(n);
    Some((sol, y))
}
