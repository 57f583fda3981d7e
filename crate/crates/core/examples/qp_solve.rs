//! A small QP solved and checked against its optimality conditions.
//!
//! cargo run --example qp_solve

use interclear::qp::{check_kkt, solve_qp, QuadraticProgram, DEFAULT_TOL};

fn main() -> interclear::Result<()> {
    // two units meeting 100 MW: min 0.02 x² + 10 x + 0.01 y² + 15 y
    let mut qp = QuadraticProgram::new(2);
    qp.add_hessian(0, 0, 0.04);
    qp.add_hessian(1, 1, 0.02);
    qp.c = vec![10.0, 15.0];
    qp.add_eq(&[(0, 1.0), (1, 1.0)], 100.0);
    qp.set_bounds(0, 0.0, 80.0);
    qp.set_bounds(1, 0.0, 80.0);

    let sol = solve_qp(&qp, DEFAULT_TOL)?;
    println!("{:?} x = {:?}, objective {:.6}", sol.status, sol.x, sol.objective);
    println!("price of the balance row {:.6}", sol.duals_eq[0]);
    println!("{:?}", check_kkt(&qp, &sol, 1e-8));
    Ok(())
}
