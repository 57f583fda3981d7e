//! Branch and bound on a commitment choice between three units.
//!
//! cargo run --example miqp_solve

use interclear::miqp::{solve_miqp, MixedIntegerQp};
use interclear::qp::QuadraticProgram;

fn main() -> interclear::Result<()> {
    // variables: u0 u1 u2 (on/off), p0 p1 p2 (output); demand 120 MW
    let (fixed, lin, cap) = ([50.0, 120.0, 20.0], [12.0, 9.0, 20.0], [70.0, 100.0, 60.0]);
    let mut qp = QuadraticProgram::new(6);
    for i in 0..3 {
        qp.c[i] = fixed[i];
        qp.c[3 + i] = lin[i];
        qp.add_hessian(3 + i, 3 + i, 0.02);
        qp.set_bounds(i, 0.0, 1.0);
        qp.set_bounds(3 + i, 0.0, cap[i]);
        qp.add_le(&[(3 + i, 1.0), (i, -cap[i])], 0.0);
    }
    qp.add_eq(&[(3, 1.0), (4, 1.0), (5, 1.0)], 120.0);

    let sol = solve_miqp(&MixedIntegerQp { qp, binary_indices: vec![0, 1, 2] }, 0.0, 1000)?;
    println!("{:?} after {} nodes, objective {:.4}", sol.status, sol.nodes_explored, sol.objective);
    println!("on  {:?}", &sol.x[..3].iter().map(|u| u.round() as u8).collect::<Vec<_>>());
    println!("MW  {:?}", &sol.x[3..]);
    println!("incumbents {:?}", sol.incumbent_history);
    Ok(())
}
