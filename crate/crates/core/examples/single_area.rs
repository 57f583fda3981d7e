//! Centralized commitment of a bundled case, printed as an on/off grid.
//!
//! cargo run --example single_area -- demo14

use interclear::baselines::run_single_area;
use interclear::miqp::MiqpOptions;
use interclear::model::bundled_case;

fn main() -> interclear::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "demo14".into());
    let case = bundled_case(&name).expect("bundled case name");
    let res = run_single_area(&case, &MiqpOptions::default())?;

    println!("cost {:.2} ({})", res.cost.total, if res.converged { "optimal" } else { "not proven" });
    for (g, row) in res.schedule.u.iter().enumerate() {
        let grid: String = row.iter().map(|&u| if u == 1 { '#' } else { '.' }).collect();
        println!("{:>6} {grid}", case.generator_label(g));
    }
    let peak = (0..case.horizon).max_by(|&a, &b| case.total_demand(a).total_cmp(&case.total_demand(b))).unwrap();
    println!("peak hour {} prices:", peak + 1);
    for (b, bus) in case.buses.iter().enumerate() {
        println!("  {:>4} {:8.3}", bus.id, res.lmps[b][peak]);
    }
    Ok(())
}
