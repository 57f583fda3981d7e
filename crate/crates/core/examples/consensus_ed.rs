//! Distributed dispatch of the centralized commitment, compared with the
//! centralized dispatch of the same commitment.
//!
//! cargo run --release --example consensus_ed -- demo14

use interclear::admm::{run_consensus_ed, AreaSet};
use interclear::baselines::run_single_area;
use interclear::miqp::MiqpOptions;
use interclear::model::bundled_case;
use interclear::uc::{dispatch_cost, AlgoParams};

fn main() -> interclear::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "demo14".into());
    let case = bundled_case(&name).expect("bundled case name");
    let single = run_single_area(&case, &MiqpOptions::default())?;
    let areas = AreaSet::new(&case)?;
    let ed = run_consensus_ed(&case, &areas, &single.schedule, &AlgoParams::default(), None, 0)?;

    println!("iterations {} (r {:.1e}, s {:.1e})", ed.iterations, ed.r_inf, ed.s_inf);
    if let Some(cause) = &ed.cause {
        println!("{cause}");
    }
    let central = dispatch_cost(&case, &single.dispatch);
    println!("energy cost: distributed {:.4}, centralized {:.4}", ed.energy_cost, central);
    Ok(())
}
