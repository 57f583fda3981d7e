//! Prices of one commitment computed centrally and by the areas.
//!
//! cargo run --release --example lmps -- demo3area

use interclear::baselines::run_single_area;
use interclear::coordination::{compute_lmps, LmpMode};
use interclear::miqp::MiqpOptions;
use interclear::model::bundled_case;
use interclear::uc::AlgoParams;

fn main() -> interclear::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "micro2".into());
    let case = bundled_case(&name).expect("bundled case name");
    let single = run_single_area(&case, &MiqpOptions::default())?;
    let params = AlgoParams::default();
    let central = compute_lmps(&case, &single.schedule, LmpMode::Centralized, &params)?;
    let distributed = compute_lmps(&case, &single.schedule, LmpMode::Distributed, &params)?;

    let mut worst: f64 = 0.0;
    for (b, bus) in case.buses.iter().enumerate() {
        for t in 0..case.horizon {
            worst = worst.max((central[b][t] - distributed[b][t]).abs());
        }
        println!("{:>4} [{}] t1 {:9.4} {:9.4}", bus.id, bus.area_id, central[b][0], distributed[b][0]);
    }
    println!("largest difference {worst:.2e} $/MWh");
    Ok(())
}
