//! Interchange schedule read off a centralized run, constant and split
//! into peak and off-peak hours.
//!
//! cargo run --example derive_interchange -- demo4

use interclear::baselines::{default_interfaces, default_peak_hours, derive_interchange, run_single_area, InterchangeMode};
use interclear::miqp::MiqpOptions;
use interclear::model::bundled_case;

fn main() -> interclear::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "demo4".into());
    let case = bundled_case(&name).expect("bundled case name");
    let single = run_single_area(&case, &MiqpOptions::default())?;
    let interfaces = default_interfaces(&case)?;
    for mode in [InterchangeMode::Constant, InterchangeMode::PeakOffpeak] {
        let s = derive_interchange(&case, &single, &interfaces, mode, &default_peak_hours(case.horizon))?;
        println!("{}", serde_json::to_string_pretty(&s).unwrap());
    }
    Ok(())
}
