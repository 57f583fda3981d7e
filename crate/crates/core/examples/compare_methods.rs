//! Clears a bundled case under all three regimes and prints the costs.
//!
//! cargo run --example compare_methods -- demo3area

use std::path::PathBuf;
use std::time::Instant;

use interclear::baselines::{default_interfaces, default_peak_hours, derive_interchange, run_single_area, run_uncoordinated, InterchangeMode};
use interclear::coordination::run_multi_area_uc;
use interclear::miqp::MiqpOptions;
use interclear::model::load_case_file;
use interclear::uc::AlgoParams;

fn main() -> interclear::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "micro2".into());
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("cases").join(format!("{name}.json"));
    let case = load_case_file(&path)?;

    let start = Instant::now();
    let single = run_single_area(&case, &MiqpOptions::default())?;
    println!("single         {:>12.2}  ({:.1?})", single.cost.total, start.elapsed());

    let start = Instant::now();
    let interfaces = default_interfaces(&case)?;
    let schedule = derive_interchange(&case, &single, &interfaces, InterchangeMode::PeakOffpeak, &default_peak_hours(case.horizon))?;
    let unc = run_uncoordinated(&case, &interfaces, &schedule, &MiqpOptions::default())?;
    println!("uncoordinated  {:>12.2}  ({:.1?}) {}", unc.cost.total, start.elapsed(), unc.cause.as_deref().unwrap_or(""));

    let start = Instant::now();
    let coord = run_multi_area_uc(&case, &AlgoParams::default())?;
    println!("coordinated    {:>12.2}  ({:.1?}) {}", coord.cost.total, start.elapsed(), coord.cause.as_deref().unwrap_or(""));

    let max_savings = unc.cost.total - single.cost.total;
    if max_savings > 0.0 && coord.cost.total.is_finite() {
        println!("savings fraction {:.3}", (unc.cost.total - coord.cost.total) / max_savings);
    }
    Ok(())
}
