//! Areas cleared on their own under a flat interchange given on the
//! command line (MW exported from the first area to the second).
//!
//! cargo run --example uncoordinated -- 40

use interclear::baselines::{default_interfaces, run_uncoordinated, InterchangeEntry, InterchangeSchedule, InterchangeValue};
use interclear::miqp::MiqpOptions;
use interclear::model::bundled_case;

fn main() -> interclear::Result<()> {
    let mw: f64 = std::env::args().nth(1).map(|s| s.parse().expect("MW")).unwrap_or(40.0);
    let case = bundled_case("micro2").unwrap();
    let interfaces = default_interfaces(&case)?;
    let schedule = InterchangeSchedule {
        entries: interfaces
            .iter()
            .map(|d| InterchangeEntry {
                interface: d.name.clone(),
                value: InterchangeValue::Constant { mw },
            })
            .collect(),
    };
    let res = run_uncoordinated(&case, &interfaces, &schedule, &MiqpOptions::default())?;
    if !res.feasible {
        println!("infeasible: {}", res.cause.unwrap_or_default());
        return Ok(());
    }
    println!("cost {:.2}", res.cost.total);
    for (b, bus) in case.buses.iter().enumerate() {
        println!("{} {:?}", bus.id, res.lmps[b]);
    }
    Ok(())
}
