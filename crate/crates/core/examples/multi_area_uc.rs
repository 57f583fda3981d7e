//! The coordinated heuristic with a few restarts, with its convergence
//! trace summarized per phase.
//!
//! cargo run --release --example multi_area_uc -- demo4 3

use interclear::admm::Phase;
use interclear::coordination::run_multi_area_uc;
use interclear::model::bundled_case;
use interclear::uc::AlgoParams;

fn main() -> interclear::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "demo4".into());
    let restarts = args.next().map(|s| s.parse().expect("restart count")).unwrap_or(2);
    let case = bundled_case(&name).expect("bundled case name");
    let params = AlgoParams {
        n_ic: restarts,
        ..Default::default()
    };
    let res = run_multi_area_uc(&case, &params)?;

    println!(
        "cost {:.2} from restart {:?}, iteration {:?}",
        res.cost.total, res.best_restart, res.best_iteration
    );
    for phase in [Phase::Uc, Phase::Candidate, Phase::Ed, Phase::Price] {
        let n = res.trace.iter().filter(|r| r.phase == phase).count();
        println!("{:>10} {n} rows", phase.as_str());
    }
    for r in res.trace.iter().filter(|r| r.phase == Phase::Candidate) {
        println!("restart {} iter {:>3}: {:>12.2} {}", r.restart, r.iter, r.cost, if r.feasible { "" } else { "infeasible" });
    }
    if let Some(cause) = res.cause {
        println!("{cause}");
    }
    Ok(())
}
