//! A run file parsed and executed the way the `interclear clear` command
//! does, writing results under the system temp directory.
//!
//! cargo run --release --example run_config

use interclear::cli::{resolve_case, run_clear, write_outcome, RunConfig};

const RUN: &str = r#"{
  "case": "demo4",
  "method": "coordinated",
  "seed": 11,
  "params": { "n_ic": 2, "rho_ed": 1500 }
}"#;

fn main() -> interclear::Result<()> {
    let cfg: RunConfig = serde_json::from_str(RUN).expect("run file parses");
    cfg.validate()?;
    let case = resolve_case(cfg.case.as_ref().unwrap())?;
    let outcome = run_clear(&case, &cfg)?;
    let out = std::env::temp_dir().join("interclear-run-config");
    write_outcome(&case, &outcome, &out)?;
    for run in outcome.runs() {
        println!("{} {:.2} in {:.2}s", run.result.method, run.result.cost.total, run.seconds);
    }
    println!("written to {}", out.display());
    Ok(())
}
