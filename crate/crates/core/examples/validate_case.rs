//! Loads a case file, validates it and prints the area split.
//!
//! cargo run --example validate_case -- cases/demo14.json

use std::path::PathBuf;

use interclear::model::{case_stats, load_case_file, partition_areas};

fn main() -> interclear::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("cases/demo14.json"));
    let case = load_case_file(&path)?;
    println!("{}", case_stats(&case)?);

    let p = partition_areas(&case)?;
    for view in &p.views {
        let ids = |v: &[usize]| v.iter().map(|&b| case.buses[b].id.as_str()).collect::<Vec<_>>().join(" ");
        println!(
            "area {}: buses [{}], neighbours [{}], {} tie-lines",
            view.area_id,
            ids(&view.internal_buses),
            ids(&view.adjacent_external_buses),
            view.tie_lines.len()
        );
    }
    Ok(())
}
