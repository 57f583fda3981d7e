//! The `interclear` binary end to end.

use std::borrow::BorrowMut;
use std::path::Path;
use std::process::{Command, Output};

const METHOD_FILES: [&str; 5] = ["costs.json", "commitment.csv", "dispatch.csv", "lmps.csv", "trace.csv"];

fn interclear(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_interclear"));
    cmd.args(args).env_remove("INTERCLEAR_OUT");
    cmd
}

fn run(mut cmd: impl BorrowMut<Command>) -> Output {
    cmd.borrow_mut().output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn has_method_files(dir: &Path) -> bool {
    METHOD_FILES.iter().all(|f| dir.join(f).is_file())
}

fn costs(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("costs.json")).unwrap()).unwrap()
}

#[test]
fn clear_single_writes_its_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = run(interclear(&["clear", "--case", "micro2", "--method", "single", "--out", out.to_str().unwrap()]));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(has_method_files(&out.join("single")));
    assert!(out.join("timing.json").is_file());
    assert!(!out.join("coordinated").exists());
    assert!(stdout(&o).starts_with("single"));
    let c = costs(&out.join("single"));
    assert_eq!(c["feasible"], true);
    assert_eq!(c["converged"], true);
}

#[test]
fn clear_all_writes_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let o = run(interclear(&["clear", "--case", "micro2", "--out", out.to_str().unwrap()]));
    assert!(o.status.success(), "{}", stderr(&o));
    for m in ["single", "uncoordinated", "coordinated"] {
        assert!(has_method_files(&out.join(m)), "{m}");
    }
    assert!(out.join("interchange.json").is_file());
    let cmp: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("comparison.json")).unwrap()).unwrap();
    let s = cmp["single"].as_f64().unwrap();
    let u = cmp["uncoordinated"].as_f64().unwrap();
    let c = cmp["coordinated"].as_f64().unwrap();
    assert!(s <= c + 1e-6 * s && c <= u + 1e-6 * u, "{s} {c} {u}");
    assert!(stdout(&o).contains("savings fraction"));
}

#[test]
fn output_directory_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(interclear(&["clear", "--case", "micro2", "--method", "single"]).env("INTERCLEAR_OUT", tmp.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(has_method_files(&tmp.path().join("single")));

    // an explicit flag wins
    let flag = tmp.path().join("flag");
    let o = run(interclear(&["clear", "--case", "micro2", "--method", "single", "--out", flag.to_str().unwrap()])
        .env("INTERCLEAR_OUT", tmp.path().join("env")));
    assert!(o.status.success());
    assert!(flag.join("single").is_dir());
    assert!(!tmp.path().join("env").exists());
}

#[test]
fn missing_case_fails_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = run(interclear(&["clear", "--case", "no_such_case.json", "--out", out.to_str().unwrap()]));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no_such_case.json"));
    assert!(!out.exists());
}

#[test]
fn unknown_method_is_rejected() {
    let o = run(interclear(&["clear", "--case", "micro2", "--method", "cheapest"]));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cheapest"));
}

#[test]
fn infeasible_result_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(interclear(&["clear", "--case", "demo4", "--method", "uncoordinated", "--out", tmp.path().to_str().unwrap()]));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let dir = tmp.path().join("uncoordinated");
    assert!(has_method_files(&dir));
    let c = costs(&dir);
    assert_eq!(c["feasible"], false);
    assert!(c["cause"].is_string());
}

#[test]
fn validate_reports_statistics() {
    let o = run(interclear(&["validate", "--case", "demo3area"]));
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("21 buses") && text.contains("3 areas"), "{text}");
    assert!(text.trim_end().ends_with("valid"));
}

#[test]
fn validate_names_the_bad_field() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    let mut case = interclear::model::bundled_case("micro2").unwrap();
    case.generators[1].bus_id = "nowhere".into();
    std::fs::write(&path, case.to_json_string()).unwrap();
    let o = run(interclear(&["validate", "--case", path.to_str().unwrap()]));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nowhere"), "{}", stderr(&o));
}

#[test]
fn derive_interchange_prints_schedule() {
    let o = run(interclear(&["derive-interchange", "--case", "micro2"]));
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["interfaces"][0]["name"], "A-B");
    assert!(v["schedule"]["entries"][0]["interface"] == "A-B");
}

#[test]
fn run_file_with_relative_case_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let case = interclear::model::bundled_case("micro2").unwrap();
    std::fs::write(tmp.path().join("case.json"), case.to_json_string()).unwrap();
    let run_file = tmp.path().join("run.json");
    std::fs::write(
        &run_file,
        r#"{"case": "case.json", "method": "coordinated", "seed": 3, "params": {"n_ic": 1}}"#,
    )
    .unwrap();
    let out = tmp.path().join("o");
    let o = run(interclear(&["clear", "--config", run_file.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(has_method_files(&out.join("coordinated")));

    std::fs::write(&run_file, r#"{"case": "case.json", "params": {"rho_ed": -1}}"#).unwrap();
    let o = run(interclear(&["clear", "--config", run_file.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rho_ed"), "{}", stderr(&o));
}
