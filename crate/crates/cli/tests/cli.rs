use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const REVERSAL: &str = r#"{"alphabet":["A","B","C","D"],"pi0":{"A":1,"B":2,"C":3,"D":4},"pi1":{"A":4,"B":3,"C":2,"D":1},"lengths":{"A":"3141592653589793/10000000000000000","B":"2718281828459045/10000000000000000","C":"1414213562373095/10000000000000000","D":"2725912955578067/10000000000000000"}}"#;

fn iet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iet")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("JSON on stdout")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn diagram_of_the_reversal_has_seven_vertices() {
    let dir = TempDir::new().unwrap();
    let base = write(dir.path(), "base.json", REVERSAL);
    let o = iet(&["diagram", "--base", path(&base)]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert_eq!(v["vertices"].as_array().unwrap().len(), 7);
    assert_eq!(v["arrows"].as_array().unwrap().len(), 14);
    assert!(v["arrows"][0].get("secondary").is_some());
}

#[test]
fn orbit_reports_names_and_exact_lengths() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "s.json", REVERSAL);
    let o = iet(&["orbit", "--spec", path(&spec), "--steps", "20"]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert_eq!(v["steps"], "20");
    assert!(v["lambda"]["A"].as_str().unwrap().contains('/'));
    assert!(v["halt"].is_null());
}

#[test]
fn connexion_halt_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        dir.path(),
        "s.json",
        r#"{"alphabet":["A","B","C","D"],"pi0":{"A":1,"B":2,"C":3,"D":4},"pi1":{"A":4,"B":3,"C":2,"D":1},"lengths":{"A":"31/100","B":"23/100","C":"17/100","D":"29/100"}}"#,
    );
    let o = iet(&["orbit", "--spec", path(&spec), "--steps", "50"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!stdout_json(&o)["halt"].is_null());
    assert_eq!(iet(&["roth", "--spec", path(&spec), "--steps", "50"]).status.code(), Some(3));
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"alphabet":["A","B"],"pi0":{"A":1,"B":2},"pi1":{"A":1,"B":2},"lengths":{"A":"1","B":"1"}}"#,
    );
    assert_eq!(iet(&["orbit", "--spec", path(&bad), "--steps", "3"]).status.code(), Some(2));
    assert_eq!(iet(&["orbit", "--spec", "missing.json", "--steps", "3"]).status.code(), Some(2));
    assert_eq!(iet(&["family", "b", "--k", "0"]).status.code(), Some(2));
    // τ violating the suspension inequalities
    let spec = write(dir.path(), "s.json", REVERSAL);
    let tau = write(dir.path(), "tau.json", r#"{"A":"-1","B":"1","C":"1","D":"1"}"#);
    assert_eq!(iet(&["suspend", "--spec", path(&spec), "--tau", path(&tau)]).status.code(), Some(2));
}

#[test]
fn accel_and_roth_emit_csv_series() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "s.json", REVERSAL);
    let o = iet(&["--format", "csv", "accel", "--spec", path(&spec), "--steps", "60", "--D", "3"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("k,nD,Z_norm1,Z_normInf,Q_norm1\n"));
    let o = iet(&["roth", "--spec", path(&spec), "--steps", "200"]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    for key in ["a", "theta", "c", "verdicts"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn suspend_and_flow_keep_area() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "s.json", REVERSAL);
    let tau = write(dir.path(), "tau.json", r#"{"A":"1","B":"1/2","C":"-1/2","D":"-1"}"#);
    let s = stdout_json(&iet(&["suspend", "--spec", path(&spec), "--tau", path(&tau)]));
    assert_eq!((s["genus"].as_u64(), s["nu"].as_u64()), (Some(2), Some(1)));
    assert_eq!(s["singularities"], serde_json::json!([2]));
    let o = iet(&["flow", "--spec", path(&spec), "--tau", path(&tau), "--t", "-0.7", "--normalized-steps", "3"]);
    assert!(o.status.success());
    let path_v = stdout_json(&o);
    let states = path_v.as_array().unwrap();
    assert_eq!(states.len(), 4);
    assert!(states.iter().all(|x| x["area"] == s["area"]));
}

#[test]
fn solve_writes_report_and_series() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "s.json", REVERSAL);
    let phi = write(
        dir.path(),
        "phi.json",
        r#"{"A":[{"from":"0","to":"3141592653589793/10000000000000000","poly":["1"]}],"B":[{"from":"0","to":"2718281828459045/10000000000000000","poly":["-1"]}],"C":[{"from":"0","to":"1414213562373095/10000000000000000","poly":["1/2"]}],"D":[{"from":"0","to":"2725912955578067/10000000000000000","poly":["0"]}]}"#,
    );
    let out = dir.path().join("out");
    let o = iet(&["--out", path(&out), "solve", "--spec", path(&spec), "--phi", path(&phi), "--samples", "50"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("solve.json")).unwrap()).unwrap();
    assert!(report["cross_check"]["agree"].as_bool().unwrap());
    let csv = fs::read_to_string(out.join("solve.csv")).unwrap();
    assert!(csv.starts_with("N,S_N\n0,0\n"));
    assert_eq!(csv.lines().count(), 52);
}

#[test]
fn family_certificates() {
    let a = stdout_json(&iet(&["family", "a", "--n", "5", "--loops", "12"]));
    assert_eq!(a["loops_match"], true);
    assert_eq!(a["expected_a"], true);
    let o = iet(&["--format", "csv", "family", "b", "--n0", "10", "--k", "3"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("k,growth"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn monte_carlo_is_byte_identical_per_seed() {
    let args = [
        "--seed",
        "11",
        "--precision",
        "128",
        "mc",
        "--top",
        "ABC",
        "--bottom",
        "CBA",
        "--samples",
        "8",
        "--depth",
        "10",
    ];
    let first = iet(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, iet(&args).stdout);
    let v: Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(v["records"].as_array().unwrap().len(), 8);
    let other = iet(&[
        "--seed",
        "12",
        "--precision",
        "128",
        "mc",
        "--top",
        "ABC",
        "--bottom",
        "CBA",
        "--samples",
        "8",
        "--depth",
        "10",
    ]);
    assert_ne!(first.stdout, other.stdout);
}

#[test]
fn empty_monte_carlo_run_succeeds() {
    let o = iet(&["mc", "--samples", "0"]);
    assert!(o.status.success());
    assert_eq!(stdout_json(&o)["evaluated"], 0);
}

#[test]
fn lyapunov_and_probe_tables() {
    let o = iet(&[
        "--format",
        "csv",
        "mc",
        "--lyapunov",
        "--top",
        "AB",
        "--bottom",
        "BA",
        "--samples",
        "4",
        "--depth",
        "12",
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("sample,status,top,second,gap\n"));
    let o = iet(&["--format", "csv", "probe-q47", "--family-b", "10", "--depth", "3"]);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("sample,k,Znorm,Qnorm,C_hat\n"));
    let o = iet(&["probe-q47", "--samples", "3", "--depth", "12"]);
    assert_eq!(stdout_json(&o)["label"], "exploratory");
}
