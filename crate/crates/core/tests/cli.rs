use std::path::Path;
use std::process::{Command, Output};

use funceq::collocation::{Grid, PiecewiseLinear};

fn funceq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funceq"))
        .args(args)
        .output()
        .expect("run funceq")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let idx = r.headers().unwrap().iter().position(|h| h == name).expect(name);
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

const FISH_FILE: &str = r#"
name = "paradise fish"
phi  = "x"
phi1 = "1 - alpha + alpha*x"
phi2 = "beta*x"
f    = "(beta - alpha)*(1 - x)*x"

[params]
alpha = 0.4
beta  = 0.7

[seminorms]
phi  = 1
phi1 = "alpha"
phi2 = "beta"
f    = "beta - alpha"
"#;

#[test]
fn solve_emits_one_row_per_node() {
    let o = funceq(&["solve", "--model", "fish", "--param", "alpha=0.4", "--param", "beta=0.7", "--n", "100"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("x,u_h,v_h\n"));
    assert_eq!(column(&text, "x").len(), 101);
    // negative margin is reported, not fatal
    assert!(String::from_utf8_lossy(&o.stderr).contains("contraction condition fails"));
}

#[test]
fn equal_rates_give_zero() {
    let o = funceq(&["solve", "--model", "fish", "--param", "alpha=0.3", "--param", "beta=0.3", "--n", "64"]);
    assert!(o.status.success());
    assert!(column(&stdout(&o), "u_h").iter().all(|v| v.abs() <= 1e-12));
}

#[test]
fn csv_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("u.csv");
    let json_path = dir.path().join("u.json");
    let common = ["--model", "smooth", "--param", "alpha=0.25", "--n", "37"];
    let o = funceq(&[&["solve"][..], &common, &["--out", csv_path.to_str().unwrap()]].concat());
    assert!(o.status.success());
    let o = funceq(&[&["solve"][..], &common, &["--format", "json", "--out", json_path.to_str().unwrap()]].concat());
    assert!(o.status.success());

    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let pieces: Vec<(f64, f64)> = serde_json::from_value(doc["solve"]["pieces"].clone()).unwrap();
    let u = PiecewiseLinear::new(Grid::new(37).unwrap(), pieces).unwrap();

    let text = std::fs::read_to_string(&csv_path).unwrap();
    let xs = column(&text, "x");
    let uh = column(&text, "u_h");
    assert_eq!(xs.len(), 38);
    for (x, v) in xs.iter().zip(&uh) {
        assert_eq!(u.eval(*x).unwrap().to_bits(), v.to_bits(), "x = {x}");
    }
    assert_eq!(doc["config"]["n"], 37);
    assert_eq!(doc["problem"]["params"]["alpha"], 0.25);
    assert!(doc["error_metrics"]["sup_error"].as_f64().unwrap() < 2e-3);
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn problem_file_with_zero_source_solves_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "zero.toml",
        "name = \"zero\"\nphi = \"x\"\nphi1 = \"1 - a + a*x\"\nphi2 = \"a*x\"\nf = \"0\"\nu0 = 0\nu1 = 0\n[params]\na = 0.3\n",
    );
    let o = funceq(&["solve", "--file", &path, "--n", "20"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("x,u_h\n"));
    assert!(column(&text, "u_h").iter().all(|&v| v == 0.0));
}

#[test]
fn problem_file_matches_builtin_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "fish.toml", FISH_FILE);
    let a = funceq(&["solve", "--file", &path, "--n", "50"]);
    let b = funceq(&["solve", "--model", "fish", "--param", "alpha=0.4", "--param", "beta=0.7", "--n", "50"]);
    let ua = column(&stdout(&a), "u_h");
    let ub = column(&stdout(&b), "u_h");
    for (x, y) in ua.iter().zip(&ub) {
        assert!((x - y).abs() <= 1e-13, "{x} vs {y}");
    }
    let o = funceq(&["solve", "--file", &path, "--param", "beta=0.4", "--n", "16"]);
    assert!(column(&stdout(&o), "u_h").iter().all(|v| v.abs() <= 1e-12));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    // malformed expression: located error, exit 3
    let bad = write(dir.path(), "bad.toml", &FISH_FILE.replace("\"beta*x\"", "\"beta*(x\""));
    let o = funceq(&["solve", "--file", &bad]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr).to_string();
    assert!(err.contains("phi2") && err.contains("position 7"), "{err}");

    assert_eq!(funceq(&["solve", "--file", "/nonexistent/p.toml"]).status.code(), Some(3));
    assert_eq!(funceq(&["solve", "--model", "fish", "--n", "1"]).status.code(), Some(3));
    assert_eq!(funceq(&["solve", "--no-such-flag"]).status.code(), Some(3));
    assert_eq!(funceq(&["solve", "--param", "alpha"]).status.code(), Some(3));
    assert_eq!(funceq(&["solve", "--model", "fish", "--param", "gamma=1"]).status.code(), Some(3));

    // phi(1) != 1 violates the assumptions: a warning normally, exit 1 with --strict
    let skew = write(dir.path(), "skew.toml", &FISH_FILE.replace("phi  = \"x\"", "phi  = \"0.9*x\""));
    assert_eq!(funceq(&["solve", "--file", &skew, "--n", "8"]).status.code(), Some(0));
    assert_eq!(funceq(&["solve", "--file", &skew, "--n", "8", "--strict"]).status.code(), Some(1));
    assert_eq!(funceq(&["validate", "--file", &skew, "--strict", "--trials", "5"]).status.code(), Some(1));

    // phi = 1 and phi1 = x: every collocation row reads u(x_i) - u(x_i) = 0
    let singular = write(
        dir.path(),
        "singular.toml",
        "name = \"singular\"\nphi = \"1\"\nphi1 = \"x\"\nphi2 = \"0\"\nf = \"0\"\n",
    );
    let o = funceq(&["solve", "--file", &singular, "--n", "4"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn order_reports_second_order_for_smooth_model() {
    let o = funceq(&["order", "--model", "smooth", "--param", "alpha=0.3", "--base-n", "64", "--levels", "4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let orders: Vec<f64> = csv::Reader::from_reader(text.as_bytes())
        .records()
        .filter_map(|r| r.unwrap()[3].parse().ok())
        .collect();
    assert_eq!(orders.len(), 2);
    assert!(orders.iter().all(|o| (o - 2.0).abs() < 0.1), "{orders:?}");
}

#[test]
fn bench_single_size_has_no_fit() {
    let o = funceq(&["bench", "--model", "smooth", "--n", "64", "--repetitions", "1", "--format", "json"]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(doc["benchmark"]["fit"].is_null());
    assert_eq!(doc["benchmark"]["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn validate_reports_margin_and_operator_check() {
    let o = funceq(&["validate", "--model", "fish", "--param", "alpha=0.1", "--param", "beta=0.2", "--format", "json", "--seed", "3", "--trials", "20"]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((doc["validation"]["contraction_margin"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    assert_eq!(doc["config"]["contraction_check"]["seed"], 3);
    assert!(doc["config"]["contraction_check"]["worst_excess"].as_f64().unwrap() <= 1e-8);
}

/// Fixed column layout and number formatting; only elementary arithmetic enters these values.
#[test]
fn fish_solution_matches_golden_file() {
    let o = funceq(&["solve", "--model", "fish", "--param", "alpha=0.2", "--param", "beta=0.5", "--n", "8"]);
    assert!(o.status.success());
    let golden = include_str!("golden/fish_n8.csv");
    assert_eq!(stdout(&o), golden);
}

#[test]
fn documented_problem_files_load() {
    let docs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs");
    let fish = docs.join("fish.toml");
    let o = funceq(&["validate", "--file", fish.to_str().unwrap(), "--format", "json", "--trials", "10", "--strict"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((doc["validation"]["contraction_margin"].as_f64().unwrap() - 0.4).abs() < 1e-12);

    let raw = docs.join("fish-raw.toml");
    let o = funceq(&["solve", "--file", raw.to_str().unwrap(), "--n", "16", "--strict"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    for e in column(&text, "abs_error") {
        assert!(e <= 1e-12, "{e}");
    }
}
