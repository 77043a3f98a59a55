use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_occupancy")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn coupon_example() {
    let out = run(&["coupon", "--alpha", "0.5,0.3,0.2", "--capacity", "3", "--beta", "2", "--xi", "0.55", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = json(&out);
    assert!((doc["J"].as_f64().unwrap() - 0.18).abs() < 0.01);
    assert!(doc["residual"].as_f64().unwrap() <= 1e-8);
    for key in ["rho", "C", "W", "xi"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn classical_at_the_mean_has_zero_rate() {
    let out = run(&["classical", "--omega0", "0.367879", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(json(&out)["J"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn infeasible_constraints_exit_two() {
    let out = run(&["rate", "--alpha", "0,1,0", "--omega", "0.9,0.05,0.05", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("monotonicity"), "{}", stderr(&out));
    let out = run(&["rate", "--omega", "0.05,0.05,0.9", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("conservation"), "{}", stderr(&out));
    let out = run(&["path", "--omega", "0.05,0.05,0.9", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_input_exits_one() {
    let out = run(&["rate", "--omega", "0.3,0.3,0.3", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("omega") && stderr(&out).contains("0.9"), "{}", stderr(&out));
    let out = run(&["rate", "--omega", "0.5,x", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("`x`"));
    assert_eq!(run(&["rate", "--nonsense"]).status.code(), Some(1));
    assert_eq!(run(&["classical", "--beta", "1"]).status.code(), Some(1));
}

#[test]
fn rate_reports_residuals_and_matches_oracle() {
    let args = ["--alpha", "0.3,0.4,0.3,0", "--omega", "0.1,0.3,0.3,0.3", "--beta", "1.2"];
    let rate = run(&[&["rate"], &args[..]].concat());
    assert_eq!(rate.status.code(), Some(0), "{}", stderr(&rate));
    let doc = json(&rate);
    assert!(doc["residuals"]["constraint"].as_f64().unwrap() <= 1e-8);
    assert!(doc["residuals"]["primal"].as_f64().unwrap() <= 1e-8);
    let oracle = run(&[&["oracle"], &args[..]].concat());
    assert_eq!(oracle.status.code(), Some(0), "{}", stderr(&oracle));
    let o = json(&oracle)["J"].as_f64().unwrap();
    assert!((doc["J"].as_f64().unwrap() - o).abs() < 1e-5);
}

#[test]
fn overflow_reports_residuals() {
    let out = run(&["overflow", "--capacity", "2", "--beta", "3", "--eta", "1.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = json(&out);
    let r = &doc["residuals"];
    let all: Vec<f64> = r["equations"].as_array().unwrap().iter().chain(r["reduced"].as_array().unwrap()).map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(all.len(), 5);
    assert!(all.iter().all(|v| v.abs() <= 1e-8));
    assert!((doc["zeta"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn seventeen_significant_digits() {
    let out = run(&["classical", "--omega0", "0.15", "--beta", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.trim_start().starts_with("\"J\"")).unwrap();
    let mantissa = line.split(':').nth(1).unwrap().trim().trim_end_matches(',').split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{line}");
}

fn check_path_csv(text: &str, grid: usize, cap: usize) {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 2 * (cap + 2) + cap + 1);
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), grid);
    for r in &rows {
        let g: f64 = r[1..cap + 3].iter().sum();
        assert!((g - 1.0).abs() <= 1e-9, "gamma row sum {g}");
    }
    let psi0 = 1 + 2 * (cap + 2);
    for col in psi0..psi0 + cap + 1 {
        for w in rows.windows(2) {
            assert!(w[1][col] <= w[0][col] + 1e-12, "psi column {col} increases");
        }
    }
}

#[test]
fn path_csv_shape() {
    let out = run(&["path", "--omega", "0.1,0.2,0.25,0.45", "--beta", "2.5", "--grid", "41"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    check_path_csv(&String::from_utf8(out.stdout).unwrap(), 41, 2);

    let out = run(&["path", "--alpha", "0.3,0.4,0.3,0", "--omega", "0.1,0.3,0.3,0.3", "--beta", "1.2", "--grid", "17"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    check_path_csv(&String::from_utf8(out.stdout).unwrap(), 17, 2);

    let out = run(&["path", "--alpha", "0.5,0.3,0.2,0,0", "--beta", "2", "--grid", "9"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    check_path_csv(&String::from_utf8(out.stdout).unwrap(), 9, 3);
}

#[test]
fn flags_override_config_file() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "# partial coupon collection\nalpha = 0.5,0.3,0.2\ncapacity = 3\nbeta = 1.5\nxi = 0.55").unwrap();
    let path = f.path().to_str().unwrap();
    let out = run(&["coupon", "--config", path, "--beta", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = json(&out);
    assert_eq!(doc["problem"]["beta"].as_f64(), Some(2.0));
    assert_eq!(doc["problem"]["capacity"].as_u64(), Some(3));
}

#[test]
fn config_errors_name_the_line() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "beta = 2\nomega = 0.5,oops").unwrap();
    let out = run(&["rate", "--config", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2") && stderr(&out).contains("oops"), "{}", stderr(&out));
}

#[test]
fn emitted_json_round_trips_as_config() {
    for args in [
        vec!["rate", "--alpha", "0.3,0.4,0.3,0", "--omega", "0.1,0.3,0.3,0.3", "--beta", "1.2"],
        vec!["simulate", "--n", "20,40", "--beta", "1.5", "--trials", "500", "--seed", "7", "--omega0", "0.3"],
        vec!["overflow", "--capacity", "1", "--beta", "0.7", "--eta", "0.4"],
    ] {
        let first = run(&args);
        assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(&first.stdout).unwrap();
        let second = run(&[args[0], "--config", f.path().to_str().unwrap()]);
        assert_eq!(second.status.code(), Some(0), "{}", stderr(&second));
        assert_eq!(json(&first)["problem"], json(&second)["problem"]);
        assert_eq!(first.stdout, second.stdout);
    }
}

#[test]
fn simulate_reports_exponents() {
    let out = run(&["simulate", "--n", "30", "--beta", "1", "--trials", "2000", "--omega0", "0.45"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = json(&out);
    let r = &doc["runs"][0];
    assert_eq!(r["throws"].as_u64(), Some(30));
    let occ: f64 = r["mean_occupancy"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((occ - 1.0).abs() < 1e-12);
    assert!(r["hits"].as_u64().unwrap() > 0);
    assert!(doc["J"].as_f64().unwrap() > 0.0);
}

#[test]
fn csv_format_for_scalar_results() {
    let out = run(&["classical", "--omega0", "0.15", "--beta", "3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("field,value\n"));
    assert!(text.lines().any(|l| l.starts_with("J,9.16515")), "{text}");
}

#[test]
fn verify_prints_one_line_per_suite() {
    let out = run(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
}
