use std::io::Write;
use std::process::Command;

use serde_json::Value;

fn lossrank(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lossrank")).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn csv_file(contents: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

fn path_str(f: &tempfile::NamedTempFile) -> &str {
    f.path().to_str().unwrap()
}

fn correlated_csv() -> String {
    // deterministic pseudo-random design with three active covariates
    let mut s = String::from("a,b,c,d,e,y\n");
    let mut state: u64 = 12345;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    for _ in 0..40 {
        let x: Vec<f64> = (0..5).map(|_| next()).collect();
        let y = 3.0 * x[0] - 2.0 * x[2] + 1.5 * x[3] + 0.3 * next();
        s += &format!("{},{},{},{},{},{}\n", x[0], x[1], x[2], x[3], x[4], y);
    }
    s
}

#[test]
fn exact_linear_relation_recovers_slope() {
    let f = csv_file("x,y\n1,2\n2,4\n4,8\n7,14\n11,22\n");
    let (code, out, err) = lossrank(&["select", path_str(&f), "--output", "json"]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    let lr = v["chosen"].as_array().unwrap().iter().find(|c| c["criterion"] == "LR").unwrap();
    assert_eq!(lr["names"], serde_json::json!(["x"]));
    let b = lr["coefficients"][0].as_f64().unwrap();
    assert!((b - 2.0).abs() < 1e-10, "{b}");
}

#[test]
fn table_lists_names() {
    let f = csv_file(&correlated_csv());
    let (code, out, _) = lossrank(&["select", path_str(&f), "--criteria", "LR,BIC"]);
    assert_eq!(code, 0);
    assert!(out.contains("criterion"));
    assert!(out.lines().any(|l| l.trim_start().starts_with("LR ") && l.contains("a,c,d")), "{out}");
}

#[test]
fn response_flag_selects_column() {
    let f = csv_file("y,x\n2,1\n4.1,2\n7.9,4\n14,7\n22.2,11\n");
    let (code, out, _) = lossrank(&["select", path_str(&f), "--response", "y", "--criteria", "BIC", "--output", "json"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["chosen"][0]["names"], serde_json::json!(["x"]));
}

#[test]
fn malformed_cell_is_a_data_error() {
    let f = csv_file("x,y\n1,2\n2,zz\n3,6\n");
    let (code, _, err) = lossrank(&["select", path_str(&f)]);
    assert_eq!(code, 2);
    assert!(err.contains("row 3") && err.contains("column y") && err.contains("zz"), "{err}");
}

#[test]
fn missing_input_is_a_data_error() {
    let (code, _, err) = lossrank(&["select", "/nonexistent/input.csv"]);
    assert_eq!(code, 2);
    assert!(err.contains("not found"), "{err}");
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(lossrank(&["bogus"]).0, 1);
    assert_eq!(lossrank(&["select"]).0, 1);
    assert_eq!(lossrank(&["simulate", "--reps", "0"]).0, 1);
    assert_eq!(lossrank(&["simulate", "--criteria", "AIC"]).0, 1);
    let f = csv_file("x,y\n1,2\n2,4\n");
    assert_eq!(lossrank(&["select", path_str(&f), "--lambda-grid", "1,0.5,10"]).0, 1);
    assert_eq!(lossrank(&["--help"]).0, 0);
}

#[test]
fn orthonormal_path_breakpoints() {
    // columns already centered with unit sample variance, so standardizing
    // leaves them unchanged; x1'y = 4, x2'y = 2
    let r3 = 3f64.sqrt();
    let a = [1.0, -1.0, 0.0];
    let b = [1.0 / r3, 1.0 / r3, -2.0 / r3];
    let mut s = String::from("x1,x2,y\n");
    for i in 0..3 {
        s += &format!("{},{},{}\n", a[i], b[i], 2.0 * a[i] + b[i]);
    }
    let f = csv_file(&s);
    let (code, out, _) = lossrank(&["path", path_str(&f), "--output", "csv"]);
    assert_eq!(code, 0);
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    let lambdas: Vec<f64> = rdr.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
    assert_eq!(lambdas.len(), 2);
    assert!((lambdas[0] - 8.0).abs() < 1e-9 && (lambdas[1] - 4.0).abs() < 1e-9, "{lambdas:?}");
}

#[test]
fn single_covariate_path() {
    let f = csv_file("x,y\n1,1\n2,3\n3,2\n4,5\n");
    let (code, out, _) = lossrank(&["path", path_str(&f), "--output", "json"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    let bps = v["breakpoints"].as_array().unwrap();
    assert_eq!(bps.len(), 1);
    // standardized x = (-1.5, -0.5, 0.5, 1.5) / sd, centered y = (-1.75, 0.25, -0.75, 2.25)
    let sd = (5.0f64 / 3.0).sqrt();
    let xty = (-1.5 * -1.75 + -0.5 * 0.25 + 0.5 * -0.75 + 1.5 * 2.25) / sd;
    assert!((bps[0]["lambda"].as_f64().unwrap() - 2.0 * xty).abs() < 1e-12);
    assert_eq!(bps[0]["lambda"], v["lambda_max"]);
}

#[test]
fn traces_cover_the_grid() {
    let f = csv_file(&correlated_csv());
    let (code, out, _) = lossrank(&["path", path_str(&f), "--traces", "--lambda-grid", "0.01,10,50", "--output", "csv"]);
    assert_eq!(code, 0);
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["lambda", "active_size", "LR", "BIC", "GCV", "BIC_TILDE"]);
    assert_eq!(rdr.records().count(), 50);
}

#[test]
fn csv_and_json_agree() {
    let f = csv_file(&correlated_csv());
    let (_, json, _) = lossrank(&["select", path_str(&f), "--output", "json"]);
    let (_, csv_out, _) = lossrank(&["select", path_str(&f), "--output", "csv"]);
    let v: Value = serde_json::from_str(&json).unwrap();
    let mut rdr = csv::Reader::from_reader(csv_out.as_bytes());
    let chosen: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).filter(|r| &r[0] == "chosen").collect();
    let jchosen = v["chosen"].as_array().unwrap();
    assert_eq!(chosen.len(), jchosen.len());
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
    for (r, j) in chosen.iter().zip(jchosen) {
        assert_eq!(&r[1], j["criterion"].as_str().unwrap());
        assert!(close(r[6].parse().unwrap(), j["rho"].as_f64().unwrap()));
        assert!(close(r[7].parse().unwrap(), j["score"].as_f64().unwrap()));
        assert!(close(r[9].parse().unwrap(), j["intercept"].as_f64().unwrap()));
        let coefs: Vec<f64> = r[10].split(';').map(|c| c.parse().unwrap()).collect();
        for (a, b) in coefs.iter().zip(j["coefficients"].as_array().unwrap()) {
            assert!(close(*a, b.as_f64().unwrap()));
        }
    }
}

#[test]
fn select_is_deterministic() {
    let f = csv_file(&correlated_csv());
    let a = lossrank(&["select", path_str(&f), "--output", "json"]);
    let b = lossrank(&["select", path_str(&f), "--output", "json"]);
    assert_eq!(a, b);
}

fn tally_row(out: &str, method: &str) -> csv::StringRecord {
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    rdr.records().map(Result::unwrap).find(|r| &r[3] == method).unwrap()
}

#[test]
fn noiseless_single_replication() {
    let (code, out, _) = lossrank(&["simulate", "--reps", "1", "--sigma", "0", "--output", "csv"]);
    assert_eq!(code, 0);
    let lr = tally_row(&out, "LR");
    assert_eq!(&lr[5], "100");
    assert_eq!(&lr[8], "1");
}

#[test]
fn example1_table_cell() {
    let args = ["simulate", "--example1", "--sigma", "1", "--n", "100", "--reps", "100", "--seed", "1", "--output", "csv"];
    let (code, out, _) = lossrank(&args);
    assert_eq!(code, 0);
    let correct: f64 = tally_row(&out, "LR")[5].parse().unwrap();
    assert!((87.0..=100.0).contains(&correct), "{correct}");
    let (_, again, _) = lossrank(&args);
    assert_eq!(out, again);
    let (_, one_worker, _) = lossrank(&[&args[..], &["--workers", "1"]].concat());
    assert_eq!(out, one_worker);
}

#[test]
fn example2_large_n_cell() {
    let (code, out, _) = lossrank(&["simulate", "--example2", "--sigma", "1", "--n", "500", "--reps", "25", "--criteria", "LR", "--output", "csv"]);
    assert_eq!(code, 0);
    let zeros: f64 = tally_row(&out, "LR")[7].parse().unwrap();
    assert!((289.0..=290.0).contains(&zeros), "{zeros}");
}

#[test]
fn simulate_table_layout() {
    let (code, out, _) = lossrank(&["simulate", "--reps", "2", "--n", "40"]);
    assert_eq!(code, 0);
    let header = out.lines().next().unwrap();
    for col in ["sigma", "n", "Method", "Under-fitted(%)", "Correctly fitted(%)", "Overfitted(%)", "Ave. No. of zeros"] {
        assert!(header.contains(col), "{header}");
    }
}

#[test]
fn demo_prostate_without_data() {
    let (code, _, err) = lossrank(&["demo-prostate", "--data", "/nonexistent/prostate.csv"]);
    assert_eq!(code, 2);
    assert!(err.contains("data file not found"), "{err}");
}

#[test]
fn demo_prostate_reports_mismatch() {
    // right shape, wrong data: the demo runs but its model check fails
    let mut s = String::from("lcavol,lweight,age,lbph,svi,lcp,gleason,pgg45,lpsa\n");
    for i in 0..30 {
        let v: Vec<f64> = (0..8).map(|j| (((i * 31 + j * 17) % 23) as f64).sin()).collect();
        let y = v[0] + 0.1 * ((i % 7) as f64);
        s += &format!("{},{}\n", v.iter().map(f64::to_string).collect::<Vec<_>>().join(","), y);
    }
    let f = csv_file(&s);
    let (code, out, err) = lossrank(&["demo-prostate", "--data", path_str(&f)]);
    assert!(code == 0 || code == 3, "{err}");
    assert!(out.contains("BIC"));
    if code == 3 {
        assert!(err.contains("prostate check failed"), "{err}");
    }
}
