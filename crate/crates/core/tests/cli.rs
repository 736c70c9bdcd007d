use std::path::PathBuf;
use std::process::{Command, Output};

use ncsos::json;
use ncsos::linalg::{identity, max_abs_diff};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn ncsos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncsos")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn certify_sos_fixture_exits_zero_with_certificate() {
    let out = ncsos(&["certify", fixture("sum_of_squares.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["outcome"], "sos");
    assert!(v["certificate"]["residual"].as_f64().unwrap() <= 1e-7);
    assert_eq!(v["input_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn certify_anticommutator_exits_one_with_witness() {
    let out = ncsos(&["certify", fixture("anticommutator.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["outcome"], "witness");
    assert!(v["witness"]["min_eig"].as_f64().unwrap() < 0.0);
}

#[test]
fn eval_of_one_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("one.json");
    std::fs::write(&p, r#"{"g":1,"mode":"monoid","coeff_dim":1,"terms":[{"word":"1","matrix":[[[1,0]]]}]}"#).unwrap();
    let out = ncsos(&["eval", p.to_str().unwrap(), "--at", fixture("pauli_at.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let m = json::parse_matrix(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(m, identity(2));
}

#[test]
fn out_flag_writes_file_and_spotcheck_accepts_it() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.json");
    let f = fixture("matrix_square.json");
    let out = ncsos(&["certify", f.to_str().unwrap(), "--out", cert.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let check = ncsos(&["spotcheck", f.to_str().unwrap(), cert.to_str().unwrap(), "--trials", "50"]);
    assert_eq!(check.status.code(), Some(0), "{}", String::from_utf8_lossy(&check.stdout));
    let v = stdout_json(&check);
    assert_eq!(v["consistent"], true);
    assert_eq!(v["hash_matches"], true);
    // The certificate does not belong to another polynomial.
    let other = ncsos(&["spotcheck", fixture("sum_of_squares.json").to_str().unwrap(), cert.to_str().unwrap()]);
    assert_eq!(other.status.code(), Some(65));
}

#[test]
fn decompose_and_witness_run_one_side() {
    let f = fixture("minus_one.json");
    let out = ncsos(&["decompose", f.to_str().unwrap(), "--max-iter", "2000"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["outcome"], "undecided");
    let out = ncsos(&["witness", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = ncsos(&["witness", fixture("one_plus_square.json").to_str().unwrap(), "--max-iter", "2000"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn extract_recovers_polynomial_from_fock_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let dump = ncsos(&["fock-dump", "--g", "1", "--l", "2"]);
    assert_eq!(dump.status.code(), Some(0));
    let v = stdout_json(&dump);
    assert_eq!(v["dim"], 3);
    let a = json::matrix_from_json(&serde_json::from_value(v["symmetrized"][0].clone()).unwrap(), "a").unwrap();
    // q = 1 + 2 x1 + 3 x1^2
    let e = identity(3) + &a * ncsos::linalg::C64::new(2.0, 0.0) + &a * &a * ncsos::linalg::C64::new(3.0, 0.0);
    let path = dir.path().join("e.json");
    std::fs::write(&path, json::to_pretty(&json::matrix_to_json(&e))).unwrap();
    let out = ncsos(&["extract", "--eval", path.to_str().unwrap(), "--g", "1", "--l", "2", "--k", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let q = json::parse_poly(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    for (w, c) in [("1", 1.0), ("x1", 2.0), ("x1 x1", 3.0)] {
        let word = ncsos::freewords::Word::parse(w, 1, ncsos::freewords::Mode::Monoid).unwrap();
        assert!((q.coeff(&word).unwrap()[(0, 0)].re - c).abs() < 1e-12);
    }
}

#[test]
fn group_fock_dump_lists_unitaries() {
    let v = stdout_json(&ncsos(&["fock-dump", "--g", "1", "--l", "1", "--group"]));
    assert_eq!(v["basis"], serde_json::json!(["1", "x1", "x1^-1"]));
    let u: Vec<_> = v["unitaries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| json::matrix_from_json(&serde_json::from_value(m.clone()).unwrap(), "u").unwrap())
        .collect();
    assert_eq!(u.len(), 2);
    assert!(max_abs_diff(&(&u[0] * &u[1]), &identity(3)) < 1e-15);
}

#[test]
fn malformed_input_reports_position_and_exits_65() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\"g\":1,\n\"mode\":\"monoid\",\n\"terms\":[,]}").unwrap();
    let out = ncsos(&["certify", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(65));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    std::fs::write(&p, r#"{"g":1,"mode":"monoid","coeff_dim":1,"terms":[{"word":"x1 x2","matrix":[[[1,0]]]}]}"#)
        .unwrap();
    let out = ncsos(&["certify", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(65));
    assert!(String::from_utf8_lossy(&out.stderr).contains("terms[0].word"));
}

#[test]
fn non_hermitian_input_exits_65_and_usage_errors_64() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("nh.json");
    std::fs::write(&p, r#"{"g":2,"mode":"monoid","coeff_dim":1,"terms":[{"word":"x1 x2","matrix":[[[1,0]]]}]}"#)
        .unwrap();
    assert_eq!(ncsos(&["certify", p.to_str().unwrap()]).status.code(), Some(65));
    assert_eq!(ncsos(&["certify"]).status.code(), Some(64));
    assert_eq!(ncsos(&["certify", "x.json", "--tol", "0"]).status.code(), Some(64));
    assert_eq!(ncsos(&["--version"]).status.code(), Some(0));
}
