use std::path::Path;
use std::process::{Command, Output};

use opspace::cli::format_tuple;
use opspace::spaces::{oh_level_norm, MatrixTuple};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn opspace(args: &[&str], input: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_opspace"));
    cmd.args(args).env_remove("OPSPACE_SEED");
    if let Some(p) = input {
        cmd.arg("--input").arg(p);
    }
    cmd.output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn oh_scalar_norm_is_euclidean() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "v.txt", "# (3, 4)\n2 1 1\n3\n4\n");
    let v = json(&opspace(&["norm", "--space", "oh", "--n", "2", "--level", "1x1"], Some(&p)));
    assert!((v["value"].as_f64().unwrap() - 5.0).abs() < 1e-12);
    let text = opspace(&["norm", "--space", "oh", "--format", "text"], Some(&p));
    assert!(String::from_utf8_lossy(&text.stdout).contains(": 5"));
}

#[test]
fn row_and_column_agree_on_adjoint_flipped_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = MatrixTuple::random(3, 2, 3, &mut ChaCha8Rng::seed_from_u64(3));
    let p = write(dir.path(), "a.txt", &format_tuple(&a));
    let q = write(dir.path(), "b.txt", &format_tuple(&a.adjoint_each()));
    let row = json(&opspace(&["norm", "--space", "row"], Some(&p)))["value"].as_f64().unwrap();
    let col = json(&opspace(&["norm", "--space", "column"], Some(&q)))["value"].as_f64().unwrap();
    assert!((row - col).abs() <= 1e-12 * row, "{row} vs {col}");
}

#[test]
fn malformed_input_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.txt", "1 2 2\n1 2\n3\n");
    let out = opspace(&["norm", "--space", "row"], Some(&p));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    let mismatch = opspace(&["norm", "--space", "row", "--level", "1x1"], Some(&write(dir.path(), "ok.txt", "1 2 2\n1 2\n3 4\n")));
    assert_eq!(mismatch.status.code(), Some(2));
}

#[test]
fn interp_linf_l1_unit_vector() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "e.txt", "3 1 1\n1\n0\n0\n");
    let v = json(&opspace(&["interp", "--couple", "linf-l1", "--theta", "0.5"], Some(&p)));
    let (lo, hi) = (v["lower"].as_f64().unwrap(), v["upper"].as_f64().unwrap());
    assert!(lo >= 0.97 && hi <= 1.03 && lo <= hi, "[{lo}, {hi}]");
}

#[test]
fn interp_rc_contains_oh_value() {
    let dir = tempfile::tempdir().unwrap();
    let a = MatrixTuple::random(2, 2, 2, &mut ChaCha8Rng::seed_from_u64(8));
    let oh = oh_level_norm(&a).unwrap();
    let p = write(dir.path(), "a.txt", &format_tuple(&a));
    let v = json(&opspace(&["interp", "--couple", "rc", "--theta", "0.5"], Some(&p)));
    let (lo, hi) = (v["lower"].as_f64().unwrap(), v["upper"].as_f64().unwrap());
    assert!(lo <= oh + 1e-6 && oh <= hi + 1e-9, "{lo} {oh} {hi}");
}

#[test]
fn interp_equal_couple_is_endpoint_norm() {
    let dir = tempfile::tempdir().unwrap();
    let a = MatrixTuple::random(2, 1, 2, &mut ChaCha8Rng::seed_from_u64(9));
    let p = write(dir.path(), "a.txt", &format_tuple(&a));
    let exact = json(&opspace(&["norm", "--space", "row"], Some(&p)))["value"].as_f64().unwrap();
    let v = json(&opspace(&["interp", "--couple", "equal", "--space", "row", "--theta", "0.3"], Some(&p)));
    for key in ["lower", "upper"] {
        let b = v[key].as_f64().unwrap();
        assert!((b - exact).abs() <= 0.01 * exact, "{key} {b} vs {exact}");
    }
}

#[test]
fn verify_ruan_writes_reports_and_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("r.json");
    let out = opspace(&["verify", "--suite", "ruan", "--seed", "7", "--output", out_path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 4);
    for r in reports {
        assert_eq!(r["schema"], 1);
        assert_eq!(r["check"], "ruan");
        assert_eq!(r["pass"], true);
        assert_eq!(r["seed"], 7);
    }
}

#[test]
fn verify_caps_and_selector_exit_2() {
    assert_eq!(opspace(&["verify", "--suite", "theorem3", "--n", "5", "--k", "4"], None).status.code(), Some(2));
    assert_eq!(opspace(&["verify", "--suite", "everything"], None).status.code(), Some(2));
    assert_eq!(opspace(&["verify", "--suite", "ruan", "--samples", "5000"], None).status.code(), Some(2));
    assert_eq!(opspace(&["verify", "--serial", "--parallel"], None).status.code(), Some(2));
}

#[test]
fn seed_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_opspace"))
        .args(["verify", "--suite", "opposite", "--deterministic"])
        .env("OPSPACE_SEED", "42")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["seed"], 42);
    assert_eq!(v[0]["runtime_ms"], 0);
}

#[test]
fn serial_and_parallel_reports_match() {
    let a = opspace(&["verify", "--suite", "haagerup-cs", "--seed", "3", "--deterministic", "--serial"], None);
    let b = opspace(&["verify", "--suite", "haagerup-cs", "--seed", "3", "--deterministic", "--parallel"], None);
    assert_eq!(json(&a), json(&b));
}

#[test]
fn csv_and_text_formats() {
    let csv = opspace(&["verify", "--suite", "opposite", "--format", "csv"], None);
    let body = String::from_utf8_lossy(&csv.stdout);
    let mut lines = body.lines();
    assert!(lines.next().unwrap().starts_with("check,pass,stretch,margin"));
    assert!(lines.next().unwrap().starts_with("opposite,true,false,"));
    let text = opspace(&["verify", "--suite", "opposite", "--format", "text"], None);
    assert!(String::from_utf8_lossy(&text.stdout).starts_with("PASS opposite"));
}
