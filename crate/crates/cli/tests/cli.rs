use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use matrange::json::{decode_matrix, decode_tuple, MatrixJson, TupleJson};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_matrange"));
    c.env_remove("MATRANGE_SEED");
    c
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const SQUARE: &str = r#"[{"dim":2,"re":[[1,0],[0,0]]},{"dim":2,"re":[[0,0],[0,1]]}]"#;
const MODEL: &str = r#"{"head":[{"dim":1,"re":[[3]]},{"dim":1,"re":[[3]]}],
  "body":[{"dim":2,"re":[[1,0],[0,0]]},{"dim":2,"re":[[0,0],[0,1]]}],"level":3}"#;
const INSIDE: &str = r#"[{"dim":1,"re":[[0.5]]},{"dim":1,"re":[[0.5]]}]"#;
const OUTSIDE: &str = r#"[{"dim":1,"re":[[0.9]]},{"dim":1,"re":[[0.9]]}]"#;

struct Files {
    _dir: tempfile::TempDir,
    a: String,
    model: String,
    inside: String,
    outside: String,
}

fn files() -> Files {
    let dir = tempfile::tempdir().unwrap();
    let s = |p: PathBuf| p.to_str().unwrap().to_string();
    Files {
        a: s(write(dir.path(), "a.json", SQUARE)),
        model: s(write(dir.path(), "m.json", MODEL)),
        inside: s(write(dir.path(), "in.json", INSIDE)),
        outside: s(write(dir.path(), "out.json", OUTSIDE)),
        _dir: dir,
    }
}

#[test]
fn member_exit_codes_follow_verdict() {
    let f = files();
    let yes = run(&["member", "--A", &f.a, "--B", &f.inside]);
    assert_eq!(yes.status.code(), Some(0));
    assert_eq!(json(&yes)["status"], "Member");
    let no = run(&["member", "--A", &f.a, "--B", &f.outside]);
    assert_eq!(no.status.code(), Some(1));
    let v = json(&no);
    assert_eq!(v["status"], "NotMember");
    assert!(v["witness"]["gap"].as_f64().unwrap() > 0.0);
}

#[test]
fn model_membership_ignores_head() {
    let f = files();
    // The head (3, 3) is far outside the body range and must not matter.
    let dir = tempfile::tempdir().unwrap();
    let head_point = write(
        dir.path(),
        "h.json",
        r#"[{"dim":1,"re":[[3]]},{"dim":1,"re":[[3]]}]"#,
    );
    let out = run(&[
        "member",
        "--model",
        &f.model,
        "--B",
        head_point.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["member", "--model", &f.model, "--B", &f.inside]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn witness_search_and_evaluation() {
    let f = files();
    let out = run(&["witness", "--A", &f.a, "--B", &f.outside, "--seed", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["found"], true);
    let r = serde_json::to_string(&v["witness"]["r"]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let rp = write(dir.path(), "r.json", &r);
    let eval = run(&[
        "witness",
        "--A",
        &f.a,
        "--B",
        &f.outside,
        "--R",
        rp.to_str().unwrap(),
    ]);
    assert_eq!(eval.status.code(), Some(1));
    assert_eq!(json(&eval)["holds"], false);
    let eval = run(&[
        "witness",
        "--A",
        &f.a,
        "--B",
        &f.inside,
        "--R",
        rp.to_str().unwrap(),
    ]);
    assert_eq!(eval.status.code(), Some(0));
}

#[test]
fn dimension_errors_name_the_field() {
    let f = files();
    let out = run(&["member", "--A", &f.a, "--B", &f.inside, "--q", "2"]);
    assert_eq!(out.status.code(), Some(65));
    assert!(String::from_utf8_lossy(&out.stderr).contains("B[0].dim"));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"[{"dim":2,"re":[[1,0]]},{"dim":2,"re":[[0,0],[0,1]]}]"#,
    );
    let out = run(&["member", "--A", bad.to_str().unwrap(), "--B", &f.inside]);
    assert_eq!(out.status.code(), Some(65));
    assert!(String::from_utf8_lossy(&out.stderr).contains("A[0]"));
    let skew = write(
        dir.path(),
        "skew.json",
        r#"[{"dim":2,"re":[[1,1],[0,0]]},{"dim":2,"re":[[0,0],[0,1]]}]"#,
    );
    let out = run(&["member", "--A", skew.to_str().unwrap(), "--B", &f.inside]);
    assert_eq!(out.status.code(), Some(65));
}

#[test]
fn malformed_and_missing_inputs() {
    let f = files();
    let dir = tempfile::tempdir().unwrap();
    let junk = write(dir.path(), "junk.json", "[{\"dim\":");
    let out = run(&["member", "--A", junk.to_str().unwrap(), "--B", &f.inside]);
    assert_eq!(out.status.code(), Some(64));
    let out = run(&["member", "--A", "/nonexistent/a.json", "--B", &f.inside]);
    assert_eq!(out.status.code(), Some(66));
    let out = run(&["member", "--B", &f.inside]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn dilate_reports_small_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(
        dir.path(),
        "t.json",
        r#"[{"dim":2,"re":[[0.2,0.1],[0.1,0.3]]},{"dim":2,"re":[[0.3,0],[0,0.1]]}]"#,
    );
    let s = write(dir.path(), "s.json", r#"{"vertices":[[0,0],[1,0],[0,1]]}"#);
    let out = run(&[
        "dilate",
        "--T",
        t.to_str().unwrap(),
        "--simplex",
        s.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["dilation_residual"].as_f64().unwrap() <= 1e-8);
    assert!(v["povm_residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(v["povm"].as_array().unwrap().len(), 3);
    let outside = write(
        dir.path(),
        "o.json",
        r#"[{"dim":1,"re":[[0.8]]},{"dim":1,"re":[[0.8]]}]"#,
    );
    let out = run(&[
        "dilate",
        "--T",
        outside.to_str().unwrap(),
        "--simplex",
        s.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(65));
}

#[test]
fn perturb_and_essential_wiring() {
    let f = files();
    let out = run(&["perturb", "--model", &f.model, "--samples", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verification"]["passed"], true);
    let k: TupleJson = serde_json::from_value(v["k"].clone()).unwrap();
    assert_eq!(decode_tuple(&k, "k").unwrap().len(), 2);
    let out = run(&["essential", "--model", &f.model]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["interior"]["independent"], false);
}

#[test]
fn lambda_realizes_in_model() {
    let f = files();
    let out = run(&["lambda", "--model", &f.model, "--B", &f.inside, "--p", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["residual"].as_f64().unwrap() < 1e-7);
}

#[test]
fn emitted_matrices_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(
        dir.path(),
        "t.json",
        r#"[{"dim":1,"re":[[0.2]]},{"dim":1,"re":[[0.3]]}]"#,
    );
    let s = write(dir.path(), "s.json", r#"{"vertices":[[0,0],[1,0],[0,1]]}"#);
    let out = run(&[
        "dilate",
        "--T",
        t.to_str().unwrap(),
        "--simplex",
        s.to_str().unwrap(),
    ]);
    let v = json(&out);
    let x: MatrixJson = serde_json::from_value(v["x"].clone()).unwrap();
    let decoded = decode_matrix(&x, "x").unwrap();
    let again = serde_json::to_value(matrange::json::encode_matrix(&decoded)).unwrap();
    assert_eq!(again, v["x"]);
}

#[test]
fn seed_from_environment_matches_flag() {
    let f = files();
    let flag = run(&["witness", "--A", &f.a, "--B", &f.outside, "--seed", "11"]);
    let env = bin()
        .args(["witness", "--A", &f.a, "--B", &f.outside])
        .env("MATRANGE_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(flag.stdout, env.stdout);
}

#[test]
fn quick_suite_is_deterministic() {
    let a = run(&["theoremsuite", "--seed", "5", "--quick"]);
    let b = run(&["theoremsuite", "--seed", "5", "--quick"]);
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["criteria"].as_array().unwrap().len(), 7);
    let report = run(&["report", "--seed", "5", "--quick"]);
    assert!(!json(&report)["polylines"].as_array().unwrap().is_empty());
}
