use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dyadwave"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn two_point(dir: &Path) {
    fs::write(
        dir.join("two.json"),
        r#"{"n":2,"metric":{"kind":"matrix","lower":[1.0]},"weights":[1.0,1.0]}"#,
    )
    .unwrap();
}

#[test]
fn gen_then_build_dumps_cubes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "gen",
            "--kind",
            "euclidean",
            "--n",
            "20",
            "--seed",
            "3",
            "--out",
            "s.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let out = run(
        &[
            "build", "--space", "s.json", "--kmin", "-1", "--dump", "dump",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&out);
    assert_eq!(r["result"]["axioms"]["disjoint_cover"], Value::Bool(true));
    assert_eq!(r["result"]["wavelet_count"].as_u64().unwrap() + 1, 20);
    assert_eq!(r["spaces"][0]["sha256"].as_str().unwrap().len(), 64);
    let cubes: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("dump/cubes.json")).unwrap())
            .unwrap();
    assert_eq!(cubes["k_min"], Value::from(-1));
    let basis: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("dump/basis.json")).unwrap())
            .unwrap();
    assert_eq!(basis["wavelets"].as_array().unwrap().len(), 19);
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    run(
        &[
            "gen",
            "--kind",
            "tree",
            "--depth",
            "3",
            "--weights",
            "random",
            "--out",
            "t.json",
        ],
        dir.path(),
    );
    let a = run(&["build", "--space", "t.json"], dir.path());
    let b = run(&["build", "--space", "t.json"], dir.path());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn constant_signal_has_zero_hardy_norm() {
    let dir = tempfile::tempdir().unwrap();
    two_point(dir.path());
    fs::write(dir.path().join("c.csv"), "point_id,value\n0,3\n1,3\n").unwrap();
    let out = run(
        &[
            "norms", "--space", "two.json", "--signal", "c.csv", "--p", "2",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert!(r["result"]["norms"][0]["hp_norm"].as_f64().unwrap() < 1e-14);
    assert!(r["spaces"][0]["doubling_constant"].as_f64().is_some());
}

#[test]
fn analyze_reports_sandwich() {
    let dir = tempfile::tempdir().unwrap();
    two_point(dir.path());
    fs::write(dir.path().join("f.csv"), "point_id,value\n0,-1\n1,1\n").unwrap();
    let out = run(
        &[
            "analyze", "--space", "two.json", "--signal", "f.csv", "--p-grid", "1,2,3", "--N", "1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let rows = r["result"]["norms"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let c = r["result"]["wavelet_coefficients"][0]["value"]
        .as_f64()
        .unwrap();
    assert!((c.abs() - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn product_norms_and_decomposition() {
    let dir = tempfile::tempdir().unwrap();
    two_point(dir.path());
    fs::write(
        dir.path().join("pf.csv"),
        "x1_id,x2_id,value\n0,0,0.5\n0,1,-0.5\n1,0,-0.5\n1,1,0.5\n",
    )
    .unwrap();
    let out = run(
        &[
            "norms",
            "--space",
            "two.json",
            "--space2",
            "two.json",
            "--signal",
            "pf.csv",
            "--p-grid",
            "1,0.6666666666666666",
            "--mode",
            "exact",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&out);
    for row in r["result"]["norms"].as_array().unwrap() {
        assert!((row["hp_norm"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert!((row["cmo_norm"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
    let out = run(
        &[
            "czd",
            "--space",
            "two.json",
            "--space2",
            "two.json",
            "--signal",
            "pf.csv",
            "--alpha",
            "0.5",
            "--p",
            "1",
            "--p1",
            "2",
            "--p2",
            "0.6666666666666666",
            "--signals-out",
            "parts",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let cb = r["result"]["c_b"].as_f64().unwrap();
    assert!((cb - 0.5f64.powf(1.0 / 3.0)).abs() < 1e-10);
    assert!(dir.path().join("parts/b.csv").exists());

    let out = run(
        &[
            "czd", "--space", "two.json", "--space2", "two.json", "--signal", "pf.csv", "--alpha",
            "10",
        ],
        dir.path(),
    );
    let r = json(&out);
    assert_eq!(r["result"]["c_b"].as_f64(), Some(0.0));
}

#[test]
fn verify_on_small_space_passes() {
    let dir = tempfile::tempdir().unwrap();
    two_point(dir.path());
    let out = run(&["verify", "--space", "two.json"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(json(&out)["result"]["all_pass"], Value::Bool(true));
}

#[test]
fn usage_and_io_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&["build", "--space", "missing.json"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(2));
    two_point(dir.path());
    fs::write(dir.path().join("bad.csv"), "point_id,value\n0,1\n").unwrap();
    let out = run(
        &["norms", "--space", "two.json", "--signal", "bad.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing value"));
}
