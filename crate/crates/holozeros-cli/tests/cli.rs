use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"{
  "tau": [0.0, 1.0],
  "grid": 12,
  "ensemble": {
    "n": 4,
    "kind": "fiber-haar",
    "measure": { "kind": "uniform-disk", "center": [0.5, 0.5], "radius": 0.35 },
    "quadrature": 24,
    "seed": 5
  },
  "sweep": {
    "ns": [4, 6],
    "samples": 100,
    "sigma": { "kind": "rect", "a0": 0.0, "a1": 0.5, "b0": 0.0, "b1": 1.0 },
    "delta": 0.15,
    "pairs": 5
  }
}"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), CONFIG).unwrap();
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holozeros"))
        .current_dir(dir)
        .args(["--out-dir", "out", "--threads", "1"])
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn equilibrium_then_report() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["equilibrium", "-c", "c.json"]);
    let eq = json(&d.join("out/equilibrium.json"));
    assert!(eq["e0"].as_f64().unwrap().is_finite());
    let weights = std::fs::read_to_string(d.join("out/equilibrium_weights.csv")).unwrap();
    assert_eq!(weights.lines().count(), 144 + 1);

    ok(d, &["report", "-c", "c.json"]);
    let rep = json(&d.join("out/report.json"));
    let e0 = rep["equilibrium"]["e0"].as_f64().unwrap();
    let again = rep["equilibrium"]["e0_recomputed"].as_f64().unwrap();
    assert!((e0 - again).abs() < 1e-9);
    assert!(rep["equilibrium"]["certificate_residual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn samples_are_reproducible_and_satisfy_abel() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["--seed", "11", "sample", "-c", "c.json", "--count", "20"]);
    let first = std::fs::read_to_string(d.join("out/configurations.csv")).unwrap();
    assert_eq!(first.lines().count(), 20);
    ok(d, &["report", "-c", "c.json"]);
    let rep = json(&d.join("out/report.json"));
    assert!(rep["configurations"]["abel_residual"].as_f64().unwrap() < 1e-8);

    ok(d, &["--seed", "11", "sample", "-c", "c.json", "--count", "20"]);
    let second = std::fs::read_to_string(d.join("out/configurations.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn zeros_of_one_section() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["zeros", "-c", "c.json"]);
    let rows = std::fs::read_to_string(d.join("out/zeros.csv")).unwrap();
    // header plus one row per zero
    assert_eq!(rows.lines().count(), 5);
}

#[test]
fn identity_check_writes_report() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["identity-check", "-c", "c.json"]);
    let rep = json(&d.join("out/identity_report.json"));
    assert!(rep["theta"]["quasi_periodicity"].as_f64().unwrap() < 1e-10);
    assert_eq!(rep["zero_finder"]["wrong_count"].as_u64(), Some(0));
    assert!(rep["bosonization"]["genus_one"].as_f64().unwrap() < 1e-6);
}

#[test]
fn jpc_check_writes_tables() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["jpc-check", "-c", "c.json", "--samples", "3000"]);
    let rep = json(&d.join("out/jpc_report.json"));
    assert!(rep["fsh_pl_consistency"].as_f64().unwrap().is_finite());
    assert!(rep["permutation_symmetry"].as_f64().unwrap() < 1e-9);
    let mc = rep["mc"].as_array().unwrap();
    assert_eq!(mc.len(), 3);
    for m in mc {
        let table = m["table"].as_str().unwrap();
        assert!(d.join("out").join(table).exists());
    }
}

#[test]
fn ldp_sweep_writes_tables() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["ldp-sweep", "-c", "c.json"]);
    let sweep = json(&d.join("out/ldp_sweep.json"));
    assert_eq!(sweep["rows"].as_array().unwrap().len(), 2);
    assert!(d.join("out/ldp_sweep.csv").exists());
    let cons = json(&d.join("out/rate_consistency.json"));
    assert_eq!(cons.as_array().unwrap().len(), 2);
}

#[test]
fn bad_config_is_an_error() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(d.join("bad.json"), CONFIG.replace("\"n\": 4", "\"n\": 0")).unwrap();
    let out = run(d, &["equilibrium", "-c", "bad.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("degree"));
    let out = run(d, &["report", "-c", "c.json"]);
    assert!(!out.status.success());
}
