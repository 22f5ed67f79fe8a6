use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn gqms(args: &[&str]) -> Output {
    gqms_env(args, &[])
}

fn gqms_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gqms"));
    cmd.args(args).env_remove("GQMS_TOL").env("RUST_LOG", "error");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Scalar (s = 1) square with `entry(i, j)` in each cell.
fn scalar_square(n: usize, entry: impl Fn(usize, usize) -> f64) -> Value {
    let blocks: Vec<Vec<Value>> = (0..n)
        .map(|i| (0..n).map(|j| json!({"rows": 1, "cols": 1, "data": [[entry(i, j), 0.0]]})).collect())
        .collect();
    json!({"n": n, "s": 1, "blocks": blocks})
}

fn write_json(dir: &TempDir, name: &str, v: &Value) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    path_str(&p).to_string()
}

#[test]
fn commutant_reports_cycle_counts() {
    let o = gqms(&["commutant", "--graph", "cycle:7"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["spectral_dimension"], 13);
    assert_eq!(v["nullspace_dimension"], 13);
    assert_eq!(v["formula_dimension"], 13);
    assert_eq!(v["components"], 1);
    assert_eq!(v["gqms_parameters"], 12);

    let v = stdout_json(&gqms(&["commutant", "--graph", "union:cycle:3+cycle:3"]));
    assert_eq!(v["spectral_dimension"], 20);
    assert_eq!(v["formula_dimension"], Value::Null);
    assert_eq!(v["components"], 2);
    assert_eq!(v["predicted_parameters"], 18);
}

#[test]
fn verify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let perm = write_json(&dir, "perm.json", &scalar_square(4, |i, j| ((i + 1) % 4 == j) as u8 as f64));
    let o = gqms(&["verify", "--in", &perm, "--graph", "cycle:4"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["pencil_route"], true);

    let bad = write_json(&dir, "bad.json", &scalar_square(4, |i, j| if i == j { 1.01 } else { 0.0 }));
    let o = gqms(&["verify", "--in", &bad]);
    assert_eq!(code(&o), 1);
    assert!(stdout_json(&o)["magic"]["row_residuals"][0].as_f64().unwrap() > 1e-3);

    assert_eq!(code(&gqms(&["verify", "--in", &perm, "--graph", "cycle:5"])), 2);
    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{not json").unwrap();
    assert_eq!(code(&gqms(&["verify", "--in", path_str(&garbage)])), 2);
    assert_eq!(code(&gqms(&["verify"])), 2);
}

#[test]
fn tolerance_comes_from_flag_then_environment() {
    let dir = TempDir::new().unwrap();
    let near = write_json(&dir, "near.json", &scalar_square(3, |i, j| if i == j { 1.0 + 1e-7 } else { 0.0 }));
    assert_eq!(code(&gqms(&["verify", "--in", &near])), 1);
    assert_eq!(code(&gqms_env(&["verify", "--in", &near], &[("GQMS_TOL", "1e-6")])), 0);
    assert_eq!(code(&gqms_env(&["verify", "--in", &near, "--tol", "1e-9"], &[("GQMS_TOL", "1e-6")])), 1);
    assert_eq!(code(&gqms_env(&["verify", "--in", &near], &[("GQMS_TOL", "tiny")])), 2);
}

#[test]
fn random_and_average_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = gqms(&["random", "--n", "4", "--s", "2", "--seed", "7"]);
    let b = gqms(&["random", "--n", "4", "--s", "2", "--seed", "7"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let input = dir.path().join("a.json");
    std::fs::write(&input, &a.stdout).unwrap();
    let out = dir.path().join("b.json");
    let o = gqms(&["average", "--in", path_str(&input), "--group", "c4", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert!(v["commutation_residual_before"].as_f64().unwrap() > 1e-3);
    assert!(v["commutation_residual_after"].as_f64().unwrap() < 1e-12);
    assert_eq!(code(&gqms(&["verify", "--in", path_str(&out), "--graph", "cycle:4"])), 0);
    let first = std::fs::read(&out).unwrap();
    gqms(&["average", "--in", path_str(&input), "--out", path_str(&out)]);
    assert_eq!(std::fs::read(&out).unwrap(), first);
}

#[test]
fn pencil_export_solves_as_sdpa() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("c4.dat-s");
    let o = gqms(&["pencil", "--graph", "cycle:4", "--s", "2", "--format", "sdpa", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["variables"], 20);
    assert_eq!(v["identity_at_zero"], true);
    let o = gqms(&["sdp", "solve", path_str(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["status"], "Optimal");

    let json_out = dir.path().join("k3.json");
    let v = stdout_json(&gqms(&["pencil", "--n", "3", "--out", path_str(&json_out)]));
    assert_eq!(v["monic_identity_exact"], true);
    assert_eq!(code(&gqms(&["pencil", "--out", path_str(&json_out)])), 2);
}

#[test]
fn sdp_solve_reports_infeasible_and_bad_input() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("inf.dat-s");
    std::fs::write(&p, "2\n1\n2\n1 2\n1 1 1 1 1\n1 1 2 2 1\n2 1 1 1 1\n2 1 2 2 1\n").unwrap();
    let o = gqms(&["sdp", "solve", path_str(&p)]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["status"], "Infeasible");
    std::fs::write(&p, "1\n1\n2\n").unwrap();
    assert_eq!(code(&gqms(&["sdp", "solve", path_str(&p)])), 2);
}

#[test]
fn certificate_roundtrip_and_tamper_detection() {
    let dir = TempDir::new().unwrap();
    let cert = dir.path().join("cert.json");
    let o = gqms(&[
        "counterexample",
        "--budget",
        "3",
        "--seed",
        "42",
        "--rank",
        "1",
        "--no-average",
        "--out",
        path_str(&cert),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let summary = stdout_json(&o);
    assert!(summary["objective"].as_f64().unwrap() <= -1e-6);

    let o = gqms(&["certify", "--check", path_str(&cert)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["valid"], true);

    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    let obj = v["objective"].as_f64().unwrap();
    v["objective"] = json!(obj + 1e-3);
    let tampered = write_json(&dir, "tampered.json", &v);
    let o = gqms(&["certify", "--check", &tampered]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["valid"], false);

    // Claiming C4 commutation for a plain square is also caught.
    v["objective"] = json!(obj);
    v["graph"] = json!("cycle:4");
    let relabeled = write_json(&dir, "relabeled.json", &v);
    assert_eq!(code(&gqms(&["certify", "--check", &relabeled])), 1);

    let broken = write_json(&dir, "broken.json", &json!({"objective": -1.0}));
    assert_eq!(code(&gqms(&["certify", "--check", &broken])), 2);
}

#[test]
fn exhausted_search_reports_seeds() {
    let o = gqms(&["counterexample", "--budget", "2", "--seed", "5"]);
    assert_eq!(code(&o), 1);
    let v = stdout_json(&o);
    assert_eq!(v["accepted"], false);
    assert_eq!(v["evaluated"], 2);
    assert_eq!(v["seeds"].as_array().unwrap().len(), 2);
    assert!(v["best_objective"].is_number());
}

#[test]
fn probe_and_separate() {
    let dir = TempDir::new().unwrap();
    let perm = write_json(&dir, "perm.json", &scalar_square(4, |i, j| (i == j) as u8 as f64));
    let o = gqms(&["probe", "--in", &perm, "--graph", "cycle:4", "--directions", "3"]);
    assert_eq!(code(&o), 0);
    assert!(stdout_json(&o)["max_beta_norm"].as_f64().unwrap() <= 1e-6);

    let o = gqms(&["separate", "--in", &perm]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["separates"], false);
}
