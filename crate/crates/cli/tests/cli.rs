//! End-to-end checks of the `kd` binary: exit codes, output formats, and
//! determinism of reruns.

use std::path::PathBuf;
use std::process::{Command, Output};

fn kd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kd"))
        .args(args)
        .env("KD_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("kd-cli-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn pls_reports_order_parameter() {
    let out = kd(&["pls", "--dist", "cauchy:delta=1", "--K", "4"]);
    let doc = stdout_json(&out);
    let r_s = doc["result"]["r_s"].as_f64().unwrap();
    assert!((r_s - 0.707_106_8).abs() < 1e-6, "{r_s}");
    assert_eq!(doc["result"]["k_c"].as_f64().unwrap(), 2.0);
    assert!(doc["config_hash"].as_str().unwrap().len() == 16);
    assert_eq!(doc["version"].as_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn stability_below_threshold_is_numerical_failure() {
    let out = kd(&["stability", "--dist", "cauchy:delta=1", "--K", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).expect("structured error");
    assert_eq!(err["error"]["kind"], "NoSolution");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(kd(&["no-such-command"]).status.code(), Some(2));
    let bad_dist = kd(&["pls", "--dist", "triangular:delta=1", "--K", "4"]);
    assert_eq!(bad_dist.status.code(), Some(2));
    let missing_param = kd(&["pls", "--dist", "cauchy", "--K", "4"]);
    assert_eq!(missing_param.status.code(), Some(2));
}

#[test]
fn sweep_reruns_are_byte_identical() {
    let path = tmp("sweep.csv");
    let args = [
        "sweep",
        "--dist",
        "cauchy:delta=1",
        "--K-range",
        "2.5:4:0.5",
        "--out",
        path.to_str().unwrap(),
    ];
    assert!(kd(&args).status.success());
    let first = std::fs::read(&path).unwrap();
    assert!(kd(&args).status.success());
    let second = std::fs::read(&path).unwrap();
    assert_eq!(first, second);
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("# kd "), "missing header: {text}");
    assert!(text.contains("config-hash="));
    // K = 2.5 row carries the closed-form sqrt(1 - 2/2.5).
    assert!(text.contains("4.4721359549997231e-1"), "{text}");
    std::fs::remove_file(&path).ok();
}

#[test]
fn bicauchy_diagram_matches_branch_structure() {
    let path = tmp("diagram.csv");
    let out = kd(&[
        "bicauchy",
        "--K-range",
        "5:12:0.5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#') && l.contains(',')).collect();
    for line in &data {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[0] == "k" {
            continue;
        }
        let k: f64 = cols[0].parse().unwrap();
        if k < 5.729 {
            assert!(cols[1].is_empty() && cols[2].is_empty(), "{line}");
        } else if k < 10.0 {
            assert_eq!(cols[5], "Unstable", "{line}");
            assert_eq!(cols[6], "Stable", "{line}");
        } else if k > 10.0 {
            assert!(cols[1].is_empty(), "{line}");
            assert_eq!(cols[6], "Stable", "{line}");
        }
    }
    assert!(data.len() > 10);
    std::fs::remove_file(&path).ok();
}

#[test]
fn finite_n_is_seed_deterministic() {
    let path = tmp("fn.csv");
    let run = |seed: &str| {
        let out = kd(&[
            "finite-n",
            "--dist",
            "cauchy:delta=1",
            "--K",
            "4",
            "--N",
            "200",
            "--seed",
            seed,
            "--tend",
            "2",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        std::fs::read(&path).unwrap()
    };
    let a = run("7");
    let b = run("7");
    let c = run("8");
    assert_eq!(a, b);
    assert_ne!(a, c);
    std::fs::remove_file(&path).ok();
}

#[test]
fn oa_sim_classifies_minus_escape() {
    let path = tmp("oa.csv");
    let out = kd(&[
        "oa-sim",
        "--K",
        "8",
        "--branch",
        "minus",
        "--perturb",
        "1e-6",
        "--seed",
        "13",
        "--tend",
        "20",
        "--out",
        path.to_str().unwrap(),
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["result"]["outcome"], "DivergedFromMinusCircle");
    assert_eq!(doc["result"]["stable"], false);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().nth(2).unwrap().starts_with("t,re_z1"));
    std::fs::remove_file(&path).ok();
}

#[test]
fn simulate_rotation_reports_asymptotic_phase() {
    let path = tmp("sim.csv");
    let out = kd(&[
        "simulate",
        "--dist",
        "cauchy:delta=1",
        "--K",
        "4",
        "--perturb",
        "rotate:0.05",
        "--dtau",
        "0.1",
        "--tau-min",
        "-8",
        "--tau-max",
        "8",
        "--tend",
        "2",
        "--record-every",
        "5",
        "--out",
        path.to_str().unwrap(),
    ]);
    let doc = stdout_json(&out);
    let theta = doc["result"]["theta_inf"].as_f64().unwrap();
    assert!((theta - 0.05).abs() < 1e-3, "{theta}");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().nth(2).unwrap().starts_with("t,dist_a0,re_r,im_r,theta_star"));
    std::fs::remove_file(&path).ok();
}

#[test]
fn norms_certifies_contraction() {
    let out = kd(&[
        "norms", "--dist", "cauchy:delta=1", "--K", "4", "--a", "0.25", "--l-max", "12",
    ]);
    let doc = stdout_json(&out);
    let q = doc["result"]["certificate"]["q"].as_f64().unwrap();
    assert!(q < 1.0 && q > 0.9, "{q}");
    assert_eq!(doc["result"]["certificate"]["mode_norms"].as_array().unwrap().len(), 12);
}
