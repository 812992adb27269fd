use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn wbc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wbc")).args(args).env("WBC_LOG_LEVEL", "error").output().expect("wbc runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn help_documents_every_flag() {
    let cases: [(&str, &[&str]); 6] = [
        ("sim", &["--scenario", "--profile", "--out", "--seed"]),
        ("ik-step", &["--model", "--state", "--targets", "--profile", "--dt"]),
        ("gaze", &["--head-pose", "--target", "--neck-mount"]),
        ("validate", &["--model", "--profile", "--scenario"]),
        ("inspect-log", &["--log", "--metrics", "--baseline", "--tolerance"]),
        ("bench", &["--scenario", "--runs"]),
    ];
    let top = wbc(&["--help"]);
    assert!(top.status.success());
    let text = String::from_utf8_lossy(&top.stdout);
    assert!(text.contains("WBC_LOG_LEVEL"));
    for (cmd, flags) in cases {
        let out = wbc(&[cmd, "--help"]);
        assert!(out.status.success(), "{cmd}");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains(cmd), "{cmd}");
        for flag in flags {
            assert!(text.contains(flag), "{cmd} {flag}");
        }
    }
}

#[test]
fn unknown_flags_and_missing_options_are_rejected() {
    assert!(!wbc(&["sim", "--scenario", "static-target"]).status.success());
    assert!(!wbc(&["gaze", "--bogus"]).status.success());
}

#[test]
fn sim_writes_log_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let res = wbc(&["sim", "--scenario", "static-target", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 501);
    let metrics: Value = serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["scenario"], "static-target");
    assert_eq!(metrics["metrics"]["constraint_violations"], 0);
}

#[test]
fn sim_scenario_file_with_profile_override_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(
        dir.path(),
        "s.json",
        r#"{"name":"short","policy":{"type":"figure-eight-bimanual"},"duration":0.5,"timing_jitter":0.005}"#,
    );
    let out = dir.path().join("o");
    let args = ["sim", "--scenario", &scenario, "--profile", "tablescape", "--seed", "7", "--out", out.to_str().unwrap()];
    assert_eq!(wbc(&args).status.code(), Some(0));
    let m: Value = serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["profile"], "tablescape");
    assert_eq!(m["seed"], 7);
}

#[test]
fn sim_missing_file_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = wbc(&["sim", "--scenario", "/no/such/scenario.json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(!res.stderr.is_empty());
}

#[test]
fn blocked_target_keeps_safety_distance() {
    let dir = tempfile::tempdir().unwrap();
    let res = wbc(&["sim", "--scenario", "blocked-target", "--out", dir.path().to_str().unwrap()]);
    let code = res.status.code().unwrap();
    assert!(code == 0 || code == 3, "{code}");
    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert!(m["metrics"]["min_collision_distance"].as_f64().unwrap() >= 0.01 - 1e-6);
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let margin: f64 = line.split(',').rev().nth(2).unwrap().parse().unwrap();
        assert!(margin >= -1e-8, "{margin}");
    }
}

fn nominal_files(dir: &Path) -> (String, String) {
    let model = wbc_core::model::RobotModel::reference();
    let q = model.nominal_posture();
    let kin = model.kinematics(q).unwrap();
    let targets = serde_json::json!({
        "left_ee": kin.pose("left_gripper"),
        "right_ee": kin.pose("right_gripper"),
    });
    (write(dir, "q.json", &serde_json::to_string(q).unwrap()), write(dir, "t.json", &targets.to_string()))
}

#[test]
fn ik_step_at_current_pose_is_still() {
    let dir = tempfile::tempdir().unwrap();
    let (state, targets) = nominal_files(dir.path());
    let res = wbc(&["ik-step", "--state", &state, "--targets", &targets, "--profile", "laundry"]);
    assert_eq!(res.status.code(), Some(0));
    let v = stdout_json(&res);
    assert_eq!(v["status"], "optimal");
    let dq = v["dq"].as_array().unwrap();
    assert_eq!(dq.len(), 25);
    assert!(dq.iter().all(|x| x.as_f64().unwrap().abs() < 1e-9));
    // Weights as listed for the laundry task.
    let p = &v["profile"];
    for (k, w) in [("w_p", 10000.0), ("w_o", 10000.0), ("w_nom_torso", 50.0), ("w_nom_arm", 50.0), ("w_curr", 50.0)] {
        assert_eq!(p[k].as_f64(), Some(w), "{k}");
    }
    for (k, w) in [("w_base_pos", 50.0), ("w_base_ori", 50.0), ("w_com", 100000.0), ("b_x", 0.08), ("b_y", 0.08)] {
        assert_eq!(p[k].as_f64(), Some(w), "{k}");
    }
    assert!(v["diagnostics"]["costs"].as_array().unwrap().len() >= 4);
    assert!(!v["diagnostics"]["margins"].as_array().unwrap().is_empty());
    // Deterministic output.
    let again = wbc(&["ik-step", "--state", &state, "--targets", &targets, "--profile", "laundry"]);
    assert_eq!(res.stdout, again.stdout);
}

#[test]
fn ik_step_rejects_bad_state_length() {
    let dir = tempfile::tempdir().unwrap();
    let (_, targets) = nominal_files(dir.path());
    let state = write(dir.path(), "bad.json", "[0, 0, 0]");
    let res = wbc(&["ik-step", "--state", &state, "--targets", &targets, "--profile", "laundry"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn gaze_examples() {
    let dir = tempfile::tempdir().unwrap();
    // Optical frame looking along world +x with y down.
    let head = write(dir.path(), "head.json", "[0, 0, 1.5, 0.5, -0.5, 0.5, -0.5]");
    let ahead = stdout_json(&wbc(&["gaze", "--head-pose", &head, "--target", "2,0,1.5"]));
    assert!(ahead["pan"].as_f64().unwrap().abs() < 1e-12);
    assert!(ahead["tilt"].as_f64().unwrap().abs() < 1e-12);
    let r: Vec<Vec<f64>> = serde_json::from_value(ahead["rotation"].clone()).unwrap();
    let expected = [[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]];
    for i in 0..3 {
        for j in 0..3 {
            assert!((r[i][j] - expected[i][j]).abs() < 1e-12);
        }
    }
    let left = stdout_json(&wbc(&["gaze", "--head-pose", &head, "--target", "0,2,1.5"]));
    assert!((left["pan"].as_f64().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    assert_eq!(left["clamped"], false);
    let res = wbc(&["gaze", "--head-pose", &head, "--target", "0,0,1.5"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn validate_and_inspect() {
    assert_eq!(wbc(&["validate", "--model", "reference", "--profile", "delivery", "--scenario", "box-carry"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "p.json", r#"{"name": "x"}"#);
    assert_eq!(wbc(&["validate", "--profile", &bad]).status.code(), Some(1));
    assert_eq!(wbc(&["validate"]).status.code(), Some(1));

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, seed) in [(&a, "1"), (&b, "2")] {
        assert_eq!(wbc(&["sim", "--scenario", "static-target", "--seed", seed, "--out", out.to_str().unwrap()]).status.code(), Some(0));
    }
    let summary = stdout_json(&wbc(&["inspect-log", "--log", a.join("trajectory.csv").to_str().unwrap()]));
    assert_eq!(summary["rows"], 500);
    assert_eq!(summary["coordinates"], 25);
    let (ma, mb) = (a.join("metrics.json"), b.join("metrics.json"));
    let same = wbc(&["inspect-log", "--metrics", ma.to_str().unwrap(), "--baseline", mb.to_str().unwrap(), "--tolerance", "0"]);
    assert_eq!(same.status.code(), Some(0));
    let report = stdout_json(&same);
    assert!(report["deltas"].as_array().unwrap().iter().all(|d| d["delta"] == 0.0));

    let c = dir.path().join("c");
    wbc(&["sim", "--scenario", "static-target", "--profile", "tablescape", "--out", c.to_str().unwrap()]);
    let diff = wbc(&["inspect-log", "--metrics", c.join("metrics.json").to_str().unwrap(), "--baseline", ma.to_str().unwrap()]);
    assert_eq!(diff.status.code(), Some(2));
    let garbage = write(dir.path(), "g.csv", "a,b\n1,2\n");
    assert_eq!(wbc(&["inspect-log", "--log", &garbage]).status.code(), Some(1));
}
