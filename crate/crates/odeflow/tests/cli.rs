use std::path::Path;
use std::process::{Command, Output};

use odeflow::experiments::MANIFEST_NAME;
use odeflow::formats::{parse_csv, read_params};

const BIN: &str = env!("CARGO_BIN_EXE_odeflow");

fn odeflow(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN).args(args).current_dir(dir).env_remove("ODEFLOW_THREADS").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SWEEP: &str = r#"{"model": {"depths": [4, 8, 16]}, "data": {"n": 6}, "train": {"steps": 30, "snapshot_every": 10}, "sweep": {"reference_depth": 32}}"#;

#[test]
fn sweep_writes_documented_files_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "sweep.json", SWEEP);
    let out = odeflow(&["large-depth-sweep", "--config", &cfg, "--out", "run"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("run");
    let (header, rows) = parse_csv(&std::fs::read_to_string(dir.join("gaps.csv")).unwrap());
    assert_eq!(header, ["L", "t", "max_gap"]);
    assert_eq!(rows.len(), 3 * 4);
    let (header, rows) = parse_csv(&std::fs::read_to_string(dir.join("supdist.csv")).unwrap());
    assert_eq!(header, ["L", "L_ref", "t", "sup", "l2"]);
    assert_eq!(rows.len(), 3 * 4);
    assert!(rows.iter().all(|r| r[1] == "32"));
    let summary = std::fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.starts_with("final max gap vs L: slope "), "{summary}");
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join(MANIFEST_NAME)).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "large-depth-sweep");
    assert_eq!(manifest["config"]["model"]["depths"], serde_json::json!([4, 8, 16]));
    assert_eq!(manifest["files"].as_array().unwrap().len(), 5);

    let ok = odeflow(&["verify", "run"], tmp.path());
    assert!(ok.status.success());
    std::fs::write(dir.join("gaps.csv"), b"L,t,max_gap\n").unwrap();
    let bad = odeflow(&["verify", "run"], tmp.path());
    assert_eq!(bad.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("gaps.csv"));
}

#[test]
fn single_depth_sweep_reports_no_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "one.json",
        r#"{"model": {"depths": [8]}, "data": {"n": 4}, "train": {"steps": 10, "snapshot_every": 5}, "sweep": {"reference_depth": null}}"#,
    );
    let out = odeflow(&["large-depth-sweep", "--config", &cfg, "--out", "run"], tmp.path());
    assert!(out.status.success());
    let summary = std::fs::read_to_string(tmp.path().join("run/summary.txt")).unwrap();
    assert_eq!(summary, "single depth: no slope fitted\n");
    assert!(!tmp.path().join("run/supdist.csv").exists());
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "sweep.json", SWEEP);
    for (threads, dir) in [("1", "a"), ("3", "b")] {
        let out = odeflow(&["large-depth-sweep", "--config", &cfg, "--out", dir, "--threads", threads], tmp.path());
        assert!(out.status.success());
    }
    let env = Command::new(BIN)
        .args(["large-depth-sweep", "--config", &cfg, "--out", "c"])
        .current_dir(tmp.path())
        .env("ODEFLOW_THREADS", "2")
        .output()
        .unwrap();
    assert!(env.status.success());
    for name in ["gaps.csv", "gap_summary.csv", "loss.csv", "supdist.csv", "summary.txt", MANIFEST_NAME] {
        let a = std::fs::read(tmp.path().join("a").join(name)).unwrap();
        assert!(a == std::fs::read(tmp.path().join("b").join(name)).unwrap(), "{name}");
        assert!(a == std::fs::read(tmp.path().join("c").join(name)).unwrap(), "{name}");
    }
}

#[test]
fn seed_flag_overrides_config_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.json", r#"{"seed": 5, "smin": {"m": 32, "d": 8, "n": 2, "trials": 3}}"#);
    let run = |dir: &str, extra: &[&str]| {
        let mut args = vec!["smin-probe", "--config", cfg.as_str(), "--out", dir];
        args.extend_from_slice(extra);
        assert!(odeflow(&args, tmp.path()).status.success());
        std::fs::read(tmp.path().join(dir).join("smin.csv")).unwrap()
    };
    let five = run("a", &[]);
    assert_eq!(five, run("b", &["--seed", "5"]));
    assert_ne!(five, run("c", &["--seed", "6"]));
}

#[test]
fn long_time_writes_snapshots_that_decode() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "lt.json",
        r#"{"model": {"depth": 6, "width": 8}, "data": {"n": 4}, "train": {"steps": 64, "snapshot_every": 8}, "profile": {"checkpoints": 3}}"#,
    );
    let out = odeflow(&["long-time", "--config", &cfg, "--out", "run"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("run");
    // checkpoints 0, T/4, T/2, T with T = 64 * 5e-3
    for name in ["snap_0.bin", "snap_0.08.bin", "snap_0.16.bin", "snap_0.32.bin"] {
        let p = read_params(&dir.join(name)).unwrap();
        assert_eq!(p.depth(), 6);
    }
    let (header, rows) = parse_csv(&std::fs::read_to_string(dir.join("loss.csv")).unwrap());
    assert_eq!(header, ["t", "loss", "grad_norm_sq"]);
    assert_eq!(rows.len(), 65);
    let (header, rows) = parse_csv(&std::fs::read_to_string(dir.join("profiles.csv")).unwrap());
    assert_eq!(header, ["t", "s", "entry_value"]);
    assert_eq!(rows.len(), 4 * 6);
    let (header, _) = parse_csv(&std::fs::read_to_string(dir.join("pl.csv")).unwrap());
    assert_eq!(header, ["t", "loss", "ratio"]);
}

#[test]
fn hermite_identity_shows_unit_first_coefficient() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "h.json", r#"{"hermite": {"activation": "identity", "rmax": 6, "order": 20}}"#);
    assert!(odeflow(&["hermite", "--config", &cfg, "--out", "run"], tmp.path()).status.success());
    let (header, rows) = parse_csv(&std::fs::read_to_string(tmp.path().join("run/hermite.csv")).unwrap());
    assert_eq!(header, ["r", "eta_r"]);
    assert_eq!(rows.len(), 7);
    let eta: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!((eta[1] - 1.0).abs() < 1e-12);
    assert!(eta.iter().enumerate().all(|(r, v)| r == 1 || v.abs() < 1e-12));
}

#[test]
fn relu_cx_summary_meets_the_fixed_point() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "r.json", r#"{"relu": {"half_depths": [8], "multipliers": [2.0]}}"#);
    assert!(odeflow(&["relu-cx", "--config", &cfg, "--out", "run"], tmp.path()).status.success());
    let (header, rows) = parse_csv(&std::fs::read_to_string(tmp.path().join("run/summary.csv")).unwrap());
    assert_eq!(&header[..5], ["L", "C", "w_final", "w_star", "abs_err"]);
    let abs_err: f64 = rows[0][4].parse().unwrap();
    assert!(abs_err <= 1e-4, "{abs_err}");
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"train": {"lr": "fast"}}"#, "train.lr"),
        (r#"{"model": {"depths": [64, 32]}}"#, "model.depths"),
        (r#"{"experiment": "hermite"}"#, "experiment"),
        (r#"{"modle": {}}"#, "modle"),
        ("not json", "<document>"),
    ];
    for (i, (json, path)) in cases.iter().enumerate() {
        let cfg = write(tmp.path(), &format!("bad{i}.json"), json);
        let out = odeflow(&["large-depth-sweep", "--config", &cfg, "--out", "never"], tmp.path());
        assert_eq!(out.status.code(), Some(2), "{json}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(path), "{json}: {err}");
    }
    assert!(!tmp.path().join("never").exists());
    let zero = odeflow(&["hermite", "--threads", "0", "--out", "x"], tmp.path());
    assert_eq!(zero.status.code(), Some(2));
    let unknown = odeflow(&["no-such-experiment"], tmp.path());
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn divergence_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "d.json", r#"{"relu": {"half_depths": [4], "multipliers": [2.0], "eta": 1e300, "steps": 10}}"#);
    let out = odeflow(&["relu-cx", "--config", &cfg, "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
}

#[test]
fn io_errors_exit_with_four() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = odeflow(&["hermite", "--config", "absent.json"], tmp.path());
    assert_eq!(missing.status.code(), Some(4));
    std::fs::write(tmp.path().join("blocker"), b"file").unwrap();
    let blocked = odeflow(&["hermite", "--out", "blocker/sub"], tmp.path());
    assert_eq!(blocked.status.code(), Some(4));
}

#[test]
fn defaults_and_dry_run_print_resolved_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = odeflow(&["defaults", "long-time"], tmp.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["train"]["steps"], 80000);
    assert_eq!(v["model"]["width"], 64);
    let dry = odeflow(&["large-depth-sweep", "--dry-run", "--seed", "9"], tmp.path());
    assert!(dry.status.success());
    let v: serde_json::Value = serde_json::from_slice(&dry.stdout).unwrap();
    assert_eq!(v["seed"], 9);
    assert_eq!(v["model"]["depths"], serde_json::json!([16, 32, 64, 128, 256, 512, 1024]));
    assert!(!tmp.path().join("out").exists());
}
