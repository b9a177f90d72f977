use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bfloat_cli::CliConfig;

fn bfloat(args: &[&str], config: &str, dir: &Path) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_bfloat"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .env_remove("BFLOAT_OUT")
        .output()
        .unwrap()
}

fn out(dir: &Path, file: &str) -> PathBuf {
    dir.join("out").join(file)
}

const REST: &str = r#"{
    "scenario": {"kind": "rest"},
    "params": {"epsilon": 0.1, "delta": 0.2},
    "grid": {"l": 6.0, "dx": 0.05},
    "t_final": 0.3,
    "snapshot_stride": 4
}"#;

#[test]
fn rest_run_has_zero_energies() {
    let dir = tempfile::tempdir().unwrap();
    let o = bfloat(&["run"], REST, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out(dir.path(), "energies.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,e_ext,e_int,e_tot,flux_jump,m0,layer_width,frakE");
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(&f[1..5], &["0", "0", "0", "0"], "{l}");
        assert_eq!(f[5], "1");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out(dir.path(), "manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"]["status"], "completed");
    let snaps = manifest["snapshots"].as_array().unwrap();
    assert!(snaps.len() >= 3);
    let first = std::fs::read_to_string(out(dir.path(), snaps[0]["file"].as_str().unwrap())).unwrap();
    assert!(first.starts_with("x,theta,q,zeta\n"));
    assert_eq!(first.lines().count(), 1 + 2 * 101);
}

#[test]
fn manifest_hash_matches_canonical_serialization() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bfloat(&["run"], REST, dir.path()).status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out(dir.path(), "manifest.json")).unwrap()).unwrap();
    let cfg = CliConfig::from_json(REST).unwrap();
    assert_eq!(manifest["config_hash"], cfg.hash());
    let echoed: CliConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    assert_eq!(echoed.hash(), cfg.hash());
}

#[test]
fn malformed_config_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = REST.replace("\"t_final\"", "\"t_finale\"");
    let o = bfloat(&["run"], &bad, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("t_finale"));
    let o = bfloat(&["run"], "{ not json", dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cavitated_data_rejected_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "scenario": {"kind": "standing-pulses", "amplitude": -3.0},
        "params": {"epsilon": 0.5, "delta": 0.2},
        "grid": {"l": 11.0, "dx": 0.05}
    }"#;
    let o = bfloat(&["run"], cfg, dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out(dir.path(), "energies.csv").exists());
}

#[test]
fn cavitation_scenario_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "scenario": {"kind": "draining-trough", "amplitude": 0.8},
        "params": {"epsilon": 0.25, "delta": 0.1},
        "grid": {"l": 26.0, "dx_over_delta": 4},
        "t_final": 2.0,
        "cfl": 10.0
    }"#;
    let o = bfloat(&["run"], cfg, dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("blow-up criterion tripped at t="));
    let manifest = std::fs::read_to_string(out(dir.path(), "manifest.json")).unwrap();
    assert!(manifest.contains("\"blow-up\""));
}

#[test]
fn check_compat_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let pulse = r#"{
        "scenario": {"kind": "pulse-right", "margin": 3.0, "center": 8.0},
        "params": {"epsilon": 0.1, "delta": 0.1},
        "grid": {"l": 17.0, "dx": 0.0125}
    }"#;
    assert_eq!(bfloat(&["check-compat"], pulse, dir.path()).status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out(dir.path(), "compat_report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["exact"]["rows"].as_array().unwrap().len(), 5);

    let jump = r#"{
        "scenario": {"kind": "jump-theta"},
        "params": {"epsilon": 0.1, "delta": 0.1},
        "grid": {"l": 11.0, "dx": 0.0125},
        "compat": {"order": 5}
    }"#;
    let o = bfloat(&["check-compat"], jump, dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stdout).contains("row j=0"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out(dir.path(), "compat_report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
    assert_eq!(report["first_failure"][1], 0);
}

#[test]
fn infeasible_trace_order_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "scenario": {"kind": "pulse-right"},
        "params": {"epsilon": 0.1, "delta": 0.1},
        "grid": {"l": 2.0, "n_per_side": 9},
        "compat": {"mode": "approx", "order": 12}
    }"#;
    assert_eq!(bfloat(&["check-compat"], cfg, dir.path()).status.code(), Some(2));
}

#[test]
fn zero_delta_approx_mode_is_hyperbolic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "scenario": {"kind": "boundary-bump", "amplitude": 0.1},
        "params": {"epsilon": 0.1, "delta": 0.0},
        "grid": {"l": 11.0, "dx": 0.0125},
        "compat": {"mode": "approx"}
    }"#;
    let o = bfloat(&["check-compat"], cfg, dir.path());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out(dir.path(), "compat_report.json")).unwrap()).unwrap();
    assert_eq!(report["approximate"]["mode"], "hyperbolic");
    // smooth in the distance to the contact point, not in x: a higher row fails
    assert_eq!(o.status.code(), Some(4));
    assert!(report["first_failure"][1].as_u64().unwrap() >= 1);
    let exact_only = cfg.replace("\"approx\"", "\"exact\"");
    assert_eq!(bfloat(&["check-compat"], &exact_only, dir.path()).status.code(), Some(2));
}

#[test]
fn out_env_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, REST).unwrap();
    let env_out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_bfloat"))
        .args(["gen-data", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("from-flag"))
        .env("BFLOAT_OUT", &env_out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(env_out.join("initial.csv").exists());
    assert!(!dir.path().join("from-flag").exists());
}

#[test]
fn seeded_data_are_reproducible() {
    let cfg = r#"{
        "scenario": {"kind": "random-pulses", "margin": 1.0},
        "params": {"epsilon": 0.1, "delta": 0.2},
        "grid": {"l": 15.0, "dx": 0.05}
    }"#;
    let read = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = bfloat(&["gen-data", "--seed", seed], cfg, dir.path());
        assert_eq!(o.status.code(), Some(0));
        std::fs::read_to_string(out(dir.path(), "initial.csv")).unwrap()
    };
    assert_eq!(read("11"), read("11"));
    assert_ne!(read("11"), read("12"));
}

#[test]
fn epsilon_sweep_on_rest_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "scenario": {"kind": "rest"},
        "params": {"epsilon": 0.1, "delta": 0.2},
        "grid": {"l": 6.0, "dx": 0.05},
        "t_final": 0.2,
        "sweep": {"deltas": [0.2], "epsilons": [0.0, 0.1, 0.3]}
    }"#;
    let o = bfloat(&["sweep", "--jobs", "3"], cfg, dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out(dir.path(), "sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(r[2], "completed");
        assert_eq!(r[5], "0");
        assert_eq!(&r[6..], &rows[0][6..]);
    }
    assert!(out(dir.path(), "slopes.json").exists());
}

#[test]
fn sweep_member_failures_do_not_stop_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    // dx = 0.05 under-resolves delta = 0.1
    let cfg = r#"{
        "scenario": {"kind": "rest"},
        "params": {"epsilon": 0.1, "delta": 0.2},
        "grid": {"l": 6.0, "dx": 0.05},
        "t_final": 0.1,
        "sweep": {"deltas": [0.2, 0.1]}
    }"#;
    assert_eq!(bfloat(&["sweep"], cfg, dir.path()).status.code(), Some(0));
    let text = std::fs::read_to_string(out(dir.path(), "sweep.csv")).unwrap();
    let status: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(status[0], "completed");
    assert!(status[1].starts_with("error:"), "{status:?}");
}

#[test]
fn limit_study_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "scenario": {"kind": "pulse-right", "center": 2.5},
        "params": {"epsilon": 0.1, "delta": 0.2},
        "grid": {"l": 9.0, "dx": 0.025},
        "t_final": 0.5,
        "sweep": {"deltas": [0.2, 0.1]}
    }"#;
    let o = bfloat(&["limit-study", "--jobs", "2"], cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let study: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out(dir.path(), "limit.json")).unwrap()).unwrap();
    assert_eq!(study["errors"].as_array().unwrap().len(), 2);
    assert!(out(dir.path(), "limit.csv").exists());
}
