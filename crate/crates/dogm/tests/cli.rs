//! Exit-code and artifact contract of the `dogm run` command.

use std::process::Command;

fn dogm_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dogm"))
}

fn tiny_scenario_json(dir: &std::path::Path) -> std::path::PathBuf {
    let mut scenario = dogm::library::static_scene();
    scenario.duration = 0.5;
    scenario.grid.edge_length = 30.0;
    scenario.grid.origin = dogm::Pose::new(-15.0, -15.0, 0.0);
    scenario.ego = dogm::scenario::Trajectory::stationary(dogm::Pose::new(0.0, 0.0, 0.0), 0.5);
    for obj in &mut scenario.objects {
        let pose = obj.trajectory.segments[0].pose.unwrap();
        obj.trajectory = dogm::scenario::Trajectory::stationary(pose, 0.5);
    }
    let path = dir.join("tiny.json");
    scenario.to_json_file(&path).unwrap();
    path
}

#[test]
fn run_happy_path_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = tiny_scenario_json(dir.path());
    let out = dir.path().join("run");
    let status = dogm_bin()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .args(["--mode", "radar", "--seed", "7", "--threads", "2", "--render", "none"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{status:?}");
    assert!(out.join("metrics/summary.json").exists());
    assert!(out.join("metrics/metrics.csv").exists());
}

#[test]
fn missing_scenario_file_exits_two_naming_path() {
    let output = dogm_bin()
        .args(["run", "--scenario", "no/such/scenario.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("no/such/scenario.json"),
        "diagnostic must name the path: {stderr}"
    );
}

#[test]
fn no_scenario_at_all_exits_two() {
    let output = dogm_bin().args(["run"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"scenario": "static_scene", "unknown_key": 1}"#).unwrap();
    let output = dogm_bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(2), "unknown keys are config errors");
}

#[test]
fn bad_mode_flag_exits_two() {
    let output = dogm_bin()
        .args(["run", "--scenario", "static_scene", "--mode", "sonar"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn config_file_drives_run_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = tiny_scenario_json(dir.path());
    let out_cfg = dir.path().join("from_config");
    let out_flag = dir.path().join("from_flag");
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"scenario": {:?}, "mode": "radar", "seed": 3, "out": {:?}, "snapshots": "none"}}"#,
            scenario.to_str().unwrap(),
            out_cfg.to_str().unwrap()
        ),
    )
    .unwrap();
    // config alone
    let status = dogm_bin().args(["run", "--config"]).arg(&cfg).status().unwrap();
    assert!(status.success());
    assert!(out_cfg.join("metrics/summary.json").exists());
    // flag overrides the config's out key
    let status = dogm_bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_flag)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out_flag.join("metrics/summary.json").exists());
}

#[test]
fn params_override_file_applies() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = tiny_scenario_json(dir.path());
    let params = dir.path().join("params.json");
    std::fs::write(&params, r#"{"k_d": 0.5}"#).unwrap();
    let out = dir.path().join("run");
    let status = dogm_bin()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .args(["--mode", "radar"])
        .arg("--params")
        .arg(&params)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    // invalid params are a config error
    std::fs::write(&params, r#"{"birth_fraction": 2.0}"#).unwrap();
    let output = dogm_bin()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .arg("--params")
        .arg(&params)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}
