use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenesum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scenesum")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(dir: &Path, seed: u64) -> PathBuf {
    let out = scenesum(&["make-fixture", dir.to_str().unwrap(), "--seed", &seed.to_string()]);
    assert!(out.status.success(), "{}", stderr(&out));
    PathBuf::from(stdout(&out).trim())
}

#[test]
fn run_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), 1);
    let out = scenesum(&["--config", cfg.to_str().unwrap(), "run"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("3 scenes"), "{text}");
    assert!(text.contains("F1=1.0"), "{text}");
    let summary = std::fs::read_to_string(dir.path().join("work/summary.jsonl")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(dir.path().join("work/summary.md").is_file());
}

#[test]
fn resume_reports_up_to_date() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), 2);
    let cfg = cfg.to_str().unwrap();
    assert!(scenesum(&["-c", cfg, "run"]).status.success());
    let out = scenesum(&["-c", cfg, "run", "--resume"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.matches("up to date").count(), 9, "{text}");
    assert!(!text.contains("done"));
}

#[test]
fn stage_option_stops_early() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), 3);
    let out = scenesum(&["-c", cfg.to_str().unwrap(), "run", "--stage", "detect-scenes"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("work/scenes.jsonl").is_file());
    assert!(!dir.path().join("work/tweets.jsonl").exists());
}

#[test]
fn single_stage_needs_earlier_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), 4);
    let out = scenesum(&["-c", cfg.to_str().unwrap(), "select-tweets"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("scenes.jsonl"), "{}", stderr(&out));
}

#[test]
fn missing_input_fails_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), 5);
    std::fs::remove_file(dir.path().join("frame_vectors.jsonl")).unwrap();
    let out = scenesum(&["-c", cfg.to_str().unwrap(), "run"]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains(&dir.path().join("frame_vectors.jsonl").display().to_string()), "{err}");
}

#[test]
fn missing_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nope.toml");
    let out = scenesum(&["-c", path.to_str().unwrap(), "run"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("nope.toml"));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), 6);
    let out = scenesum(&[
        "-c",
        cfg.to_str().unwrap(),
        "config",
        "--k",
        "0.3",
        "--loss",
        "hard-em",
        "--schedule",
        "all-at-once",
        "--relabel",
        "false",
        "--baseline",
        "meanstd",
        "--seed",
        "77",
        "--window-seconds",
        "10",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    for needle in [
        "k = 0.3",
        "loss = \"hard_em\"",
        "schedule = \"all_at_once\"",
        "relabel = false",
        "method = \"meanstd\"",
        "seed = 77",
        "window_seconds = 10.0",
    ] {
        assert!(text.contains(needle), "missing `{needle}` in\n{text}");
    }
}

#[test]
fn invalid_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), 7);
    // m (0.05) must stay below k
    let out = scenesum(&["-c", cfg.to_str().unwrap(), "detect-scenes", "--k", "0.04"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("must be below"), "{}", stderr(&out));
}

#[test]
fn baseline_override_changes_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), 8);
    let cfg = cfg.to_str().unwrap();
    assert!(scenesum(&["-c", cfg, "ingest"]).status.success());
    assert!(scenesum(&["-c", cfg, "detect-scenes"]).status.success());
    let ours = std::fs::read_to_string(dir.path().join("work/scenes.jsonl")).unwrap();
    let out = scenesum(&["-c", cfg, "detect-scenes", "--baseline", "volume"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let volume = std::fs::read_to_string(dir.path().join("work/scenes.jsonl")).unwrap();
    assert_ne!(ours, volume);
}

#[test]
fn unknown_stage_is_a_usage_error() {
    let out = scenesum(&["run", "--stage", "dance"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("dance"));
}
