use std::fs;
use std::path::Path;

use scenesum::frames::parse_summary;
use scenesum::pipeline::{files, Pipeline, SceneEvaluation, Stage, StageStatus, FaceEvaluation, PipelineConfig};
use scenesum::synthetic::{event_fixture, write_event_fixture};
use scenesum::Error;

fn fixture(dir: &Path, seed: u64) -> Pipeline {
    let cfg = write_event_fixture(&event_fixture(seed), dir, seed).unwrap();
    Pipeline::load(&cfg).unwrap()
}

#[test]
fn full_run_produces_three_scene_summary() {
    let dir = tempfile::tempdir().unwrap();
    let p = fixture(dir.path(), 11);
    let ran = p.run(None, false).unwrap();
    assert_eq!(ran.len(), Stage::ALL.len());
    assert!(ran.iter().all(|(_, s)| *s == StageStatus::Ran));

    let summary = parse_summary(&fs::read_to_string(p.output_path(files::SUMMARY)).unwrap()).unwrap();
    assert_eq!(summary.len(), 3);
    assert!(summary.windows(2).all(|w| w[0].start_t < w[1].start_t));
    for entry in &summary {
        assert_eq!(entry.trigger_characters.len(), 1);
        assert!(!entry.tweet_only, "scene at {} has no frames", entry.start_t);
        for f in &entry.frames {
            assert!(f.t >= entry.start_t && f.t < entry.end_t);
        }
    }
    let report = fs::read_to_string(p.output_path(files::REPORT)).unwrap();
    assert_eq!(report.matches("## Scene").count(), 3);

    let eval: SceneEvaluation = serde_json::from_str(&fs::read_to_string(p.output_path(files::SCENE_EVAL)).unwrap()).unwrap();
    assert_eq!(eval.scenes.f1, 1.0);
    let faces: FaceEvaluation = serde_json::from_str(&fs::read_to_string(p.output_path(files::FACE_EVAL)).unwrap()).unwrap();
    assert_eq!(faces.test_faces, 100);
    assert!(faces.model.micro_accuracy > 0.8, "{}", faces.model.micro_accuracy);
}

#[test]
fn selected_frames_show_the_scene_character() {
    let dir = tempfile::tempdir().unwrap();
    let p = fixture(dir.path(), 12);
    p.run(Some(Stage::Summarize), false).unwrap();
    let summary = parse_summary(&fs::read_to_string(p.output_path(files::SUMMARY)).unwrap()).unwrap();
    for entry in summary {
        let trigger = entry.trigger_characters.iter().next().unwrap().clone();
        assert!(entry.frames.iter().any(|f| f.who == trigger), "{entry:?}");
    }
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = fixture(a.path(), 5);
    let pb = fixture(b.path(), 5);
    pa.run(None, false).unwrap();
    pb.run(None, false).unwrap();
    for name in [files::SCENES, files::MODEL, files::SUMMARY, files::REPORT, files::WEAK_LABELS] {
        assert_eq!(
            fs::read(pa.output_path(name)).unwrap(),
            fs::read(pb.output_path(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn resume_skips_finished_stages() {
    let dir = tempfile::tempdir().unwrap();
    let p = fixture(dir.path(), 6);
    p.run(None, false).unwrap();
    let before = fs::read(p.output_path(files::SUMMARY)).unwrap();
    let again = p.run(None, true).unwrap();
    assert!(again.iter().all(|(_, s)| *s == StageStatus::Skipped));
    assert_eq!(fs::read(p.output_path(files::SUMMARY)).unwrap(), before);

    // a removed output forces that stage to rerun
    fs::remove_file(p.output_path(files::FRAMES)).unwrap();
    let partial = p.run(None, true).unwrap();
    let reran: Vec<Stage> = partial.iter().filter(|(_, s)| *s == StageStatus::Ran).map(|(st, _)| *st).collect();
    assert_eq!(reran, [Stage::SelectFrames]);
    assert_eq!(fs::read(p.output_path(files::SUMMARY)).unwrap(), before);
}

#[test]
fn config_change_invalidates_markers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_event_fixture(&event_fixture(7), dir.path(), 7).unwrap();
    let p = Pipeline::load(&cfg_path).unwrap();
    p.run(Some(Stage::DetectScenes), false).unwrap();
    let mut cfg = p.config().clone();
    cfg.scenes.k = 0.25;
    let changed = Pipeline::new(cfg, dir.path()).unwrap();
    let ran = changed.run(Some(Stage::DetectScenes), true).unwrap();
    assert!(ran.iter().all(|(_, s)| *s == StageStatus::Ran));
}

#[test]
fn detect_only_stops_before_summary() {
    let dir = tempfile::tempdir().unwrap();
    let p = fixture(dir.path(), 8);
    let ran = p.run(Some("detect".parse().unwrap()), false).unwrap();
    assert_eq!(ran.len(), 2);
    assert!(p.output_path(files::SCENES).is_file());
    assert!(!p.output_path(files::SUMMARY).exists());
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = fixture(dir.path(), 9);
    fs::remove_file(dir.path().join("messages.jsonl")).unwrap();
    match p.run(None, false) {
        Err(Error::MissingInput(path)) => assert!(path.ends_with("messages.jsonl")),
        other => panic!("expected a missing input, got {other:?}"),
    }
}

#[test]
fn stage_without_prerequisites_names_the_missing_output() {
    let dir = tempfile::tempdir().unwrap();
    let p = fixture(dir.path(), 10);
    match p.run_stage(Stage::Summarize, false) {
        Err(Error::MissingStageOutput { stage, path }) => {
            assert_eq!(stage, "summarize");
            assert!(path.ends_with(files::SCENES));
        }
        other => panic!("expected a missing stage output, got {other:?}"),
    }
}

#[test]
fn failed_stage_keeps_earlier_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = fixture(dir.path(), 13);
    fs::remove_file(dir.path().join("tweet_vectors.jsonl")).unwrap();
    assert!(p.run(None, false).is_err());
    assert!(p.output_path(files::SCENES).is_file());
    assert!(!p.is_done(Stage::SelectTweets));
    assert!(p.is_done(Stage::DetectScenes));
}

#[test]
fn config_round_trips_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let p = fixture(dir.path(), 14);
    let text = p.config().to_toml();
    assert_eq!(&PipelineConfig::from_toml(&text).unwrap(), p.config());
    let bad = text.replace("[scenes]", "[scenes]\nkk = 0.3");
    assert!(matches!(PipelineConfig::from_toml(&bad), Err(Error::Config(_))));
}
