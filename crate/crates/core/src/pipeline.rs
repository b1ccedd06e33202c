//! Staged, resumable driver from raw event inputs to the summary.
//!
//! Every stage reads its inputs from the configured files or from earlier
//! stages' outputs in `work_dir`, writes its own outputs there, and leaves a
//! marker under `work_dir/.done/`. A marker records the resolved config, so
//! resuming after a config change reruns the stage.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{
    evaluate_accuracy, kmeans_baseline, naive_multilabel_baseline, read_checkpoint, train, write_checkpoint,
    AccuracyReport, KMeansConfig, LabelSpace, LabeledFace, PartialExample, SoftmaxModel, TrainConfig,
};
use crate::corpus::{
    bin_with_origin, dedup_retweets, parse_alias_table, parse_messages, tag_mentions, write_messages, AliasTable,
    MalformedLine, Message, MinuteBin,
};
use crate::embedding::{load_store, validate_face_links, FaceRecord};
use crate::error::{Error, Result};
use crate::frames::{
    assemble_summary, render_report, select_frames, write_summary, FrameSelection, FrameSelectionConfig, SceneTweet,
};
use crate::scenes::{
    baseline_mean_std, baseline_volume_peaks, detect_scenes, evaluate_scenes, parse_gold_scenes, Scene,
    SceneDetectorConfig, SceneEvalReport,
};
use crate::tweets::{select_scene_tweet, SelectionTier};
use crate::weak_label::{align, assign_weak_labels, parse_intervals, parse_srt, parse_transcript, WeakLabelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    DetectScenes,
    SelectTweets,
    WeakLabel,
    TrainFaces,
    SelectFrames,
    Summarize,
    EvalScenes,
    EvalFaces,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::DetectScenes,
        Stage::SelectTweets,
        Stage::WeakLabel,
        Stage::TrainFaces,
        Stage::SelectFrames,
        Stage::Summarize,
        Stage::EvalScenes,
        Stage::EvalFaces,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::DetectScenes => "detect-scenes",
            Stage::SelectTweets => "select-tweets",
            Stage::WeakLabel => "weak-label",
            Stage::TrainFaces => "train-faces",
            Stage::SelectFrames => "select-frames",
            Stage::Summarize => "summarize",
            Stage::EvalScenes => "eval-scenes",
            Stage::EvalFaces => "eval-faces",
        }
    }

    /// Files this stage writes into the work directory.
    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &[files::MESSAGES, files::BINS, files::INGEST_REPORT],
            Stage::DetectScenes => &[files::SCENES],
            Stage::SelectTweets => &[files::TWEETS],
            Stage::WeakLabel => &[files::WEAK_LABELS, files::WEAK_LABEL_REPORT],
            Stage::TrainFaces => &[files::MODEL, files::TRAIN_LOG],
            Stage::SelectFrames => &[files::FRAMES],
            Stage::Summarize => &[files::SUMMARY, files::REPORT],
            Stage::EvalScenes => &[files::SCENE_EVAL],
            Stage::EvalFaces => &[files::FACE_EVAL],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('_', "-");
        let short = match s.as_str() {
            "detect" => "detect-scenes",
            "train" => "train-faces",
            other => other,
        };
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == short)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// Names of the files written under `work_dir`.
pub mod files {
    pub const MESSAGES: &str = "messages.jsonl";
    pub const BINS: &str = "bins.jsonl";
    pub const INGEST_REPORT: &str = "ingest_report.json";
    pub const SCENES: &str = "scenes.jsonl";
    pub const TWEETS: &str = "tweets.jsonl";
    pub const WEAK_LABELS: &str = "weak_labels.jsonl";
    pub const WEAK_LABEL_REPORT: &str = "weak_label_report.json";
    pub const MODEL: &str = "model.ckpt";
    pub const TRAIN_LOG: &str = "train_log.jsonl";
    pub const FRAMES: &str = "frames.jsonl";
    pub const SUMMARY: &str = "summary.jsonl";
    pub const REPORT: &str = "summary.md";
    pub const SCENE_EVAL: &str = "scene_eval.json";
    pub const FACE_EVAL: &str = "face_eval.json";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneMethod {
    #[default]
    Detector,
    /// Volume-peak baseline.
    Volume,
    /// Mean plus `n_sigma` standard deviations baseline.
    Meanstd,
}

impl FromStr for SceneMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "detector" => Ok(SceneMethod::Detector),
            "volume" => Ok(SceneMethod::Volume),
            "meanstd" | "mean-std" => Ok(SceneMethod::Meanstd),
            other => Err(Error::Config(format!("unknown scene method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub messages: PathBuf,
    pub aliases: PathBuf,
    pub tweet_vectors: PathBuf,
    pub frame_vectors: PathBuf,
    /// Faces detected in the event's frames.
    pub face_vectors: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_scenes: Option<PathBuf>,
    /// `{id, label, vec}` records with a single true identity each.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_faces: Option<PathBuf>,
}

/// A previously aired episode used for weak labeling. Speaking turns come
/// from `intervals` when given, otherwise from aligning `subtitles` with
/// `transcript`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeInput {
    pub faces: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtitles: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<PathBuf>,
    /// Epoch seconds of the episode's first video frame.
    #[serde(default)]
    pub video_start_t: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSettings {
    pub k: f64,
    pub m: f64,
    pub margin_seconds: u64,
    pub method: SceneMethod,
    pub n_sigma: f64,
    /// Bin origin; defaults to the first message.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event_start_t: Option<i64>,
    pub dedup_retweets: bool,
}

impl Default for SceneSettings {
    fn default() -> Self {
        let d = SceneDetectorConfig::default();
        SceneSettings {
            k: d.k,
            m: d.m,
            margin_seconds: d.margin_seconds,
            method: SceneMethod::Detector,
            n_sigma: 2.0,
            event_start_t: None,
            dedup_retweets: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakLabelSettings {
    pub window_seconds: f64,
    pub max_faces_per_frame: usize,
}

impl Default for WeakLabelSettings {
    fn default() -> Self {
        let d = WeakLabelConfig::default();
        WeakLabelSettings {
            window_seconds: d.window_seconds,
            max_faces_per_frame: d.max_faces_per_frame,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    pub title: String,
    /// `{frame_id}` is replaced by the frame id.
    pub image_pattern: String,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings {
            title: "Event summary".into(),
            image_pattern: "frames/{frame_id}.jpg".into(),
        }
    }
}

fn default_work_dir() -> PathBuf {
    PathBuf::from("work")
}

/// The whole pipeline configuration. Relative paths are resolved against
/// the config file's directory. The top-level `seed` drives every random
/// choice and overrides `train.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_work_dir")]
    pub work_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub inputs: InputPaths,
    #[serde(default)]
    pub episodes: Vec<EpisodeInput>,
    #[serde(default)]
    pub scenes: SceneSettings,
    #[serde(default)]
    pub weak_label: WeakLabelSettings,
    #[serde(default)]
    pub frames: FrameSelectionConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub report: ReportSettings,
}

impl PipelineConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        SceneDetectorConfig {
            k: self.scenes.k,
            m: self.scenes.m,
            margin_seconds: self.scenes.margin_seconds,
        }
        .validate()?;
        self.train.validate()?;
        if !(self.weak_label.window_seconds >= 0.0 && self.weak_label.window_seconds.is_finite()) {
            return Err(Error::Config("window_seconds must be a non-negative number".into()));
        }
        if !(0.0..1.0).contains(&self.frames.confidence_threshold) {
            return Err(Error::Config("confidence_threshold must lie in [0, 1)".into()));
        }
        for (i, ep) in self.episodes.iter().enumerate() {
            if ep.intervals.is_none() && (ep.subtitles.is_none() || ep.transcript.is_none()) {
                return Err(Error::Config(format!(
                    "episode {i} needs `intervals` or both `subtitles` and `transcript`"
                )));
            }
        }
        Ok(())
    }

    fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.train.seed = c.seed;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    /// Skipped on resume: outputs were already in place.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub messages: usize,
    pub malformed: Vec<MalformedLine>,
    pub retweets_removed: usize,
    pub dropped_before_origin: usize,
    pub origin: Option<i64>,
    pub minutes: usize,
    pub characters: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub scene: usize,
    pub tweet_id: String,
    pub text: String,
    pub tier: SelectionTier,
    /// Characters the tweet names.
    pub characters: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakFace {
    pub id: String,
    pub episode: u32,
    pub t: i64,
    pub frame_id: String,
    pub labels: BTreeSet<String>,
    pub vec: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub episode: u32,
    pub faces: usize,
    pub kept: usize,
    pub dropped_crowded: usize,
    pub dropped_unlabeled: usize,
    pub multi_label_share: f64,
    pub intervals: usize,
    /// Cue indices merged away because they overlapped their predecessor.
    pub merged_cues: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub scene: usize,
    #[serde(flatten)]
    pub selection: FrameSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEvaluation {
    pub method: SceneMethod,
    pub margin_seconds: u64,
    pub predicted: usize,
    pub gold: usize,
    pub scenes: SceneEvalReport,
    pub volume_baseline: SceneEvalReport,
    pub mean_std_baseline: SceneEvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceEvaluation {
    pub test_faces: usize,
    pub model: AccuracyReport,
    pub kmeans_accuracy: f64,
    pub naive_accuracy: f64,
}

#[derive(Debug, Deserialize)]
struct TestFace {
    id: String,
    label: String,
    vec: Vec<f64>,
}

fn jsonl<T: Serialize>(rows: &[T]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(src: &str) -> Result<Vec<T>> {
    src.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Record {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

pub struct Pipeline {
    config: PipelineConfig,
    base: PathBuf,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, base: impl Into<PathBuf>) -> Result<Self> {
        let config = config.resolved();
        config.validate()?;
        Ok(Pipeline {
            config,
            base: base.into(),
        })
    }

    /// Reads a TOML config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let src = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Pipeline::new(PipelineConfig::from_toml(&src)?, base)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn work_dir(&self) -> PathBuf {
        self.base.join(&self.config.work_dir)
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        self.work_dir().join(name)
    }

    fn input_path(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }

    fn read_input(&self, p: &Path) -> Result<String> {
        let path = self.input_path(p);
        fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path),
            _ => Error::io(path, e),
        })
    }

    fn read_output(&self, stage: Stage, name: &str) -> Result<String> {
        let path = self.output_path(name);
        fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingStageOutput {
                stage: stage.name(),
                path,
            },
            _ => Error::io(path, e),
        })
    }

    fn read_output_bytes(&self, stage: Stage, name: &str) -> Result<Vec<u8>> {
        let path = self.output_path(name);
        fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingStageOutput {
                stage: stage.name(),
                path,
            },
            _ => Error::io(path, e),
        })
    }

    fn write_output(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let dir = self.work_dir();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(name);
        let tmp = dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    fn marker_path(&self, stage: Stage) -> PathBuf {
        self.work_dir().join(".done").join(stage.name())
    }

    fn fingerprint(&self) -> String {
        serde_json::to_string(&self.config).expect("config serializes")
    }

    /// Whether `stage` finished under the current config and its outputs
    /// are still present.
    pub fn is_done(&self, stage: Stage) -> bool {
        let marked = fs::read_to_string(self.marker_path(stage)).is_ok_and(|m| m == self.fingerprint());
        marked && stage.outputs().iter().all(|f| self.output_path(f).is_file())
    }

    pub fn run_stage(&self, stage: Stage, resume: bool) -> Result<StageStatus> {
        if resume && self.is_done(stage) {
            return Ok(StageStatus::Skipped);
        }
        let marker = self.marker_path(stage);
        if marker.exists() {
            fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
        }
        match stage {
            Stage::Ingest => self.ingest()?,
            Stage::DetectScenes => self.detect()?,
            Stage::SelectTweets => self.select_tweets()?,
            Stage::WeakLabel => self.weak_label()?,
            Stage::TrainFaces => self.train_faces()?,
            Stage::SelectFrames => self.select_frames()?,
            Stage::Summarize => self.summarize()?,
            Stage::EvalScenes => self.eval_scenes()?,
            Stage::EvalFaces => self.eval_faces()?,
        }
        let dir = marker.parent().expect("marker has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        fs::write(&marker, self.fingerprint()).map_err(|e| Error::io(&marker, e))?;
        Ok(StageStatus::Ran)
    }

    /// Stages `run` executes, in order, stopping after `through`. The
    /// evaluation stages are included only when their reference inputs are
    /// configured or they are named explicitly.
    pub fn plan(&self, through: Option<Stage>) -> Vec<Stage> {
        let last = through.unwrap_or(Stage::EvalFaces);
        Stage::ALL
            .into_iter()
            .filter(|&s| s <= last)
            .filter(|&s| match s {
                Stage::EvalScenes => self.config.inputs.gold_scenes.is_some() || through == Some(s),
                Stage::EvalFaces => self.config.inputs.test_faces.is_some() || through == Some(s),
                _ => true,
            })
            .collect()
    }

    pub fn run(&self, through: Option<Stage>, resume: bool) -> Result<Vec<(Stage, StageStatus)>> {
        self.plan(through)
            .into_iter()
            .map(|s| self.run_stage(s, resume).map(|st| (s, st)))
            .collect()
    }

    fn aliases(&self) -> Result<AliasTable> {
        parse_alias_table(&self.read_input(&self.config.inputs.aliases)?)
    }

    fn label_space(&self, aliases: &AliasTable) -> Result<LabelSpace> {
        LabelSpace::new(aliases.names().iter().cloned())
    }

    fn ingest(&self) -> Result<()> {
        let parsed = parse_messages(&self.read_input(&self.config.inputs.messages)?)?;
        let aliases = self.aliases()?;
        let before = parsed.messages.len();
        let messages = if self.config.scenes.dedup_retweets {
            dedup_retweets(&parsed.messages)
        } else {
            parsed.messages
        };
        let origin = self
            .config
            .scenes
            .event_start_t
            .or_else(|| messages.iter().map(|m| m.t).min());
        let (bins, dropped) = match origin {
            Some(o) => bin_with_origin(&messages, &aliases, o),
            None => (Vec::new(), 0),
        };
        let report = IngestReport {
            messages: messages.len(),
            malformed: parsed.malformed,
            retweets_removed: before - messages.len(),
            dropped_before_origin: dropped,
            origin,
            minutes: bins.len(),
            characters: aliases.names().to_vec(),
        };
        self.write_output(files::MESSAGES, write_messages(&messages))?;
        self.write_output(files::BINS, jsonl(&bins))?;
        self.write_output(files::INGEST_REPORT, pretty(&report))
    }

    fn messages(&self, stage: Stage) -> Result<Vec<Message>> {
        Ok(parse_messages(&self.read_output(stage, files::MESSAGES)?)?.messages)
    }

    fn bins(&self, stage: Stage) -> Result<Vec<MinuteBin>> {
        parse_jsonl(&self.read_output(stage, files::BINS)?)
    }

    fn scenes(&self, stage: Stage) -> Result<Vec<Scene>> {
        parse_jsonl(&self.read_output(stage, files::SCENES)?)
    }

    fn detect(&self) -> Result<()> {
        let bins = self.bins(Stage::DetectScenes)?;
        let s = &self.config.scenes;
        let scenes = match s.method {
            SceneMethod::Detector => detect_scenes(
                &bins,
                &SceneDetectorConfig {
                    k: s.k,
                    m: s.m,
                    margin_seconds: s.margin_seconds,
                },
            )?,
            SceneMethod::Volume => baseline_volume_peaks(&bins),
            SceneMethod::Meanstd => baseline_mean_std(&bins, s.n_sigma),
        };
        self.write_output(files::SCENES, jsonl(&scenes))
    }

    fn select_tweets(&self) -> Result<()> {
        let stage = Stage::SelectTweets;
        let scenes = self.scenes(stage)?;
        let messages = self.messages(stage)?;
        let aliases = self.aliases()?;
        let store = load_store(&self.read_input(&self.config.inputs.tweet_vectors)?)?;
        let by_id: HashMap<String, Message> = messages.into_iter().map(|m| (m.id.clone(), m)).collect();
        let mut rows = Vec::with_capacity(scenes.len());
        for (i, scene) in scenes.iter().enumerate() {
            let sel = select_scene_tweet(scene, &by_id, &store, &aliases)?;
            let msg = &by_id[&sel.message_id];
            rows.push(TweetRecord {
                scene: i,
                tweet_id: sel.message_id.clone(),
                text: msg.text.clone(),
                tier: sel.tier,
                characters: tag_mentions(msg, &aliases),
            });
        }
        self.write_output(files::TWEETS, jsonl(&rows))
    }

    fn weak_label(&self) -> Result<()> {
        let aliases = self.aliases()?;
        let mut faces_out = Vec::new();
        let mut reports = Vec::new();
        for (i, ep) in self.config.episodes.iter().enumerate() {
            let episode = i as u32;
            let store = load_store(&self.read_input(&ep.faces)?)?;
            let faces = store.face_records()?;
            let mut merged_cues = Vec::new();
            let intervals = match &ep.intervals {
                Some(p) => {
                    let mut ivs = parse_intervals(&self.read_input(p)?)?;
                    for iv in &mut ivs {
                        iv.speaker = aliases
                            .resolve(&iv.speaker)
                            .ok_or_else(|| Error::UnknownSpeaker(iv.speaker.clone()))?
                            .to_string();
                    }
                    ivs
                }
                None => {
                    let subs = ep.subtitles.as_ref().expect("validated");
                    let script = ep.transcript.as_ref().expect("validated");
                    let track = parse_srt(&self.read_input(subs)?)?;
                    let lines = parse_transcript(&self.read_input(script)?, Some(&aliases))?;
                    merged_cues = track.merged.clone();
                    align(&track.cues, &lines)
                }
            };
            let total = faces.len();
            let cfg = WeakLabelConfig {
                window_seconds: self.config.weak_label.window_seconds,
                max_faces_per_frame: self.config.weak_label.max_faces_per_frame,
                video_start_t: ep.video_start_t,
            };
            let outcome = assign_weak_labels(faces, &intervals, &cfg);
            reports.push(EpisodeReport {
                episode,
                faces: total,
                kept: outcome.faces.len(),
                dropped_crowded: outcome.dropped_crowded.len(),
                dropped_unlabeled: outcome.dropped_unlabeled.len(),
                multi_label_share: outcome.multi_label_share(),
                intervals: intervals.len(),
                merged_cues,
            });
            faces_out.extend(outcome.faces.into_iter().map(|f| WeakFace {
                id: f.embedded.id,
                episode,
                t: f.embedded.t,
                frame_id: f.frame_id,
                labels: f.weak_labels,
                vec: f.embedded.vector,
            }));
        }
        self.write_output(files::WEAK_LABELS, jsonl(&faces_out))?;
        self.write_output(files::WEAK_LABEL_REPORT, pretty(&reports))
    }

    fn training_examples(&self, stage: Stage, space: &LabelSpace) -> Result<Vec<PartialExample>> {
        let faces: Vec<WeakFace> = parse_jsonl(&self.read_output(stage, files::WEAK_LABELS)?)?;
        faces
            .into_iter()
            .map(|f| PartialExample::from_names(space, f.vec, &f.labels.iter().collect::<Vec<_>>(), f.episode))
            .collect()
    }

    fn train_faces(&self) -> Result<()> {
        let aliases = self.aliases()?;
        let space = self.label_space(&aliases)?;
        let examples = self.training_examples(Stage::TrainFaces, &space)?;
        let trained = train(&space, &examples, &self.config.train)?;
        self.write_output(files::MODEL, write_checkpoint(&trained.model, &self.config.train))?;
        self.write_output(files::TRAIN_LOG, jsonl(&trained.log))
    }

    fn model(&self, stage: Stage) -> Result<SoftmaxModel> {
        Ok(read_checkpoint(&self.read_output_bytes(stage, files::MODEL)?)?.0)
    }

    fn tweets(&self, stage: Stage) -> Result<Vec<TweetRecord>> {
        parse_jsonl(&self.read_output(stage, files::TWEETS)?)
    }

    fn select_frames(&self) -> Result<()> {
        let stage = Stage::SelectFrames;
        let scenes = self.scenes(stage)?;
        let tweets = self.tweets(stage)?;
        let model = self.model(stage)?;
        let frame_store = load_store(&self.read_input(&self.config.inputs.frame_vectors)?)?;
        let face_store = load_store(&self.read_input(&self.config.inputs.face_vectors)?)?;
        let faces: Vec<FaceRecord> = face_store.face_records()?;
        validate_face_links(&faces, &frame_store)?;
        let mut rows = Vec::with_capacity(scenes.len());
        for tw in &tweets {
            let scene = scenes.get(tw.scene).ok_or_else(|| Error::Record {
                line: tw.scene + 1,
                reason: "tweet refers to a scene that does not exist".into(),
            })?;
            let selection = select_frames(scene, &tw.characters, &frame_store, &faces, &model, &self.config.frames)?;
            rows.push(FrameRecord {
                scene: tw.scene,
                selection,
            });
        }
        self.write_output(files::FRAMES, jsonl(&rows))
    }

    fn summarize(&self) -> Result<()> {
        let stage = Stage::Summarize;
        let scenes = self.scenes(stage)?;
        let tweets = self.tweets(stage)?;
        let frames: Vec<FrameRecord> = parse_jsonl(&self.read_output(stage, files::FRAMES)?)?;
        if tweets.len() != scenes.len() || frames.len() != scenes.len() {
            return Err(Error::Config(format!(
                "stage outputs disagree: {} scenes, {} tweets, {} frame selections",
                scenes.len(),
                tweets.len(),
                frames.len()
            )));
        }
        let scene_tweets: Vec<SceneTweet> = tweets
            .iter()
            .map(|t| SceneTweet {
                tweet_id: t.tweet_id.clone(),
                text: t.text.clone(),
                tier: t.tier,
            })
            .collect();
        let selections: Vec<FrameSelection> = frames.into_iter().map(|f| f.selection).collect();
        let entries = assemble_summary(&scenes, &scene_tweets, &selections);
        let pattern = &self.config.report.image_pattern;
        let report = render_report(&entries, &self.config.report.title, |id| pattern.replace("{frame_id}", id));
        self.write_output(files::SUMMARY, write_summary(&entries))?;
        self.write_output(files::REPORT, report)
    }

    fn eval_scenes(&self) -> Result<()> {
        let stage = Stage::EvalScenes;
        let gold_path = self
            .config
            .inputs
            .gold_scenes
            .as_ref()
            .ok_or_else(|| Error::Config("eval-scenes needs `inputs.gold_scenes`".into()))?;
        let gold = parse_gold_scenes(&self.read_input(gold_path)?)?;
        let scenes = self.scenes(stage)?;
        let bins = self.bins(stage)?;
        let s = &self.config.scenes;
        let eval = SceneEvaluation {
            method: s.method,
            margin_seconds: s.margin_seconds,
            predicted: scenes.len(),
            gold: gold.len(),
            scenes: evaluate_scenes(&scenes, &gold, s.margin_seconds),
            volume_baseline: evaluate_scenes(&baseline_volume_peaks(&bins), &gold, s.margin_seconds),
            mean_std_baseline: evaluate_scenes(&baseline_mean_std(&bins, s.n_sigma), &gold, s.margin_seconds),
        };
        self.write_output(files::SCENE_EVAL, pretty(&eval))
    }

    fn eval_faces(&self) -> Result<()> {
        let stage = Stage::EvalFaces;
        let test_path = self
            .config
            .inputs
            .test_faces
            .as_ref()
            .ok_or_else(|| Error::Config("eval-faces needs `inputs.test_faces`".into()))?;
        let aliases = self.aliases()?;
        let space = self.label_space(&aliases)?;
        let raw: Vec<TestFace> = parse_jsonl(&self.read_input(test_path)?)?;
        let test: Vec<LabeledFace> = raw
            .into_iter()
            .map(|f| {
                let name = aliases
                    .resolve(&f.label)
                    .ok_or_else(|| Error::UnknownLabel(format!("{} (face {})", f.label, f.id)))?;
                let label = space.index_of(name).ok_or_else(|| Error::UnknownLabel(name.to_string()))?;
                Ok(LabeledFace { x: f.vec, label })
            })
            .collect::<Result<_>>()?;
        let model = self.model(stage)?;
        let examples = self.training_examples(stage, &space)?;
        let kmeans = kmeans_baseline(&space, &examples, &test, &KMeansConfig::new(space.len(), self.config.seed))?;
        let naive = naive_multilabel_baseline(&space, &examples, &self.config.train)?;
        let eval = FaceEvaluation {
            test_faces: test.len(),
            model: evaluate_accuracy(&model, &test),
            kmeans_accuracy: kmeans,
            naive_accuracy: evaluate_accuracy(&naive, &test).micro_accuracy,
        };
        self.write_output(files::FACE_EVAL, pretty(&eval))
    }
}
