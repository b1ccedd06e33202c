//! Seeded synthetic data: message streams with planted scenes, a
//! partial-label face benchmark, and a complete event for the pipeline.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::classifier::{LabelSpace, LabeledFace, PartialExample, TrainConfig};
use crate::corpus::{write_messages, AliasTable, Message};
use crate::embedding::{write_records, ItemKind, VectorRecord};
use crate::error::{Error, Result};
use crate::frames::FrameSelectionConfig;
use crate::pipeline::{EpisodeInput, InputPaths, PipelineConfig, ReportSettings, SceneSettings, WeakLabelSettings};
use crate::scenes::GoldScene;
use crate::weak_label::{write_srt, SubtitleCue, TranscriptLine};

pub const CHARACTERS: [&str; 5] = ["Ada Stone", "Ben Ortiz", "Cleo Park", "Dev Rao", "Eve Lind"];
/// Mentioned lightly in every minute; never spikes.
pub const HOST: &str = "Max Hale";

const PHRASES: [&str; 10] = [
    "what a moment",
    "cannot believe this",
    "the crowd is loving it",
    "big night tonight",
    "this is getting intense",
    "so good",
    "here we go",
    "nobody saw that coming",
    "my heart",
    "best part so far",
];

const WORDS: [&str; 48] = [
    "river", "window", "silver", "garden", "winter", "engine", "harbor", "candle", "forest", "mirror", "ladder",
    "copper", "meadow", "pepper", "tunnel", "violet", "anchor", "bridge", "canyon", "desert", "falcon", "glacier",
    "hollow", "island", "jungle", "kettle", "lantern", "marble", "needle", "orchard", "pillow", "quarry", "rocket",
    "saddle", "timber", "umbrella", "velvet", "walnut", "yonder", "zephyr", "basket", "cobalt", "dagger", "ember",
    "fabric", "goblet", "hammer", "ivory",
];

fn aliases_of(name: &str) -> Vec<String> {
    let mut v: Vec<String> = name.split_whitespace().map(str::to_string).collect();
    v.push(name.to_string());
    v
}

/// Alias table over `names`: first name, last name and full name each.
pub fn alias_table(names: &[&str]) -> AliasTable {
    let mut t = AliasTable::new();
    for n in names {
        for a in aliases_of(n) {
            t.insert(n, &a).expect("synthetic aliases are distinct");
        }
    }
    t
}

/// The same table in the `{name, aliases}` line format.
pub fn alias_file(names: &[&str]) -> String {
    #[derive(Serialize)]
    struct Row<'a> {
        name: &'a str,
        aliases: Vec<String>,
    }
    names
        .iter()
        .map(|n| {
            serde_json::to_string(&Row {
                name: n,
                aliases: aliases_of(n),
            })
            .expect("serializes")
                + "\n"
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SceneStreamSpec {
    pub origin: i64,
    pub minutes: usize,
    pub background_per_minute: usize,
    /// Minute index at which each planted scene starts; one character each.
    pub spike_minutes: Vec<usize>,
    pub scene_minutes: usize,
    /// Per-minute message counts for the first minutes of a loud scene.
    pub loud_volume: Vec<usize>,
    /// Scenes (by position in `spike_minutes`) that keep background volume.
    pub quiet_scenes: Vec<usize>,
    /// Share of messages naming the scene's character, per scene minute.
    pub mention_profile: Vec<f64>,
}

impl Default for SceneStreamSpec {
    fn default() -> Self {
        SceneStreamSpec {
            origin: 1_600_000_000,
            minutes: 60,
            background_per_minute: 30,
            spike_minutes: vec![5, 17, 29, 41, 53],
            scene_minutes: 5,
            loud_volume: vec![90, 60, 45],
            quiet_scenes: Vec::new(),
            mention_profile: vec![0.5, 0.3, 0.3, 0.1, 0.1],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SceneStream {
    pub messages: Vec<Message>,
    pub characters: Vec<String>,
    pub gold: Vec<GoldScene>,
    /// Per-minute message counts.
    pub volume: Vec<usize>,
}

impl SceneStream {
    pub fn names(&self) -> Vec<&str> {
        self.characters.iter().map(String::as_str).chain([HOST]).collect()
    }
}

/// A stream where each planted scene opens with one character dominating
/// the conversation. Outside planted scenes only the host is mentioned, once
/// a minute.
pub fn scene_stream(spec: &SceneStreamSpec, seed: u64) -> SceneStream {
    assert!(spec.spike_minutes.len() <= CHARACTERS.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let characters: Vec<String> = CHARACTERS[..spec.spike_minutes.len()].iter().map(|s| s.to_string()).collect();
    let mut messages = Vec::new();
    let mut volume = Vec::with_capacity(spec.minutes);
    for minute in 0..spec.minutes {
        let active = spec
            .spike_minutes
            .iter()
            .enumerate()
            .find(|(_, &s)| minute >= s && minute < s + spec.scene_minutes)
            .map(|(i, &s)| (i, minute - s));
        let count = match active {
            Some((i, off)) if !spec.quiet_scenes.contains(&i) => {
                spec.loud_volume.get(off).copied().unwrap_or(spec.background_per_minute)
            }
            _ => spec.background_per_minute,
        };
        let mentions = match active {
            Some((_, off)) => (spec.mention_profile.get(off).copied().unwrap_or(0.0) * count as f64).round() as usize,
            None => 0,
        };
        volume.push(count);
        let start = spec.origin + 60 * minute as i64;
        for j in 0..count {
            let phrase = *PHRASES.choose(&mut rng).expect("non-empty");
            let text = if j < mentions {
                let (i, _) = active.expect("mentions imply a scene");
                let alias = aliases_of(&characters[i]).choose(&mut rng).cloned().expect("aliases");
                if rng.random_bool(0.5) {
                    format!("{alias} {phrase}")
                } else {
                    format!("{phrase} {alias}!")
                }
            } else if j == mentions {
                format!("{phrase}, says {}", aliases_of(HOST).choose(&mut rng).expect("aliases"))
            } else {
                phrase.to_string()
            };
            messages.push(Message {
                id: format!("m{minute:03}-{j:03}"),
                t: start + (j * 60 / count) as i64,
                author: format!("user{}", rng.random_range(0..500)),
                text,
            });
        }
    }
    messages.sort_by_key(|m| m.t);
    let gold = spec
        .spike_minutes
        .iter()
        .zip(&characters)
        .map(|(&s, c)| GoldScene {
            start_t: spec.origin + 60 * s as i64,
            end_t: spec.origin + 60 * (s + spec.scene_minutes) as i64,
            description: Some(format!("{c} takes the stage")),
        })
        .collect();
    SceneStream {
        messages,
        characters,
        gold,
        volume,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BenchmarkSpec {
    pub classes: usize,
    pub dim: usize,
    /// Class `c` is centered at `signal * e_c`.
    pub signal: f64,
    pub sigma: f64,
    /// Dimensions right after the class axes with inflated, label-free
    /// variance.
    pub nuisance_dims: usize,
    pub nuisance_sigma: f64,
    pub episodes: usize,
    pub faces_per_episode: usize,
    pub test_faces: usize,
    /// Chance that a face of a non-dominant class is paired with class 0.
    pub dominant_distractor_p: f64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            classes: 4,
            dim: 16,
            signal: 3.0,
            sigma: 1.0,
            nuisance_dims: 0,
            nuisance_sigma: 3.0,
            episodes: 4,
            faces_per_episode: 200,
            test_faces: 200,
            dominant_distractor_p: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PartialLabelBenchmark {
    pub space: LabelSpace,
    pub train: Vec<PartialExample>,
    pub test: Vec<LabeledFace>,
}

/// One face embedding of class `c`.
pub fn sample_face(spec: &BenchmarkSpec, c: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let base = Normal::new(0.0, spec.sigma).expect("finite sigma");
    let nuisance = Normal::new(0.0, spec.nuisance_sigma).expect("finite sigma");
    (0..spec.dim)
        .map(|d| {
            let noise = if d >= spec.classes && d < spec.classes + spec.nuisance_dims {
                nuisance.sample(rng)
            } else {
                base.sample(rng)
            };
            noise + if d == c { spec.signal } else { 0.0 }
        })
        .collect()
}

/// The co-occurring character shown alongside a face of class `c`. Class 0
/// is the dominant character: most other classes appear next to it, and it
/// appears next to anyone.
pub fn distractor(spec: &BenchmarkSpec, c: usize, rng: &mut ChaCha8Rng) -> usize {
    let n = spec.classes;
    if c == 0 {
        rng.random_range(1..n)
    } else if rng.random_bool(spec.dominant_distractor_p) {
        0
    } else {
        // cycle over the non-dominant classes
        c % (n - 1) + 1
    }
}

/// Gaussian faces, each weakly labeled with its true class plus one
/// distractor; test faces are clean.
pub fn partial_label_benchmark(spec: &BenchmarkSpec, seed: u64) -> PartialLabelBenchmark {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = LabelSpace::new((0..spec.classes).map(|c| format!("person{c}"))).expect("distinct");
    let mut train = Vec::with_capacity(spec.episodes * spec.faces_per_episode);
    for ep in 0..spec.episodes {
        for _ in 0..spec.faces_per_episode {
            let c = rng.random_range(0..spec.classes);
            let x = sample_face(spec, c, &mut rng);
            let d = distractor(spec, c, &mut rng);
            train.push(PartialExample::new(x, vec![c, d], ep as u32));
        }
    }
    let test = (0..spec.test_faces)
        .map(|_| {
            let c = rng.random_range(0..spec.classes);
            LabeledFace {
                x: sample_face(spec, c, &mut rng),
                label: c,
            }
        })
        .collect();
    PartialLabelBenchmark { space, train, test }
}

/// Recorded episode of the show, used for weak labeling.
#[derive(Debug, Clone)]
pub struct SyntheticEpisode {
    pub video_start_t: i64,
    pub cues: Vec<SubtitleCue>,
    pub transcript: Vec<TranscriptLine>,
    pub faces: Vec<VectorRecord>,
    /// True identity of every face, by face id.
    pub truth: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestFaceRecord {
    pub id: String,
    pub label: String,
    pub vec: Vec<f64>,
}

/// A full event: commentary stream, embeddings, previous episodes and
/// labeled test faces.
#[derive(Debug, Clone)]
pub struct EventFixture {
    pub stream: SceneStream,
    pub tweet_vectors: Vec<VectorRecord>,
    pub frame_vectors: Vec<VectorRecord>,
    pub face_vectors: Vec<VectorRecord>,
    pub episodes: Vec<SyntheticEpisode>,
    pub test_faces: Vec<TestFaceRecord>,
}

pub const FIXTURE_TEXT_DIM: usize = 8;

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    let v: Vec<f64> = (0..dim).map(|_| n.sample(rng)).collect();
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / len).collect()
}

fn noisy(center: &[f64], scale: f64, noise: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = Normal::new(0.0, noise).expect("finite noise");
    center.iter().map(|c| c * scale + n.sample(rng)).collect()
}

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let words: Vec<&str> = WORDS.choose_multiple(rng, 6).copied().collect();
    words.join(" ")
}

fn episode(
    names: &[&str],
    face_spec: &BenchmarkSpec,
    index: usize,
    video_start_t: i64,
    rng: &mut ChaCha8Rng,
) -> SyntheticEpisode {
    const TURNS: usize = 20;
    const TURN_MS: i64 = 12_000;
    let mut cues = Vec::new();
    let mut transcript = Vec::new();
    let mut speakers = Vec::new();
    let mut prev = usize::MAX;
    for turn in 0..TURNS {
        let mut s = rng.random_range(0..names.len());
        if s == prev {
            s = (s + 1) % names.len();
        }
        prev = s;
        speakers.push(s);
        let start = turn as i64 * TURN_MS;
        let (a, b) = (sentence(rng), sentence(rng));
        let italic = turn % 7 == 3;
        cues.push(SubtitleCue {
            index: cues.len() as u32 + 1,
            start_ms: start,
            end_ms: start + 5_000,
            text: if italic { format!("<i>{a}</i>") } else { a.clone() },
        });
        cues.push(SubtitleCue {
            index: cues.len() as u32 + 1,
            start_ms: start + 6_000,
            end_ms: start + 11_000,
            text: b.clone(),
        });
        transcript.push(TranscriptLine {
            // speakers appear under their first name in the transcript
            speaker: names[s].split_whitespace().next().expect("non-empty").to_string(),
            text: format!("{a} {b}"),
        });
    }
    let mut faces = Vec::new();
    let mut truth = Vec::new();
    let push_face = |faces: &mut Vec<VectorRecord>, truth: &mut Vec<(String, String)>, frame: &str, sec: i64, c: usize, rng: &mut ChaCha8Rng| {
        let id = format!("e{index}-face{:04}", faces.len());
        faces.push(VectorRecord {
            id: id.clone(),
            t: video_start_t + sec,
            kind: ItemKind::Face,
            vec: sample_face(face_spec, c, rng),
            frame_id: Some(frame.to_string()),
        });
        truth.push((id, names[c].to_string()));
    };
    let length_s = TURNS as i64 * TURN_MS / 1000;
    let mut sec = 1;
    while sec < length_s {
        let frame = format!("e{index}-frame{sec:04}");
        let speaker = speakers[(sec * 1000 / TURN_MS) as usize];
        push_face(&mut faces, &mut truth, &frame, sec, speaker, rng);
        if sec % 10 == 5 {
            let listener = (speaker + rng.random_range(1..names.len())) % names.len();
            push_face(&mut faces, &mut truth, &frame, sec, listener, rng);
        }
        sec += 2;
    }
    // one crowd shot
    let crowd = format!("e{index}-frame-crowd");
    for c in 0..6 {
        push_face(&mut faces, &mut truth, &crowd, 30, c % names.len(), rng);
    }
    SyntheticEpisode {
        video_start_t,
        cues,
        transcript,
        faces,
        truth,
    }
}

/// A 24-minute event with three planted scenes, three previous episodes and
/// 25 clean test faces per character.
pub fn event_fixture(seed: u64) -> EventFixture {
    let spec = SceneStreamSpec {
        minutes: 24,
        spike_minutes: vec![3, 11, 19],
        ..Default::default()
    };
    let stream = scene_stream(&spec, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let names = stream.names();
    let face_spec = BenchmarkSpec {
        classes: names.len(),
        ..Default::default()
    };

    let scene_of = |t: i64| stream.gold.iter().position(|g| t >= g.start_t && t < g.end_t);
    let topics: Vec<Vec<f64>> = (0..stream.gold.len()).map(|_| unit(&mut rng, FIXTURE_TEXT_DIM)).collect();
    let lull = vec![0.0; FIXTURE_TEXT_DIM];
    let tweet_vectors = stream
        .messages
        .iter()
        .map(|m| {
            let center = scene_of(m.t).map_or(&lull, |i| &topics[i]);
            VectorRecord {
                id: m.id.clone(),
                t: m.t,
                kind: ItemKind::Tweet,
                vec: noisy(center, 3.0, 1.0, &mut rng),
                frame_id: None,
            }
        })
        .collect();

    let shots: Vec<Vec<f64>> = (0..stream.gold.len()).map(|_| unit(&mut rng, FIXTURE_TEXT_DIM)).collect();
    let host = names.len() - 1;
    let mut frame_vectors = Vec::new();
    let mut face_vectors = Vec::new();
    for step in 0..(spec.minutes * 6) {
        let t = spec.origin + 10 * step as i64 + 5;
        let id = format!("frame{step:04}");
        let scene = scene_of(t);
        let center = scene.map_or(&lull, |i| &shots[i]);
        frame_vectors.push(VectorRecord {
            id: id.clone(),
            t,
            kind: ItemKind::Frame,
            vec: noisy(center, 3.0, 1.0, &mut rng),
            frame_id: None,
        });
        let mut on_screen = vec![scene.unwrap_or(host)];
        if scene.is_some() && step % 4 == 0 {
            on_screen.push(host);
        }
        for (k, c) in on_screen.into_iter().enumerate() {
            face_vectors.push(VectorRecord {
                id: format!("{id}-face{k}"),
                t,
                kind: ItemKind::Face,
                vec: sample_face(&face_spec, c, &mut rng),
                frame_id: Some(id.clone()),
            });
        }
    }

    let episodes = (0..3)
        .map(|i| episode(&names, &face_spec, i, spec.origin - 86_400 * (3 - i as i64), &mut rng))
        .collect();
    let mut test_faces = Vec::new();
    for (c, name) in names.iter().enumerate() {
        for j in 0..25 {
            test_faces.push(TestFaceRecord {
                id: format!("test-{c}-{j:02}"),
                label: name.to_string(),
                vec: sample_face(&face_spec, c, &mut rng),
            });
        }
    }
    EventFixture {
        stream,
        tweet_vectors,
        frame_vectors,
        face_vectors,
        episodes,
        test_faces,
    }
}

/// The distinct characters carrying a weak label in `episodes`.
pub fn episode_speakers(episodes: &[SyntheticEpisode]) -> BTreeSet<String> {
    episodes
        .iter()
        .flat_map(|e| e.transcript.iter().map(|l| l.speaker.clone()))
        .collect()
}

/// Writes `fixture` under `dir` with a `config.toml` that runs the whole
/// pipeline on it, and returns the config path.
pub fn write_event_fixture(fixture: &EventFixture, dir: &Path, seed: u64) -> Result<PathBuf> {
    let write = |name: &str, contents: String| -> Result<()> {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))
    };

    write("messages.jsonl", write_messages(&fixture.stream.messages))?;
    write("aliases.jsonl", alias_file(&fixture.stream.names()))?;
    write("tweet_vectors.jsonl", write_records(&fixture.tweet_vectors))?;
    write("frame_vectors.jsonl", write_records(&fixture.frame_vectors))?;
    write("face_vectors.jsonl", write_records(&fixture.face_vectors))?;
    write("gold_scenes.jsonl", jsonl(&fixture.stream.gold))?;
    write("test_faces.jsonl", jsonl(&fixture.test_faces))?;

    let mut episodes = Vec::new();
    for (i, ep) in fixture.episodes.iter().enumerate() {
        let srt = format!("episodes/ep{i}.srt");
        let transcript = format!("episodes/ep{i}_transcript.jsonl");
        let faces = format!("episodes/ep{i}_faces.jsonl");
        write(&srt, write_srt(&ep.cues))?;
        write(&transcript, jsonl(&ep.transcript))?;
        write(&faces, write_records(&ep.faces))?;
        episodes.push(EpisodeInput {
            faces: faces.into(),
            subtitles: Some(srt.into()),
            transcript: Some(transcript.into()),
            intervals: None,
            video_start_t: ep.video_start_t,
        });
    }

    let config = PipelineConfig {
        work_dir: "work".into(),
        seed,
        inputs: InputPaths {
            messages: "messages.jsonl".into(),
            aliases: "aliases.jsonl".into(),
            tweet_vectors: "tweet_vectors.jsonl".into(),
            frame_vectors: "frame_vectors.jsonl".into(),
            face_vectors: "face_vectors.jsonl".into(),
            gold_scenes: Some("gold_scenes.jsonl".into()),
            test_faces: Some("test_faces.jsonl".into()),
        },
        episodes,
        scenes: SceneSettings {
            k: 0.2,
            m: 0.05,
            ..Default::default()
        },
        weak_label: WeakLabelSettings::default(),
        frames: FrameSelectionConfig::default(),
        train: TrainConfig::default(),
        report: ReportSettings::default(),
    };
    let path = dir.join("config.toml");
    write("config.toml", config.to_toml())?;
    Ok(path)
}

fn jsonl<T: Serialize>(rows: &[T]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}
