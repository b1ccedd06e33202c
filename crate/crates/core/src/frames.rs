//! Picks video frames for each scene and assembles the summary.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classifier::SoftmaxModel;
use crate::embedding::{centroid, cosine, norm, EmbeddedItem, EmbeddingStore, FaceRecord, ItemKind};
use crate::error::Result;
use crate::scenes::Scene;
use crate::tweets::SelectionTier;

/// Label used for the frame showing every tweet character together.
pub const ALL: &str = "ALL";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameSelectionConfig {
    /// A face must give a character probability strictly above this.
    pub confidence_threshold: f64,
    /// Frames kept per character (and for the joint frame).
    pub frames_per_character: usize,
}

impl Default for FrameSelectionConfig {
    fn default() -> Self {
        FrameSelectionConfig {
            confidence_threshold: 0.5,
            frames_per_character: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFrame {
    pub frame_id: String,
    pub t: i64,
    /// A character name, or [`ALL`].
    pub who: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmittedCharacter {
    pub who: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameSelection {
    /// Ordered by `t`, then `frame_id`, then `who`.
    pub frames: Vec<SelectedFrame>,
    pub omitted: Vec<OmittedCharacter>,
}

/// Per-frame confidence for each label: the maximum face probability over
/// the frame's faces.
pub fn frame_confidences(
    frame_ids: &BTreeSet<&str>,
    faces: &[FaceRecord],
    model: &SoftmaxModel,
) -> Result<HashMap<String, Vec<f64>>> {
    let mut out: HashMap<String, Vec<f64>> = HashMap::new();
    for face in faces {
        if !frame_ids.contains(face.frame_id.as_str()) {
            continue;
        }
        let p = model.predict(&face.embedded.vector)?;
        match out.get_mut(&face.frame_id) {
            Some(best) => {
                for (b, v) in best.iter_mut().zip(&p) {
                    *b = b.max(*v);
                }
            }
            None => {
                out.insert(face.frame_id.clone(), p);
            }
        }
    }
    Ok(out)
}

/// Orders candidates by cosine to their own centroid (descending), then
/// confidence (descending), then earlier `t`, then smaller id. Frames whose
/// cosine is undefined rank below all others.
pub fn rank_candidates<'a>(candidates: &[(&'a EmbeddedItem, f64)]) -> Vec<(&'a EmbeddedItem, f64)> {
    let Ok(center) = centroid(candidates.iter().map(|(f, _)| f.vector.as_slice())) else {
        return Vec::new();
    };
    let center_ok = norm(&center) > 0.0;
    let mut scored: Vec<(f64, &EmbeddedItem, f64)> = candidates
        .iter()
        .map(|&(f, conf)| {
            let sim = if center_ok {
                cosine(&f.vector, &center).unwrap_or(f64::NEG_INFINITY)
            } else {
                f64::NEG_INFINITY
            };
            (sim, f, conf)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(b.2.total_cmp(&a.2))
            .then(a.1.t.cmp(&b.1.t))
            .then(a.1.id.cmp(&b.1.id))
    });
    scored.into_iter().map(|(_, f, c)| (f, c)).collect()
}

/// Selects frames from `[scene.start_t, scene.end_t)` for each character
/// named in the scene's tweet.
///
/// A frame is a candidate for a character when one of its faces gives that
/// character a probability above the threshold; its confidence is the best
/// such probability. With two or more characters, a joint [`ALL`] frame is
/// also chosen from frames that are candidates for every character, scored
/// by the weakest of those confidences. The same frame may be listed under
/// several names.
pub fn select_frames(
    scene: &Scene,
    tweet_characters: &BTreeSet<String>,
    frame_store: &EmbeddingStore,
    faces: &[FaceRecord],
    model: &SoftmaxModel,
    cfg: &FrameSelectionConfig,
) -> Result<FrameSelection> {
    let window: Vec<&EmbeddedItem> = frame_store
        .in_window(scene.start_t, scene.end_t)
        .iter()
        .filter(|it| it.kind == ItemKind::Frame)
        .collect();
    let mut selection = FrameSelection::default();
    if window.is_empty() {
        selection.omitted = tweet_characters
            .iter()
            .map(|c| OmittedCharacter {
                who: c.clone(),
                reason: "no frames in the scene window".into(),
            })
            .collect();
        return Ok(selection);
    }
    let ids: BTreeSet<&str> = window.iter().map(|f| f.id.as_str()).collect();
    let conf = frame_confidences(&ids, faces, model)?;
    let space = &model.labels;

    let mut known: Vec<(&String, usize)> = Vec::new();
    for c in tweet_characters {
        match space.index_of(c) {
            Some(i) => known.push((c, i)),
            None => selection.omitted.push(OmittedCharacter {
                who: c.clone(),
                reason: "not in the face model's label space".into(),
            }),
        }
    }

    let candidates_for = |score: &dyn Fn(&[f64]) -> Option<f64>| -> Vec<(&EmbeddedItem, f64)> {
        window
            .iter()
            .filter_map(|f| conf.get(&f.id).and_then(|p| score(p)).map(|s| (*f, s)))
            .collect()
    };
    let threshold = cfg.confidence_threshold;
    let take = |who: &str, cands: Vec<(&EmbeddedItem, f64)>, selection: &mut FrameSelection| {
        if cands.is_empty() {
            selection.omitted.push(OmittedCharacter {
                who: who.to_string(),
                reason: format!("no frame with confidence above {threshold}"),
            });
            return;
        }
        for (f, c) in rank_candidates(&cands).into_iter().take(cfg.frames_per_character) {
            selection.frames.push(SelectedFrame {
                frame_id: f.id.clone(),
                t: f.t,
                who: who.to_string(),
                confidence: c,
            });
        }
    };

    for &(name, idx) in &known {
        let cands = candidates_for(&|p: &[f64]| (p[idx] > threshold).then_some(p[idx]));
        take(name, cands, &mut selection);
    }
    if tweet_characters.len() >= 2 && known.len() == tweet_characters.len() {
        let idxs: Vec<usize> = known.iter().map(|&(_, i)| i).collect();
        let cands = candidates_for(&|p: &[f64]| {
            idxs.iter()
                .all(|&i| p[i] > threshold)
                .then(|| idxs.iter().map(|&i| p[i]).fold(f64::INFINITY, f64::min))
        });
        take(ALL, cands, &mut selection);
    }
    selection
        .frames
        .sort_by(|a, b| a.t.cmp(&b.t).then_with(|| a.frame_id.cmp(&b.frame_id)).then_with(|| a.who.cmp(&b.who)));
    Ok(selection)
}

/// One line of the summary file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub start_t: i64,
    pub end_t: i64,
    pub trigger_characters: BTreeSet<String>,
    pub tweet_id: String,
    pub tweet_text: String,
    pub tier: SelectionTier,
    pub frames: Vec<SelectedFrame>,
    pub omitted: Vec<OmittedCharacter>,
    /// Set when no frame was selected at all.
    pub tweet_only: bool,
}

/// The tweet chosen for a scene, with its text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTweet {
    pub tweet_id: String,
    pub text: String,
    pub tier: SelectionTier,
}

/// Builds one entry per scene, in chronological order.
///
/// # Panics
///
/// If the three slices differ in length.
pub fn assemble_summary(scenes: &[Scene], tweets: &[SceneTweet], frames: &[FrameSelection]) -> Vec<SummaryEntry> {
    assert!(
        scenes.len() == tweets.len() && tweets.len() == frames.len(),
        "summary inputs must be index-aligned"
    );
    let mut entries: Vec<SummaryEntry> = scenes
        .iter()
        .zip(tweets)
        .zip(frames)
        .map(|((s, tw), fr)| SummaryEntry {
            start_t: s.start_t,
            end_t: s.end_t,
            trigger_characters: s.trigger_characters.clone(),
            tweet_id: tw.tweet_id.clone(),
            tweet_text: tw.text.clone(),
            tier: tw.tier,
            frames: fr.frames.clone(),
            omitted: fr.omitted.clone(),
            tweet_only: fr.frames.is_empty(),
        })
        .collect();
    entries.sort_by_key(|e| (e.start_t, e.end_t));
    entries
}

pub fn write_summary(entries: &[SummaryEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("entry serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_summary(source: &str) -> Result<Vec<SummaryEntry>> {
    source
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

fn clock(t: i64) -> String {
    let s = t.rem_euclid(86_400);
    format!("{:02}:{:02}:{:02}", s / 3600, s % 3600 / 60, s % 60)
}

/// Markdown rendering of the summary. `image_path` maps a frame id to the
/// path written into the image link.
pub fn render_report<F>(entries: &[SummaryEntry], title: &str, image_path: F) -> String
where
    F: Fn(&str) -> String,
{
    let mut out = format!("# {title}\n");
    for (i, e) in entries.iter().enumerate() {
        let who: Vec<&str> = e.trigger_characters.iter().map(String::as_str).collect();
        let _ = write!(
            out,
            "\n## Scene {} ({} to {})\n\nTriggered by: {}\n\n> {}\n",
            i + 1,
            clock(e.start_t),
            clock(e.end_t),
            if who.is_empty() { "-".to_string() } else { who.join(", ") },
            e.tweet_text.replace('\n', " ")
        );
        if e.tweet_only {
            out.push_str("\n_No frames selected._\n");
        }
        let mut by_frame: BTreeMap<(i64, &str), Vec<String>> = BTreeMap::new();
        for f in &e.frames {
            by_frame
                .entry((f.t, f.frame_id.as_str()))
                .or_default()
                .push(format!("{} {:.2}", f.who, f.confidence));
        }
        for ((t, id), labels) in by_frame {
            let _ = write!(out, "\n![{id}]({})\n{} ({})\n", image_path(id), clock(t), labels.join("; "));
        }
        for o in &e.omitted {
            let _ = writeln!(out, "\n- {}: {}", o.who, o.reason);
        }
    }
    out
}
