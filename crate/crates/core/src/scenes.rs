//! Scene boundary detection from per-minute character mention fractions,
//! the two volume baselines, and scene-level precision/recall scoring.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::MinuteBin;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneDetectorConfig {
    /// A character must exceed this share of a minute's messages to start a scene.
    pub k: f64,
    /// ...and must be below this share of the open scene's messages.
    pub m: f64,
    #[serde(default)]
    pub margin_seconds: u64,
}

impl Default for SceneDetectorConfig {
    fn default() -> Self {
        SceneDetectorConfig {
            k: 0.10,
            m: 0.05,
            margin_seconds: 0,
        }
    }
}

impl SceneDetectorConfig {
    pub fn new(k: f64, m: f64) -> Result<Self> {
        let cfg = SceneDetectorConfig {
            k,
            m,
            margin_seconds: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k <= 1.0) {
            return Err(Error::InvalidSceneConfig(format!("k = {} not in (0, 1]", self.k)));
        }
        if !(self.m >= 0.0 && self.m < 1.0) {
            return Err(Error::InvalidSceneConfig(format!("m = {} not in [0, 1)", self.m)));
        }
        if self.m >= self.k {
            return Err(Error::InvalidSceneConfig(format!(
                "m = {} must be below k = {}",
                self.m, self.k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub start_t: i64,
    pub end_t: i64,
    pub trigger_characters: BTreeSet<String>,
    pub message_ids: Vec<String>,
}

struct OpenScene {
    start: usize,
    messages: usize,
    mentions: BTreeMap<String, usize>,
    triggers: BTreeSet<String>,
}

impl OpenScene {
    fn fraction(&self, name: &str) -> f64 {
        if self.messages == 0 {
            return 0.0;
        }
        self.mentions.get(name).copied().unwrap_or(0) as f64 / self.messages as f64
    }
}

fn close(bins: &[MinuteBin], open: OpenScene, end: usize) -> Scene {
    let span = &bins[open.start..end];
    Scene {
        start_t: span[0].start_t,
        end_t: span[span.len() - 1].end_t(),
        trigger_characters: open.triggers,
        message_ids: span.iter().flat_map(|b| b.messages.iter().cloned()).collect(),
    }
}

/// Splits a binned stream into sequential scenes.
///
/// A scene starts at a bin where some character's mention fraction is
/// strictly above `k` while that character's fraction over all messages of
/// the currently open scene (bins before this one) is strictly below `m`.
/// Every character qualifying at the same bin becomes a trigger of the one
/// new scene. Each scene runs until the next one starts; the last runs to
/// the end of the stream.
pub fn detect_scenes(bins: &[MinuteBin], cfg: &SceneDetectorConfig) -> Result<Vec<Scene>> {
    cfg.validate()?;
    let mut scenes = Vec::new();
    let mut open: Option<OpenScene> = None;
    for (i, bin) in bins.iter().enumerate() {
        let triggers: BTreeSet<String> = bin
            .mention_fraction
            .iter()
            .filter(|(name, &f)| {
                f > cfg.k && open.as_ref().is_none_or(|o| o.fraction(name) < cfg.m)
            })
            .map(|(name, _)| name.clone())
            .collect();
        if !triggers.is_empty() {
            if let Some(prev) = open.take() {
                scenes.push(close(bins, prev, i));
            }
            open = Some(OpenScene {
                start: i,
                messages: 0,
                mentions: BTreeMap::new(),
                triggers,
            });
        }
        if let Some(o) = open.as_mut() {
            o.messages += bin.len();
            for (name, &c) in &bin.mention_counts {
                *o.mentions.entry(name.clone()).or_default() += c;
            }
        }
    }
    if let Some(prev) = open {
        scenes.push(close(bins, prev, bins.len()));
    }
    Ok(scenes)
}

fn span_scene(bins: &[MinuteBin], first: usize, last: usize, peak: usize) -> Scene {
    let top = bins[peak].mention_fraction.values().cloned().fold(0.0, f64::max);
    let trigger_characters = bins[peak]
        .mention_fraction
        .iter()
        .filter(|(_, &f)| f > 0.0 && f == top)
        .map(|(n, _)| n.clone())
        .collect();
    Scene {
        start_t: bins[first].start_t,
        end_t: bins[last].end_t(),
        trigger_characters,
        message_ids: bins[first..=last]
            .iter()
            .flat_map(|b| b.messages.iter().cloned())
            .collect(),
    }
}

/// Volume-peak baseline: one scene per strict local maximum of the
/// per-minute message count, spanning its strictly increasing ascent and
/// strictly decreasing descent.
///
/// Baseline scenes name the most-mentioned characters of the peak minute as
/// triggers; that set is empty when the peak minute mentions nobody.
pub fn baseline_volume_peaks(bins: &[MinuteBin]) -> Vec<Scene> {
    let counts: Vec<usize> = bins.iter().map(MinuteBin::len).collect();
    let mut scenes = Vec::new();
    for p in 1..counts.len().saturating_sub(1) {
        if !(counts[p] > counts[p - 1] && counts[p] > counts[p + 1]) {
            continue;
        }
        let mut first = p;
        while first > 0 && counts[first - 1] < counts[first] {
            first -= 1;
        }
        let mut last = p;
        while last + 1 < counts.len() && counts[last + 1] < counts[last] {
            last += 1;
        }
        scenes.push(span_scene(bins, first, last, p));
    }
    scenes
}

/// Mean/standard-deviation baseline: every maximal run of minutes whose
/// count is strictly above `mean + n_sigma * std` (population std) is a
/// scene.
pub fn baseline_mean_std(bins: &[MinuteBin], n_sigma: f64) -> Vec<Scene> {
    if bins.is_empty() {
        return Vec::new();
    }
    let counts: Vec<f64> = bins.iter().map(|b| b.len() as f64).collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    let threshold = mean + n_sigma * var.sqrt();
    let mut scenes = Vec::new();
    let mut i = 0;
    while i < counts.len() {
        if counts[i] > threshold {
            let first = i;
            while i + 1 < counts.len() && counts[i + 1] > threshold {
                i += 1;
            }
            let peak = (first..=i)
                .max_by(|&a, &b| counts[a].total_cmp(&counts[b]).then(b.cmp(&a)))
                .unwrap();
            scenes.push(span_scene(bins, first, i, peak));
        }
        i += 1;
    }
    scenes
}

/// A reference scene interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldScene {
    pub start_t: i64,
    pub end_t: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

pub fn parse_gold_scenes(source: &str) -> Result<Vec<GoldScene>> {
    let mut out = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let g: GoldScene = serde_json::from_str(raw).map_err(|e| Error::Record {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if g.end_t < g.start_t {
            return Err(Error::Record {
                line: i + 1,
                reason: "end_t before start_t".into(),
            });
        }
        out.push(g);
    }
    out.sort_by_key(|g| g.start_t);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// (predicted index, gold index)
    pub matched: Vec<(usize, usize)>,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Scores predicted scene starts against reference intervals.
///
/// A prediction matches a reference scene when its start lies in
/// `[gold.start - margin, gold.end + margin]`. Predictions are visited in
/// time order and each takes the earliest unmatched reference it falls in.
/// Two empty lists score 1.0 across the board.
pub fn evaluate_scenes(pred: &[Scene], gold: &[GoldScene], margin_seconds: u64) -> SceneEvalReport {
    if pred.is_empty() && gold.is_empty() {
        return SceneEvalReport {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            matched: Vec::new(),
        };
    }
    let margin = margin_seconds as i64;
    let mut order: Vec<usize> = (0..pred.len()).collect();
    order.sort_by_key(|&i| (pred[i].start_t, i));
    let mut gold_order: Vec<usize> = (0..gold.len()).collect();
    gold_order.sort_by_key(|&i| (gold[i].start_t, i));
    let mut taken = vec![false; gold.len()];
    let mut matched = Vec::new();
    for p in order {
        let s = pred[p].start_t;
        if let Some(&g) = gold_order
            .iter()
            .find(|&&g| !taken[g] && s >= gold[g].start_t - margin && s <= gold[g].end_t + margin)
        {
            taken[g] = true;
            matched.push((p, g));
        }
    }
    let hits = matched.len() as f64;
    let precision = if pred.is_empty() { 0.0 } else { hits / pred.len() as f64 };
    let recall = if gold.is_empty() { 0.0 } else { hits / gold.len() as f64 };
    SceneEvalReport {
        precision,
        recall,
        f1: f1_score(precision, recall),
        matched,
    }
}
