//! Subtitles say what is said and when, transcripts say who says it. Aligning
//! the two recovers who speaks when, and every face shown near a speaking
//! turn gets that speaker as a candidate label.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::AliasTable;
use crate::embedding::FaceRecord;
use crate::error::{Error, Result};
use crate::text::{token_f1, tokenize};

/// Minimum token F1 for a cue to align with a transcript line.
pub const MIN_ALIGN_SCORE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtitleCue {
    pub index: u32,
    /// Milliseconds from the start of the video.
    pub start_ms: i64,
    pub end_ms: i64,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubtitleTrack {
    pub cues: Vec<SubtitleCue>,
    /// Indices of cues folded into an overlapping predecessor.
    pub merged: Vec<u32>,
}

fn parse_timecode(s: &str) -> Option<i64> {
    let (hms, millis) = s.split_once(',')?;
    let mut parts = hms.split(':');
    let (h, m, sec) = (parts.next()?, parts.next()?, parts.next()?);
    if parts.next().is_some()
        || h.len() < 2
        || m.len() != 2
        || sec.len() != 2
        || millis.len() != 3
        || ![h, m, sec, millis].iter().all(|p| p.bytes().all(|b| b.is_ascii_digit()))
    {
        return None;
    }
    let (h, m, sec, millis): (i64, i64, i64, i64) =
        (h.parse().ok()?, m.parse().ok()?, sec.parse().ok()?, millis.parse().ok()?);
    if m >= 60 || sec >= 60 {
        return None;
    }
    Some(((h * 60 + m) * 60 + sec) * 1000 + millis)
}

pub fn format_timecode(ms: i64) -> String {
    let (h, rest) = (ms / 3_600_000, ms % 3_600_000);
    let (m, rest) = (rest / 60_000, rest % 60_000);
    let (s, millis) = (rest / 1000, rest % 1000);
    format!("{h:02}:{m:02}:{s:02},{millis:03}")
}

/// Removes `<i>`-style markup and `{\an8}`-style override blocks.
fn strip_tags(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find(['<', '{']) {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        let close = if tail.starts_with('<') { '>' } else { '}' };
        let is_tag = match tail.find(close) {
            Some(end) => {
                let inner = &tail[1..end];
                if close == '>' {
                    inner
                        .trim_start_matches('/')
                        .chars()
                        .next()
                        .is_some_and(|c| c.is_ascii_alphabetic())
                        && !inner.contains('<')
                } else {
                    inner.starts_with('\\')
                }
                .then_some(end)
            }
            None => None,
        };
        match is_tag {
            Some(end) => rest = &tail[end + 1..],
            None => {
                out.push_str(&tail[..1]);
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Parses SubRip text. Cues come back in time order; a cue overlapping its
/// predecessor is merged into it and reported in `merged`.
pub fn parse_srt(source: &str) -> Result<SubtitleTrack> {
    let normalized = source.trim_start_matches('\u{feff}').replace("\r\n", "\n");
    let mut cues = Vec::new();
    let mut block: Vec<&str> = Vec::new();
    let mut blocks = Vec::new();
    for line in normalized.split('\n') {
        if line.trim().is_empty() {
            if !block.is_empty() {
                blocks.push(std::mem::take(&mut block));
            }
        } else {
            block.push(line);
        }
    }
    if !block.is_empty() {
        blocks.push(block);
    }
    for block in blocks {
        let raw_index = block[0].trim();
        let index: u32 = raw_index.parse().map_err(|_| Error::Subtitle {
            index: raw_index.to_string(),
            reason: "cue index is not a number".into(),
        })?;
        let bad = |reason: &str| Error::Subtitle {
            index: index.to_string(),
            reason: reason.to_string(),
        };
        let timing = block.get(1).ok_or_else(|| bad("missing timecode line"))?.trim();
        let (a, b) = timing
            .split_once(" --> ")
            .ok_or_else(|| bad("expected `HH:MM:SS,mmm --> HH:MM:SS,mmm`"))?;
        let start_ms = parse_timecode(a.trim()).ok_or_else(|| bad("malformed start timecode"))?;
        let end_ms = parse_timecode(b.trim()).ok_or_else(|| bad("malformed end timecode"))?;
        if start_ms >= end_ms {
            return Err(bad("cue ends before it starts"));
        }
        let text = block[2..]
            .iter()
            .map(|l| strip_tags(l))
            .collect::<Vec<_>>()
            .join("\n");
        cues.push(SubtitleCue {
            index,
            start_ms,
            end_ms,
            text,
        });
    }
    cues.sort_by_key(|c| c.start_ms);
    let mut track = SubtitleTrack::default();
    for cue in cues {
        match track.cues.last_mut() {
            Some(prev) if cue.start_ms < prev.end_ms => {
                prev.end_ms = prev.end_ms.max(cue.end_ms);
                if !cue.text.is_empty() {
                    if !prev.text.is_empty() {
                        prev.text.push('\n');
                    }
                    prev.text.push_str(&cue.text);
                }
                track.merged.push(cue.index);
            }
            _ => track.cues.push(cue),
        }
    }
    Ok(track)
}

pub fn write_srt(cues: &[SubtitleCue]) -> String {
    cues.iter()
        .map(|c| {
            format!(
                "{}\n{} --> {}\n{}\n",
                c.index,
                format_timecode(c.start_ms),
                format_timecode(c.end_ms),
                c.text
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub speaker: String,
    pub text: String,
}

/// Parses `{speaker, text}` line records. With an alias table, speakers are
/// resolved to canonical names and unknown speakers are rejected.
pub fn parse_transcript(source: &str, aliases: Option<&AliasTable>) -> Result<Vec<TranscriptLine>> {
    let mut out = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let mut line: TranscriptLine = serde_json::from_str(raw).map_err(|e| Error::Record {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if line.text.trim().is_empty() {
            return Err(Error::Record {
                line: i + 1,
                reason: "empty transcript text".into(),
            });
        }
        if let Some(table) = aliases {
            line.speaker = table
                .resolve(&line.speaker)
                .ok_or_else(|| Error::UnknownSpeaker(line.speaker.clone()))?
                .to_string();
        }
        out.push(line);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakingInterval {
    pub speaker: String,
    pub start_ms: i64,
    pub end_ms: i64,
}

/// Parses an externally supplied `{speaker, start_ms, end_ms}` file.
pub fn parse_intervals(source: &str) -> Result<Vec<SpeakingInterval>> {
    let mut out = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let iv: SpeakingInterval = serde_json::from_str(raw).map_err(|e| Error::Record {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if iv.start_ms >= iv.end_ms {
            return Err(Error::Record {
                line: i + 1,
                reason: "interval ends before it starts".into(),
            });
        }
        out.push(iv);
    }
    Ok(out)
}

/// Monotone alignment of cues to transcript lines as `(cue, line)` index
/// pairs.
///
/// Maximizes the summed token F1 of aligned pairs subject to line indices
/// never decreasing along the cue sequence. Several cues may share a line
/// (a long turn split over cues); pairs scoring below [`MIN_ALIGN_SCORE`]
/// are never aligned.
pub fn align_pairs(cues: &[SubtitleCue], lines: &[TranscriptLine]) -> Vec<(usize, usize)> {
    let (n, m) = (cues.len(), lines.len());
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let cue_toks: Vec<Vec<String>> = cues.iter().map(|c| tokenize(&c.text)).collect();
    let line_toks: Vec<Vec<String>> = lines.iter().map(|l| tokenize(&l.text)).collect();
    let score = |i: usize, j: usize| {
        let s = token_f1(&cue_toks[i], &line_toks[j]);
        if s >= MIN_ALIGN_SCORE {
            s
        } else {
            0.0
        }
    };
    let w = m + 1;
    let mut best = vec![0.0f64; (n + 1) * w];
    let mut gain = vec![0.0f64; n * m];
    for i in 1..=n {
        for j in 1..=m {
            let g = score(i - 1, j - 1);
            gain[(i - 1) * m + (j - 1)] = g;
            let take = best[(i - 1) * w + j] + g;
            let skip_line = best[i * w + j - 1];
            best[i * w + j] = take.max(skip_line);
        }
    }
    let mut pairs = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        let g = gain[(i - 1) * m + (j - 1)];
        let here = best[i * w + j];
        if g > 0.0 && here == best[(i - 1) * w + j] + g {
            pairs.push((i - 1, j - 1));
            i -= 1;
        } else if here == best[i * w + j - 1] {
            j -= 1;
        } else {
            i -= 1;
        }
    }
    pairs.reverse();
    pairs
}

/// Speaking intervals recovered by aligning cues to transcript lines.
pub fn align(cues: &[SubtitleCue], lines: &[TranscriptLine]) -> Vec<SpeakingInterval> {
    align_pairs(cues, lines)
        .into_iter()
        .map(|(c, l)| SpeakingInterval {
            speaker: lines[l].speaker.clone(),
            start_ms: cues[c].start_ms,
            end_ms: cues[c].end_ms,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakLabelConfig {
    /// Half-width of the window around each face, in seconds.
    pub window_seconds: f64,
    /// Faces in frames with more faces than this are discarded.
    pub max_faces_per_frame: usize,
    /// Epoch seconds of the video's first frame; face timestamps minus this
    /// give the video clock the subtitles use.
    pub video_start_t: i64,
}

impl Default for WeakLabelConfig {
    fn default() -> Self {
        WeakLabelConfig {
            window_seconds: 15.0,
            max_faces_per_frame: 5,
            video_start_t: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeakLabelOutcome {
    pub faces: Vec<FaceRecord>,
    /// Faces dropped because their frame was too crowded.
    pub dropped_crowded: Vec<String>,
    /// Faces with no speaker near them.
    pub dropped_unlabeled: Vec<String>,
}

impl WeakLabelOutcome {
    /// Share of kept faces carrying more than one candidate label.
    pub fn multi_label_share(&self) -> f64 {
        if self.faces.is_empty() {
            return 0.0;
        }
        let multi = self.faces.iter().filter(|f| f.weak_labels.len() > 1).count();
        multi as f64 / self.faces.len() as f64
    }
}

/// The speakers whose turns intersect `[t - window, t + window]`.
pub fn speakers_near(face_ms: i64, window_ms: i64, intervals: &[SpeakingInterval]) -> BTreeSet<String> {
    let (lo, hi) = (face_ms - window_ms, face_ms + window_ms);
    intervals
        .iter()
        .filter(|iv| iv.start_ms <= hi && iv.end_ms >= lo)
        .map(|iv| iv.speaker.clone())
        .collect()
}

/// Labels each face with every speaker talking within the window around
/// its frame, after discarding faces from crowded frames.
pub fn assign_weak_labels(
    faces: Vec<FaceRecord>,
    intervals: &[SpeakingInterval],
    cfg: &WeakLabelConfig,
) -> WeakLabelOutcome {
    let mut per_frame: HashMap<&str, usize> = HashMap::new();
    for f in &faces {
        *per_frame.entry(f.frame_id.as_str()).or_default() += 1;
    }
    let crowded: BTreeSet<String> = per_frame
        .into_iter()
        .filter(|(_, n)| *n > cfg.max_faces_per_frame)
        .map(|(id, _)| id.to_string())
        .collect();
    let window_ms = (cfg.window_seconds * 1000.0).round() as i64;
    let mut out = WeakLabelOutcome::default();
    for mut face in faces {
        if crowded.contains(&face.frame_id) {
            out.dropped_crowded.push(face.embedded.id);
            continue;
        }
        let face_ms = (face.embedded.t - cfg.video_start_t) * 1000;
        face.weak_labels = speakers_near(face_ms, window_ms, intervals);
        if face.weak_labels.is_empty() {
            out.dropped_unlabeled.push(face.embedded.id);
        } else {
            out.faces.push(face);
        }
    }
    out
}
