//! Dense vectors for tweets, frames and faces, plus the cosine and centroid
//! primitives the selectors share.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Tweet,
    Frame,
    Face,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedItem {
    pub id: String,
    pub t: i64,
    pub kind: ItemKind,
    pub vector: Vec<f64>,
}

/// On-disk line record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRecord {
    pub id: String,
    pub t: i64,
    pub kind: ItemKind,
    pub vec: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_id: Option<String>,
}

/// A detected face with its candidate identities.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceRecord {
    pub embedded: EmbeddedItem,
    pub frame_id: String,
    pub weak_labels: BTreeSet<String>,
}

/// Items sorted by `(t, id)` and indexed by id. All vectors share one
/// dimension.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    dim: Option<usize>,
    items: Vec<EmbeddedItem>,
    by_id: HashMap<String, usize>,
    frame_of: HashMap<String, String>,
}

impl EmbeddingStore {
    pub fn from_records(records: Vec<VectorRecord>) -> Result<Self> {
        let mut items = Vec::with_capacity(records.len());
        let mut frame_of = HashMap::new();
        let mut first: Option<(String, usize)> = None;
        for r in records {
            if r.vec.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(r.id));
            }
            match &first {
                None => first = Some((r.id.clone(), r.vec.len())),
                Some((first_id, d)) if *d != r.vec.len() => {
                    return Err(Error::DimensionMismatch {
                        first_id: first_id.clone(),
                        expected: *d,
                        id: r.id,
                        found: r.vec.len(),
                    })
                }
                _ => {}
            }
            if let Some(f) = r.frame_id {
                frame_of.insert(r.id.clone(), f);
            }
            items.push(EmbeddedItem {
                id: r.id,
                t: r.t,
                kind: r.kind,
                vector: r.vec,
            });
        }
        if let Some((id, 0)) = &first {
            return Err(Error::Record {
                line: 1,
                reason: format!("vector `{id}` is empty"),
            });
        }
        items.sort_by(|a, b| a.t.cmp(&b.t).then_with(|| a.id.cmp(&b.id)));
        let mut by_id = HashMap::with_capacity(items.len());
        for (i, it) in items.iter().enumerate() {
            if by_id.insert(it.id.clone(), i).is_some() {
                return Err(Error::Record {
                    line: 0,
                    reason: format!("duplicate vector id `{}`", it.id),
                });
            }
        }
        Ok(EmbeddingStore {
            dim: first.map(|(_, d)| d),
            items,
            by_id,
            frame_of,
        })
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[EmbeddedItem] {
        &self.items
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddedItem> {
        self.by_id.get(id).map(|&i| &self.items[i])
    }

    pub fn frame_of(&self, face_id: &str) -> Option<&str> {
        self.frame_of.get(face_id).map(String::as_str)
    }

    /// Items with `start <= t < end`.
    pub fn in_window(&self, start: i64, end: i64) -> &[EmbeddedItem] {
        let lo = self.items.partition_point(|it| it.t < start);
        let hi = self.items.partition_point(|it| it.t < end);
        &self.items[lo..hi.max(lo)]
    }

    /// Face items as records with empty weak-label sets.
    pub fn face_records(&self) -> Result<Vec<FaceRecord>> {
        self.items
            .iter()
            .filter(|it| it.kind == ItemKind::Face)
            .map(|it| {
                let frame_id = self.frame_of.get(&it.id).cloned().ok_or_else(|| Error::Record {
                    line: 0,
                    reason: format!("face `{}` has no frame_id", it.id),
                })?;
                Ok(FaceRecord {
                    embedded: it.clone(),
                    frame_id,
                    weak_labels: BTreeSet::new(),
                })
            })
            .collect()
    }
}

/// Parses a JSON Lines vector file.
pub fn load_store(source: &str) -> Result<EmbeddingStore> {
    let mut records = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let rec: VectorRecord = serde_json::from_str(raw).map_err(|e| Error::Record {
            line: i + 1,
            reason: e.to_string(),
        })?;
        records.push(rec);
    }
    EmbeddingStore::from_records(records)
}

pub fn write_records(records: &[VectorRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("vector record serializes"));
        s.push('\n');
    }
    s
}

/// Every face must point at a frame present in `frames`.
pub fn validate_face_links(faces: &[FaceRecord], frames: &EmbeddingStore) -> Result<()> {
    for f in faces {
        if frames.get(&f.frame_id).is_none() {
            return Err(Error::DanglingFrame {
                face: f.embedded.id.clone(),
                frame: f.frame_id.clone(),
            });
        }
    }
    Ok(())
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            first_id: "lhs".into(),
            expected: u.len(),
            id: "rhs".into(),
            found: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Coordinate-wise mean.
pub fn centroid<'a, I>(vectors: I) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut iter = vectors.into_iter();
    let first = iter.next().ok_or(Error::EmptyCentroid)?;
    let mut sum = first.to_vec();
    let mut n = 1usize;
    for v in iter {
        if v.len() != sum.len() {
            return Err(Error::DimensionMismatch {
                first_id: "centroid".into(),
                expected: sum.len(),
                id: format!("item {n}"),
                found: v.len(),
            });
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1;
    }
    for s in &mut sum {
        *s /= n as f64;
    }
    Ok(sum)
}

pub fn item_centroid(items: &[EmbeddedItem]) -> Result<Vec<f64>> {
    centroid(items.iter().map(|it| it.vector.as_slice()))
}

/// Among items accepted by `filter`, the one most cosine-similar to the
/// centroid of *all* `items`. Ties go to the earlier `t`, then the smaller
/// id. Zero vectors are never selected.
pub fn nearest_to_centroid<F>(items: &[EmbeddedItem], filter: F) -> Result<&EmbeddedItem>
where
    F: Fn(&EmbeddedItem) -> bool,
{
    let center = item_centroid(items).map_err(|e| match e {
        Error::EmptyCentroid => Error::NoCandidate,
        other => other,
    })?;
    if norm(&center) == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let mut best: Option<(f64, &EmbeddedItem)> = None;
    for it in items.iter().filter(|it| filter(it)) {
        let Ok(sim) = cosine(&it.vector, &center) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((bs, b)) => {
                sim > bs || (sim == bs && (it.t, it.id.as_str()) < (b.t, b.id.as_str()))
            }
        };
        if better {
            best = Some((sim, it));
        }
    }
    best.map(|(_, it)| it).ok_or(Error::NoCandidate)
}
