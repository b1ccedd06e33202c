use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered set of identities a classifier can output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSpace {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::LabelSpace("no labels".into()));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::LabelSpace(format!("duplicate label `{l}`")));
            }
        }
        Ok(LabelSpace { labels, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn names(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

/// A face vector with a candidate label set, exactly one of which is right.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialExample {
    pub x: Vec<f64>,
    /// Current candidate label indices, sorted and deduplicated.
    pub candidates: Vec<usize>,
    /// The candidate set as first supplied; relabeling never leaves it.
    pub original: Vec<usize>,
    /// Training stage (episode) the example belongs to.
    pub episode: u32,
}

impl PartialExample {
    pub fn new(x: Vec<f64>, mut candidates: Vec<usize>, episode: u32) -> Self {
        candidates.sort_unstable();
        candidates.dedup();
        PartialExample {
            x,
            original: candidates.clone(),
            candidates,
            episode,
        }
    }

    pub fn from_names<S: AsRef<str>>(
        space: &LabelSpace,
        x: Vec<f64>,
        names: &[S],
        episode: u32,
    ) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                space
                    .index_of(n.as_ref())
                    .ok_or_else(|| Error::UnknownLabel(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PartialExample::new(x, idx, episode))
    }
}

/// A face with one known identity, for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFace {
    pub x: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean negative log-probability over the candidate set.
    AveCe,
    /// Negative log-probability of the most probable candidate.
    HardEm,
}

/// Anything that scores a face against every label.
pub trait Classifier {
    fn label_space(&self) -> &LabelSpace;

    fn scores(&self, x: &[f64]) -> Vec<f64>;

    /// Highest-scoring label; ties go to the lower index.
    fn predict_label(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate().skip(1) {
        if s > v[best] {
            best = i;
        }
    }
    best
}

/// Linear softmax classifier: one weight row and bias per label.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    pub(crate) dim: usize,
    /// Row-major `labels × dim`.
    pub(crate) weights: Vec<f64>,
    pub(crate) biases: Vec<f64>,
    pub(crate) labels: LabelSpace,
    pub(crate) rng_seed: u64,
}

impl SoftmaxModel {
    pub fn zeros(labels: LabelSpace, dim: usize, rng_seed: u64) -> Self {
        SoftmaxModel {
            dim,
            weights: vec![0.0; labels.len() * dim],
            biases: vec![0.0; labels.len()],
            labels,
            rng_seed,
        }
    }

    pub fn from_parts(
        labels: LabelSpace,
        dim: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        rng_seed: u64,
    ) -> Result<Self> {
        if weights.len() != labels.len() * dim || biases.len() != labels.len() {
            return Err(Error::Checkpoint(format!(
                "parameter shape mismatch: {} weights, {} biases for {} labels × {dim}",
                weights.len(),
                biases.len(),
                labels.len()
            )));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(SoftmaxModel {
            dim,
            weights,
            biases,
            labels,
            rng_seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.dim)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    /// Label probabilities for `x`.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                first_id: "model".into(),
                expected: self.dim,
                id: "input".into(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("input".into()));
        }
        Ok(softmax(&self.logits(x)))
    }

    pub(crate) fn probs(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }
}

impl Classifier for SoftmaxModel {
    fn label_space(&self) -> &LabelSpace {
        &self.labels
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.logits(x)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// `-(1/|Y|) Σ_{y∈Y} log P(y|x)`; with a single candidate this is plain
/// cross-entropy.
pub fn loss_ave_ce(model: &SoftmaxModel, ex: &PartialExample) -> f64 {
    let lp = log_softmax(&model.logits(&ex.x));
    -ex.candidates.iter().map(|&y| lp[y]).sum::<f64>() / ex.candidates.len() as f64
}

/// `-log max_{y∈Y} P(y|x)`.
pub fn loss_hard_em(model: &SoftmaxModel, ex: &PartialExample) -> f64 {
    let lp = log_softmax(&model.logits(&ex.x));
    -ex.candidates
        .iter()
        .map(|&y| lp[y])
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn loss(model: &SoftmaxModel, ex: &PartialExample, kind: LossKind) -> f64 {
    match kind {
        LossKind::AveCe => loss_ave_ce(model, ex),
        LossKind::HardEm => loss_hard_em(model, ex),
    }
}

/// Loss value and its gradient with respect to the logits.
///
/// For aveCE the target is uniform over the candidates; for hardEM it is
/// the one-hot of the currently most probable candidate (lowest index on
/// ties).
pub(crate) fn loss_and_logit_grad(
    logits: &[f64],
    candidates: &[usize],
    kind: LossKind,
) -> (f64, Vec<f64>) {
    let lp = log_softmax(logits);
    let mut grad: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
    let value = match kind {
        LossKind::AveCe => {
            let w = 1.0 / candidates.len() as f64;
            for &y in candidates {
                grad[y] -= w;
            }
            -candidates.iter().map(|&y| lp[y]).sum::<f64>() * w
        }
        LossKind::HardEm => {
            let mut best = candidates[0];
            for &y in &candidates[1..] {
                if lp[y] > lp[best] {
                    best = y;
                }
            }
            grad[best] -= 1.0;
            -lp[best]
        }
    };
    (value, grad)
}

/// Parameter gradient of one example's loss, laid out like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

pub fn gradient(model: &SoftmaxModel, ex: &PartialExample, kind: LossKind) -> (f64, Gradient) {
    let (value, dz) = loss_and_logit_grad(&model.logits(&ex.x), &ex.candidates, kind);
    let mut weights = vec![0.0; model.weights.len()];
    for (row, g) in weights.chunks_exact_mut(model.dim).zip(&dz) {
        for (w, x) in row.iter_mut().zip(&ex.x) {
            *w = g * x;
        }
    }
    (
        value,
        Gradient {
            weights,
            biases: dz,
        },
    )
}
