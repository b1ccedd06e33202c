//! Reference points for the partial-label classifier: k-means with
//! majority-vote cluster labels, and independent per-label logistic
//! regressions that treat every weak label as a positive.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{argmax, Classifier, LabelSpace, LabeledFace, PartialExample};
use super::train::{validate_examples, TrainConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop once no centroid moves farther than this.
    pub tolerance: f64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            seed,
            max_iterations: 300,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, sq_dist(point, &centroids[0]));
    for (c, cen) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(point, cen);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: the first centroid uniformly, each next one with
/// probability proportional to squared distance from the nearest chosen
/// centroid.
pub fn kmeans_plus_plus(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut idx = d2.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    idx = i;
                    break;
                }
                r -= d;
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[pick].to_vec());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

/// Lloyd iterations from the given centroids. A cluster left empty is
/// re-seeded at the point farthest from its current centroid.
pub fn lloyd(points: &[&[f64]], init: Vec<Vec<f64>>, max_iterations: usize, tolerance: f64) -> KMeansFit {
    let dim = points[0].len();
    let k = init.len();
    let mut centroids = init;
    let mut assignments = vec![0usize; points.len()];
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let mut dists = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            assignments[i] = c;
            dists[i] = d;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..points.len())
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("non-empty");
                counts[assignments[far]] -= 1;
                for (s, x) in sums[assignments[far]].iter_mut().zip(points[far].iter()) {
                    *s -= x;
                }
                assignments[far] = c;
                dists[far] = 0.0;
                counts[c] = 1;
                sums[c] = points[far].to_vec();
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let next: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&next, &centroids[c]).sqrt());
            centroids[c] = next;
        }
        if shift <= tolerance {
            break;
        }
    }
    for (i, p) in points.iter().enumerate() {
        assignments[i] = nearest(p, &centroids).0;
    }
    KMeansFit {
        centroids,
        assignments,
        iterations,
    }
}

pub fn kmeans(points: &[&[f64]], cfg: &KMeansConfig) -> KMeansFit {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = kmeans_plus_plus(points, cfg.k, &mut rng);
    lloyd(points, init, cfg.max_iterations, cfg.tolerance)
}

/// Test accuracy of labeling each k-means cluster with its majority weak
/// label.
///
/// Training and test faces are clustered together. Each training face
/// votes `1/|Y|` for every label in its original candidate set; a cluster
/// without training faces takes the overall majority. Ties go to the lower
/// label index.
pub fn kmeans_baseline(
    space: &LabelSpace,
    train: &[PartialExample],
    test: &[LabeledFace],
    cfg: &KMeansConfig,
) -> Result<f64> {
    if cfg.k == 0 {
        return Err(Error::InvalidTrainConfig("k must be at least 1".into()));
    }
    validate_examples(space, train)?;
    if test.is_empty() {
        return Err(Error::NoExamples);
    }
    let points: Vec<&[f64]> = train
        .iter()
        .map(|e| e.x.as_slice())
        .chain(test.iter().map(|t| t.x.as_slice()))
        .collect();
    let k = cfg.k.min(points.len());
    let fit = kmeans(&points, &KMeansConfig { k, ..*cfg });
    let mut votes = vec![vec![0.0; space.len()]; k];
    let mut overall = vec![0.0; space.len()];
    for (ex, &c) in train.iter().zip(&fit.assignments) {
        let w = 1.0 / ex.original.len() as f64;
        for &y in &ex.original {
            votes[c][y] += w;
            overall[y] += w;
        }
    }
    let fallback = argmax(&overall);
    let cluster_label: Vec<usize> = votes
        .iter()
        .map(|v| if v.iter().any(|&x| x > 0.0) { argmax(v) } else { fallback })
        .collect();
    let correct = test
        .iter()
        .zip(&fit.assignments[train.len()..])
        .filter(|(t, &c)| cluster_label[c] == t.label)
        .count();
    Ok(correct as f64 / test.len() as f64)
}

/// Independent per-label logistic regressions.
#[derive(Debug, Clone, PartialEq)]
pub struct OneVsRestModel {
    dim: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    labels: LabelSpace,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl OneVsRestModel {
    pub fn zeros(labels: LabelSpace, dim: usize) -> Self {
        OneVsRestModel {
            dim,
            weights: vec![0.0; labels.len() * dim],
            biases: vec![0.0; labels.len()],
            labels,
        }
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.dim)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    /// Independent per-label probabilities.
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        self.logits(x).into_iter().map(sigmoid).collect()
    }
}

impl Classifier for OneVsRestModel {
    fn label_space(&self) -> &LabelSpace {
        &self.labels
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.logits(x)
    }
}

/// Trains one binary cross-entropy classifier per label, with every weak
/// label of an example counted as a positive. Parameters start at zero and
/// training runs `cfg.epochs_per_stage` epochs of mini-batch SGD.
pub fn naive_multilabel_baseline(
    space: &LabelSpace,
    examples: &[PartialExample],
    cfg: &TrainConfig,
) -> Result<OneVsRestModel> {
    cfg.validate()?;
    let dim = validate_examples(space, examples)?;
    let mut model = OneVsRestModel::zeros(space.clone(), dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_labels = space.len();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut gw = vec![0.0; n_labels * dim];
    let mut gb = vec![0.0; n_labels];
    for epoch in 0..cfg.epochs_per_stage {
        order.shuffle(&mut rng);
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            gw.iter_mut().for_each(|g| *g = 0.0);
            gb.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let ex = &examples[i];
                let z = model.logits(&ex.x);
                for k in 0..n_labels {
                    let target = if ex.original.binary_search(&k).is_ok() { 1.0 } else { 0.0 };
                    let g = sigmoid(z[k]) - target;
                    gb[k] += g;
                    for (acc, x) in gw[k * dim..(k + 1) * dim].iter_mut().zip(&ex.x) {
                        *acc += g * x;
                    }
                }
            }
            if gw.iter().chain(&gb).any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    stage: 0,
                    epoch,
                    batch: batch_no,
                    last_loss: f64::NAN,
                });
            }
            let step = cfg.learning_rate / batch.len() as f64;
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= step * g;
            }
            for (b, g) in model.biases.iter_mut().zip(&gb) {
                *b -= step * g;
            }
        }
    }
    Ok(model)
}
