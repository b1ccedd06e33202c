use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::model::{loss_and_logit_grad, LabelSpace, LossKind, PartialExample, SoftmaxModel};
use super::relabel::prototype_relabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// One stage over every example.
    AllAtOnce,
    /// One stage per episode, each retraining on everything seen so far.
    Incremental,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub schedule: Schedule,
    pub relabel: bool,
    pub learning_rate: f64,
    pub epochs_per_stage: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Train/relabel rounds when there is only one stage.
    pub relabel_iterations: usize,
    /// Standard deviation of the initial weights.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::AveCe,
            schedule: Schedule::Incremental,
            relabel: true,
            learning_rate: 0.1,
            epochs_per_stage: 20,
            batch_size: 32,
            seed: 0,
            relabel_iterations: 3,
            init_scale: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidTrainConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.epochs_per_stage == 0 {
            return bad("epochs_per_stage must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.relabel && self.relabel_iterations == 0 {
            return bad("relabel_iterations must be at least 1 when relabeling");
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad("init_scale must be non-negative");
        }
        Ok(())
    }
}

/// One line of the training metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub stage: usize,
    /// Highest episode included, absent for all-at-once stages.
    pub episode: Option<u32>,
    pub examples: usize,
    /// Mean loss over the last epoch.
    pub mean_loss: f64,
    /// Examples collapsed to a single label by relabeling after this stage.
    pub relabeled: usize,
    /// Examples relabeling could not touch (no prototype for any candidate).
    pub unchanged: usize,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: SoftmaxModel,
    pub log: Vec<StageMetrics>,
    /// Training data as last used, carrying any relabeled candidate sets.
    pub examples: Vec<PartialExample>,
}

pub(crate) fn validate_examples(space: &LabelSpace, examples: &[PartialExample]) -> Result<usize> {
    let first = examples.first().ok_or(Error::NoExamples)?;
    let dim = first.x.len();
    if dim == 0 {
        return Err(Error::InvalidExample {
            index: 0,
            reason: "empty feature vector".into(),
        });
    }
    for (index, ex) in examples.iter().enumerate() {
        let reason = if ex.x.len() != dim {
            Some(format!("dimension {} != {dim}", ex.x.len()))
        } else if ex.x.iter().any(|v| !v.is_finite()) {
            Some("non-finite feature".into())
        } else if ex.candidates.is_empty() || ex.original.is_empty() {
            Some("empty candidate set".into())
        } else if ex.candidates.iter().chain(&ex.original).any(|&y| y >= space.len()) {
            Some("candidate outside the label space".into())
        } else {
            None
        };
        if let Some(reason) = reason {
            return Err(Error::InvalidExample { index, reason });
        }
    }
    Ok(dim)
}

fn init_model(space: &LabelSpace, dim: usize, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> SoftmaxModel {
    let mut model = SoftmaxModel::zeros(space.clone(), dim, cfg.seed);
    if cfg.init_scale > 0.0 {
        let normal = Normal::new(0.0, cfg.init_scale).expect("finite scale");
        for w in model.weights_mut() {
            *w = normal.sample(rng);
        }
    }
    model
}

/// Mini-batch SGD over `data` for `cfg.epochs_per_stage` epochs. Returns the
/// mean loss of the final epoch.
pub(crate) fn fit(
    model: &mut SoftmaxModel,
    data: &[PartialExample],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    stage: usize,
) -> Result<f64> {
    let (dim, n_labels) = (model.dim, model.labels.len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut gw = vec![0.0; n_labels * dim];
    let mut gb = vec![0.0; n_labels];
    let mut last_finite = f64::NAN;
    let mut epoch_loss = 0.0;
    for epoch in 0..cfg.epochs_per_stage {
        order.shuffle(rng);
        epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            gw.iter_mut().for_each(|g| *g = 0.0);
            gb.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                let ex = &data[i];
                let (value, dz) = loss_and_logit_grad(&model.logits(&ex.x), &ex.candidates, cfg.loss);
                batch_loss += value;
                for (k, g) in dz.iter().enumerate() {
                    gb[k] += g;
                    for (acc, x) in gw[k * dim..(k + 1) * dim].iter_mut().zip(&ex.x) {
                        *acc += g * x;
                    }
                }
            }
            if !batch_loss.is_finite() || gw.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    stage,
                    epoch,
                    batch: batch_no,
                    last_loss: last_finite,
                });
            }
            last_finite = batch_loss / batch.len() as f64;
            epoch_loss += batch_loss;
            let step = cfg.learning_rate / batch.len() as f64;
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= step * g;
            }
            for (b, g) in model.biases.iter_mut().zip(&gb) {
                *b -= step * g;
            }
        }
    }
    Ok(epoch_loss / data.len() as f64)
}

/// Trains a softmax face classifier from partially labeled examples.
///
/// With [`Schedule::Incremental`] the episodes are visited in ascending
/// order and each stage continues training on every example seen so far.
/// With relabeling, after each stage the seen examples are relabeled by
/// prototype distance and the next stage trains on the relabeled sets; a
/// final pass then trains on the fully relabeled data. A run with a single
/// stage does `relabel_iterations` train/relabel rounds instead. The result
/// is a pure function of the inputs and `cfg.seed`.
pub fn train(space: &LabelSpace, examples: &[PartialExample], cfg: &TrainConfig) -> Result<Trained> {
    cfg.validate()?;
    let dim = validate_examples(space, examples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = init_model(space, dim, cfg, &mut rng);
    let mut data: Vec<PartialExample> = examples.to_vec();
    let mut log = Vec::new();

    // (inclusive episode bound, or None for everything)
    let stages: Vec<Option<u32>> = match cfg.schedule {
        Schedule::AllAtOnce => vec![None],
        Schedule::Incremental => {
            let eps: BTreeSet<u32> = data.iter().map(|e| e.episode).collect();
            if eps.len() <= 1 {
                vec![None]
            } else {
                eps.into_iter().map(Some).collect()
            }
        }
    };
    let rounds: Vec<Option<u32>> = if cfg.relabel && stages.len() == 1 {
        vec![None; cfg.relabel_iterations]
    } else {
        stages
    };

    for (stage, bound) in rounds.iter().enumerate() {
        let seen: Vec<usize> = (0..data.len())
            .filter(|&i| bound.is_none_or(|b| data[i].episode <= b))
            .collect();
        let subset: Vec<PartialExample> = seen.iter().map(|&i| data[i].clone()).collect();
        let mean_loss = fit(&mut model, &subset, cfg, &mut rng, stage)?;
        let mut metrics = StageMetrics {
            stage,
            episode: *bound,
            examples: subset.len(),
            mean_loss,
            relabeled: 0,
            unchanged: 0,
        };
        if cfg.relabel {
            let outcome = prototype_relabel(&model, &subset);
            metrics.unchanged = outcome.unchanged.len();
            metrics.relabeled = subset.len() - metrics.unchanged;
            for (&i, ex) in seen.iter().zip(outcome.examples) {
                data[i] = ex;
            }
        }
        log.push(metrics);
    }

    if cfg.relabel {
        let stage = rounds.len();
        let mean_loss = fit(&mut model, &data, cfg, &mut rng, stage)?;
        log.push(StageMetrics {
            stage,
            episode: None,
            examples: data.len(),
            mean_loss,
            relabeled: 0,
            unchanged: 0,
        });
    }

    Ok(Trained {
        model,
        log,
        examples: data,
    })
}
