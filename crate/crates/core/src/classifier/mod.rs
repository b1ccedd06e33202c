//! Softmax face classifier trained from partially labeled faces.

mod baselines;
mod checkpoint;
mod metrics;
mod model;
mod relabel;
mod train;

#[cfg(test)]
mod tests;

pub use baselines::{
    kmeans, kmeans_baseline, kmeans_plus_plus, lloyd, naive_multilabel_baseline, KMeansConfig, KMeansFit,
    OneVsRestModel,
};
pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader, FORMAT_VERSION, MAGIC};
pub use metrics::{evaluate_accuracy, pearson, AccuracyReport, LabelAccuracy};
pub use model::{
    gradient, log_softmax, loss, loss_ave_ce, loss_hard_em, softmax, Classifier, Gradient, LabelSpace,
    LabeledFace, LossKind, PartialExample, SoftmaxModel,
};
pub use relabel::{prototype_relabel, RelabelOutcome};
pub use train::{train, Schedule, StageMetrics, TrainConfig, Trained};
