//! Behavior classifiers trained from scratch on embedding vectors.

mod adam;
mod checkpoint;
mod clip;
mod loss;
mod lstm;
mod mlp;
mod model;
mod params;
mod report;
mod split;
mod train;
mod windows;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{AnyModel, Checkpoint, MAGIC as CHECKPOINT_MAGIC};
pub use clip::{clip_loss, clip_zero_shot, ClipLoss};
pub use loss::{argmax_rows, softmax_rows, weighted_cross_entropy};
pub use lstm::{BiLstm, BiLstmCache, BiLstmConfig};
pub use mlp::{Mlp, MlpCache, MlpConfig};
pub use model::{Batch, Classifier, Dropout, ModelKind};
pub use params::{Block, Layout};
pub use report::{ClassMetrics, ClassificationReport, WeightedAverage};
pub use split::{class_counts, class_weights, stratified_split, Split, DEFAULT_RATIOS};
pub use train::{evaluate_loss, predict, train, Dataset, EpochStats, TrainConfig, TrainOutcome};
pub use windows::{block_split, sliding_windows, stack_windows, LabeledFrame, WindowConfig, WindowExample, WindowSet};

/// Runs `model` over `x` and returns the report against `labels`.
pub fn evaluate_classifier<M: Classifier>(
    model: &M,
    data: &Dataset<M::Input>,
    class_names: &[String],
) -> crate::Result<ClassificationReport> {
    let predicted = predict(model, &data.inputs)?;
    ClassificationReport::from_predictions(&data.labels, &predicted, class_names)
}
