//! Mini-batch training with class-weighted loss and early stopping on
//! validation loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::loss::{argmax_rows, weighted_cross_entropy};
use super::model::{Batch, Classifier, Dropout};
use super::split::DEFAULT_RATIOS;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub split: [f64; 3],
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 50,
            patience: 10,
            batch_size: 64,
            split: DEFAULT_RATIOS,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.split.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.split.iter().any(|r| *r < 0.0) {
            return Err(Error::InvalidConfig(format!("split {:?} must sum to 1", self.split)));
        }
        if !(self.learning_rate > 0.0) || self.weight_decay < 0.0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidConfig("learning rate, batch size and epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Dataset<I> {
    pub inputs: I,
    pub labels: Vec<usize>,
}

impl<I: Batch> Dataset<I> {
    pub fn new(inputs: I, labels: Vec<usize>) -> Result<Self> {
        if inputs.count() != labels.len() {
            return Err(Error::Shape(format!("{} inputs, {} labels", inputs.count(), labels.len())));
        }
        Ok(Dataset { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Dataset { inputs: self.inputs.gather(idx), labels: idx.iter().map(|&i| self.labels[i]).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: M,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
    pub stopped_early: bool,
}

const EVAL_CHUNK: usize = 512;

/// Independent stream per (epoch, batch) derived from the run seed.
fn stream(seed: u64, epoch: usize, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | batch as u64);
    rng
}

/// Weighted loss and accuracy in evaluation mode.
pub fn evaluate_loss<M: Classifier>(model: &M, data: &Dataset<M::Input>, weights: &[f64]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let part = data.subset(chunk);
        let logits = model.logits(&part.inputs)?;
        let (l, _) = weighted_cross_entropy(logits.view(), &part.labels, weights)?;
        loss += l * chunk.len() as f64;
        correct += argmax_rows(logits.view()).iter().zip(&part.labels).filter(|(p, t)| p == t).count();
    }
    let n = data.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

pub fn predict<M: Classifier>(model: &M, inputs: &M::Input) -> Result<Vec<usize>> {
    let idx: Vec<usize> = (0..inputs.count()).collect();
    let mut out = Vec::with_capacity(idx.len());
    for chunk in idx.chunks(EVAL_CHUNK) {
        out.extend(argmax_rows(model.logits(&inputs.gather(chunk))?.view()));
    }
    Ok(out)
}

pub fn train<M: Classifier>(
    mut model: M,
    train: &Dataset<M::Input>,
    val: &Dataset<M::Input>,
    weights: &[f64],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<M>> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidInput("training and validation sets must be non-empty".into()));
    }
    let adam = cfg.adam();
    let mut state = AdamState::new(model.params().len());
    let mut history: Vec<EpochStats> = Vec::new();
    let mut best: Option<(f64, usize, M)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let diverged = |history: &[EpochStats], what: String| {
        let last = history.last().map_or("none".to_string(), |s| format!("epoch {} val loss {:.6}", s.epoch, s.val_loss));
        Error::Divergence(format!("{what}; last finite epoch: {last}"))
    };

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut stream(cfg.seed, epoch, 0));
        let mut total = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch = train.subset(idx);
            let mut rng = stream(cfg.seed ^ 0x5eed_d40f, epoch, b + 1);
            let (logits, cache) = model.forward(&batch.inputs, Dropout::Sample(&mut rng))?;
            let (loss, dlogits) = weighted_cross_entropy(logits.view(), &batch.labels, weights)?;
            if !loss.is_finite() {
                return Err(diverged(&history, format!("non-finite training loss in epoch {epoch}")));
            }
            total += loss * idx.len() as f64;
            let grads = model.backward(&cache, &dlogits);
            adam_step(model.params_mut(), &grads, &mut state, &adam).map_err(|e| diverged(&history, e.to_string()))?;
        }
        let (val_loss, val_accuracy) = evaluate_loss(&model, val, weights)?;
        if !val_loss.is_finite() {
            return Err(diverged(&history, format!("non-finite validation loss in epoch {epoch}")));
        }
        history.push(EpochStats { epoch, train_loss: total / train.len() as f64, val_loss, val_accuracy });
        log::debug!("epoch {epoch}: train {:.5} val {val_loss:.5} acc {val_accuracy:.4}", total / train.len() as f64);
        if best.as_ref().is_none_or(|(l, _, _)| val_loss < *l) {
            best = Some((val_loss, epoch, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch ran");
    let stopped_early = history.len() < cfg.max_epochs;
    Ok(TrainOutcome { model, best_epoch, history, stopped_early })
}
