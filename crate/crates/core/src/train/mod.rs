//! Training loop, per-SNR evaluation and report files.

mod adam;
mod eval;
mod report;

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::data::{batches, IqFrame};
use crate::model::{Model, ModelConfig, ModelError};
use crate::seeds::derive_seed;
use crate::tensor::Real;

pub use adam::{adam_step, clip_global_norm, AdamState};
pub use eval::{evaluate, evaluate_with, predict_all, Evaluation, SnrConfusion};
pub use report::{accuracy_svg, confusion_file_name, emit_report, read_confusion_csv, write_history};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("bad data: {0}")]
    Data(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("report: {0}")]
    Report(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 64,
            epochs: 10,
            seed: 0,
            clip_norm: Some(5.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning_rate must be positive".into()));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(TrainError::Config(format!("{name} must lie in [0, 1)")));
            }
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return Err(TrainError::Config("adam_eps must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1".into()));
        }
        if let Some(c) = self.clip_norm {
            if c.is_nan() || c <= 0.0 {
                return Err(TrainError::Config("clip_norm must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Per-epoch training curves.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub val_accuracy: Vec<f64>,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }
}

/// Summary handed to the epoch callback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    /// Batches whose gradient was clipped.
    pub clipped_batches: usize,
}

fn check_frames(frames: &[IqFrame], cfg: &ModelConfig, what: &str) -> Result<(), TrainError> {
    if frames.is_empty() {
        return Err(TrainError::Data(format!("{what} set is empty")));
    }
    if let Some(f) = frames.iter().find(|f| f.class_index >= cfg.num_classes) {
        return Err(TrainError::Data(format!(
            "{what} frame with class {} but the model has {} classes",
            f.class_index, cfg.num_classes
        )));
    }
    Ok(())
}

/// Trains a freshly initialized model for `train_cfg.epochs` epochs.
pub fn train(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    train_set: &[IqFrame],
    val_set: &[IqFrame],
) -> Result<(Model, TrainHistory), TrainError> {
    train_with(model_cfg, train_cfg, train_set, val_set, |_, _| ControlFlow::Continue(()))
}

/// [`train`] with a callback after every epoch; returning
/// `ControlFlow::Break` ends training after that epoch.
///
/// Each epoch shuffles the training set with a seed derived from
/// `train_cfg.seed` and the epoch number, then runs forward, cross-entropy,
/// backward, optional global-norm clipping and an Adam step per batch.
pub fn train_with<F>(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    train_set: &[IqFrame],
    val_set: &[IqFrame],
    mut on_epoch: F,
) -> Result<(Model, TrainHistory), TrainError>
where
    F: FnMut(&EpochRecord, &Model) -> ControlFlow<()>,
{
    train_cfg.validate()?;
    check_frames(train_set, model_cfg, "training")?;
    check_frames(val_set, model_cfg, "validation")?;
    let mut model = Model::new(model_cfg.clone())?;
    let mut state = AdamState::new(model.params.leaves());
    let mut history = TrainHistory::default();
    let mut step = 0u64;

    for epoch in 1..=train_cfg.epochs {
        let order = batches(train_set.len(), train_cfg.batch_size, derive_seed(&[train_cfg.seed, epoch as u64]));
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut clipped = 0usize;
        for (b, indices) in order.iter().enumerate() {
            let frames: Vec<IqFrame> = indices.iter().map(|&i| train_set[i].clone()).collect();
            let (loss, mut grads, predicted) = model.loss_and_grads(&frames)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFinite(format!("loss {loss} at epoch {epoch}, batch {}", b + 1)));
            }
            loss_sum += loss as f64 * frames.len() as f64;
            correct += predicted.iter().zip(&frames).filter(|(p, f)| **p == f.class_index).count();
            if let Some(max_norm) = train_cfg.clip_norm {
                let norm = clip_global_norm(&mut grads.leaves_mut(), max_norm as Real);
                if norm > max_norm as Real {
                    clipped += 1;
                    log::debug!("epoch {epoch} batch {}: gradient norm {norm:.3} clipped to {max_norm}", b + 1);
                }
            }
            step += 1;
            adam_step(&mut model.params.leaves_mut(), &grads.leaves(), &mut state, train_cfg, step)
                .map_err(|e| match e {
                    TrainError::NonFinite(what) => {
                        TrainError::NonFinite(format!("{what} at epoch {epoch}, batch {}", b + 1))
                    }
                    other => other,
                })?;
        }
        if clipped > 0 {
            log::info!("epoch {epoch}: clipped gradients in {clipped} of {} batches", order.len());
        }
        let val = evaluate(&model, val_set, 1)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_accuracy: val.overall_accuracy,
            clipped_batches: clipped,
        };
        log::info!(
            "epoch {epoch}: loss {:.4}, train acc {:.3}, val acc {:.3}",
            record.train_loss,
            record.train_accuracy,
            record.val_accuracy
        );
        history.train_loss.push(record.train_loss);
        history.train_accuracy.push(record.train_accuracy);
        history.val_accuracy.push(record.val_accuracy);
        if on_epoch(&record, &model).is_break() {
            break;
        }
    }
    Ok((model, history))
}
