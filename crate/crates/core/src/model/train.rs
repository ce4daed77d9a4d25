//! Mini-batch training loop with best-validation snapshot selection.

use crate::dataset::{batches, LabeledDataset};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::metrics::accuracy;

use super::optim::{sgd_step, OptimizerState, DEFAULT_LR, DEFAULT_MOMENTUM};
use super::{argmax_rows, CnnModel, Mode};

/// Items per forward pass when only predicting.
const EVAL_BATCH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub lr: f64,
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            epochs: 20,
            seed: 0,
            lr: DEFAULT_LR,
            momentum: DEFAULT_MOMENTUM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Item-weighted mean training loss over the epoch.
    pub train_loss: f64,
    /// Validation accuracy in percent, eval mode.
    pub valid_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the highest validation accuracy (earliest on ties).
    pub best: CnnModel,
    pub best_epoch: usize,
    /// Parameters after the last epoch.
    pub last: CnnModel,
    pub history: Vec<EpochRecord>,
}

/// Predicted class per item, computed in eval mode.
pub fn predict(model: &CnnModel, ds: &LabeledDataset, exec: Exec) -> Result<Vec<usize>> {
    let mut m = model.clone();
    m.mode = Mode::Eval;
    let k = m.n_classes();
    let indices: Vec<usize> = (0..ds.len()).collect();
    let mut out = Vec::with_capacity(ds.len());
    for chunk in indices.chunks(EVAL_BATCH) {
        let (input, _) = ds.assemble(chunk);
        out.extend(argmax_rows(&m.logits(&input, exec)?, k));
    }
    Ok(out)
}

/// Accuracy in percent of `model` on `ds`.
pub fn evaluate(model: &CnnModel, ds: &LabeledDataset, exec: Exec) -> Result<f64> {
    accuracy(&predict(model, ds, exec)?, &ds.labels())
}

pub fn train(
    model: &CnnModel,
    train_ds: &LabeledDataset,
    valid_ds: &LabeledDataset,
    config: &TrainConfig,
    exec: Exec,
) -> Result<TrainOutcome> {
    train_with_progress(model, train_ds, valid_ds, config, exec, &mut |_| {})
}

/// Runs `config.epochs` epochs of mini-batch SGD, calling `progress` after each.
pub fn train_with_progress(
    model: &CnnModel,
    train_ds: &LabeledDataset,
    valid_ds: &LabeledDataset,
    config: &TrainConfig,
    exec: Exec,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::InvalidArgument("batch size and epochs must be at least 1".into()));
    }
    if valid_ds.is_empty() {
        return Err(Error::InsufficientData("validation set is empty".into()));
    }
    let k = model.n_classes();
    for ds in [train_ds, valid_ds] {
        if ds.n_classes > k {
            return Err(Error::Shape(format!(
                "dataset has {} classes, model outputs {k}",
                ds.n_classes
            )));
        }
    }
    let mut model = model.clone();
    model.mode = Mode::Train;
    let mut opt = OptimizerState::new(
        model.params().into_iter().map(|(_, _, p)| p),
        config.lr,
        config.momentum,
    );
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, CnnModel)> = None;

    for epoch in 0..config.epochs {
        let order = batches(train_ds, config.batch_size, config.seed, epoch as u64)?;
        let mut loss_sum = 0.0;
        for (b, idx) in order.iter().enumerate() {
            let (input, labels) = train_ds.assemble(idx);
            let lg = model.loss_and_grad(&input, &labels, exec).map_err(|e| match e {
                Error::NumericLayer { .. } => Error::Diverged {
                    epoch: epoch + 1,
                    batch: b,
                    loss: f64::NAN,
                },
                other => other,
            })?;
            if !lg.loss.is_finite() {
                return Err(Error::Diverged {
                    epoch: epoch + 1,
                    batch: b,
                    loss: lg.loss,
                });
            }
            loss_sum += lg.loss * idx.len() as f64;
            sgd_step(&mut model.params_mut(), &lg.grads, &mut opt)?;
            model.update_running_stats(&lg.batch_stats);
        }
        let valid_accuracy = evaluate(&model, valid_ds, exec)?;
        let record = EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / train_ds.len() as f64,
            valid_accuracy,
        };
        progress(&record);
        history.push(record);
        if best.as_ref().is_none_or(|(acc, _, _)| valid_accuracy > *acc) {
            best = Some((valid_accuracy, epoch + 1, model.clone()));
        }
    }
    let (_, best_epoch, best_model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        best: best_model,
        best_epoch,
        last: model,
        history,
    })
}
