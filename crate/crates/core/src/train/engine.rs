//! The training loop.

use std::path::Path;

use candle_core::DType;

use super::checkpoint::{best_dir, final_dir, save_checkpoint, CheckpointMeta, HistoryRow, RngState};
use super::config::TrainConfig;
use super::loss::cross_entropy_loss;
use super::model::{build_model, Model};
use super::sgd::Sgd;
use super::variant::ModelVariant;
use crate::backbone::BackboneInit;
use crate::data::{batch_iterator, DatasetManifest, Split, Transform};
use crate::error::{Error, Result};
use crate::metrics::argmax;
use crate::seed::derive_seed;

pub struct TrainRun {
    /// Weights after the last epoch.
    pub model: Model,
    pub history: Vec<HistoryRow>,
    pub initial_loss: f64,
    /// Epoch with the highest validation top-1, when a validation split exists.
    pub best_epoch: Option<usize>,
}

impl TrainRun {
    pub fn final_loss(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |h| h.train_loss)
    }
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    derive_seed(seed, &["epoch", &epoch.to_string()])
}

/// Trains `variant` on the train split of `manifest`.
///
/// Each epoch visits the train split in a seeded order, minimizes the mean
/// cross-entropy with momentum SGD and, if the validation split is
/// non-empty, measures validation top-1. With `out_dir` set, the final
/// weights go to `<out_dir>/final` and the best-by-validation weights to
/// `<out_dir>/best`.
pub fn train(
    config: &TrainConfig,
    variant: &ModelVariant,
    manifest: &DatasetManifest,
    init: &BackboneInit,
    out_dir: Option<&Path>,
) -> Result<TrainRun> {
    config.validate()?;
    if manifest.split_len(Split::Train) == 0 {
        return Err(Error::Iteration("train split is empty".into()));
    }
    let model = build_model(variant, manifest.classes.clone(), init, config.seed, DType::F32)?;
    let mut optimizer = Sgd::new(
        model.trainable_vars(config.trainable_backbone),
        config.lr,
        config.momentum,
        config.weight_decay,
    )?;
    let augment = config.augment_for(variant.kind.default_regime());
    let has_val = manifest.split_len(Split::Val) > 0;
    let k = model.num_classes();

    let mut history = Vec::with_capacity(config.epochs);
    let mut initial_loss = None;
    let mut best: Option<(usize, f64)> = None;
    for epoch in 1..=config.epochs {
        optimizer.lr = config.lr_at(epoch);
        let seed = epoch_seed(config.seed, epoch);
        let batches = batch_iterator(manifest, Split::Train, config.batch_size, seed, Transform::Augment(augment))?
            .with_workers(config.workers)?;
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for (b, batch) in batches.enumerate() {
            let batch = batch?;
            let xs = model.input_tensor(&batch.images)?;
            let dropout_seed = derive_seed(seed, &["dropout", &b.to_string()]);
            let probs = model.probs(&xs, true, config.trainable_backbone, dropout_seed)?;
            let loss = cross_entropy_loss(&probs, &batch.one_hot(k, DType::F32)?)?;
            let value = loss.to_dtype(DType::F64)?.to_scalar::<f64>()?;
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            initial_loss.get_or_insert(value);
            optimizer.step(&loss.backward()?)?;
            loss_sum += value * batch.len() as f64;
            seen += batch.len();
        }
        let val_top1 = if has_val {
            Some(split_top1(&model, manifest, Split::Val, config, &augment)?)
        } else {
            None
        };
        let row = HistoryRow {
            epoch,
            train_loss: loss_sum / seen as f64,
            val_top1,
        };
        log::info!(
            "epoch {epoch}/{}: loss {:.5}{}",
            config.epochs,
            row.train_loss,
            val_top1.map(|v| format!(", val top-1 {v:.4}")).unwrap_or_default()
        );
        history.push(row);
        if let Some(v) = val_top1 {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((epoch, v));
                if let Some(out) = out_dir {
                    let meta = CheckpointMeta::new(epoch, config, &model, initial_loss.unwrap_or(f64::NAN));
                    let rng = RngState {
                        seed: config.seed,
                        next_epoch: epoch + 1,
                    };
                    save_checkpoint(&best_dir(out), &model, &meta, &history, &rng)?;
                }
            }
        }
    }
    let initial_loss = initial_loss.unwrap_or(f64::NAN);
    if let Some(out) = out_dir {
        let meta = CheckpointMeta::new(config.epochs, config, &model, initial_loss);
        let rng = RngState {
            seed: config.seed,
            next_epoch: config.epochs + 1,
        };
        save_checkpoint(&final_dir(out), &model, &meta, &history, &rng)?;
    }
    Ok(TrainRun {
        model,
        history,
        initial_loss,
        best_epoch: best.map(|(e, _)| e),
    })
}

fn split_top1(
    model: &Model,
    manifest: &DatasetManifest,
    split: Split,
    config: &TrainConfig,
    augment: &crate::data::AugmentConfig,
) -> Result<f64> {
    let batches = batch_iterator(manifest, split, config.batch_size, 0, Transform::eval_for(augment))?
        .with_workers(config.workers)?;
    let (mut correct, mut total) = (0usize, 0usize);
    for batch in batches {
        let batch = batch?;
        let probs = model.predict(&batch.images)?.to_dtype(DType::F64)?.to_vec2::<f64>()?;
        correct += probs.iter().zip(&batch.labels).filter(|(p, &l)| argmax(p) == l).count();
        total += batch.len();
    }
    Ok(correct as f64 / total as f64)
}
