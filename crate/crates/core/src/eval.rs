//! Evaluation of a trained model over one split.

use std::path::Path;

use candle_core::DType;
use serde::{Deserialize, Serialize};

use crate::data::{batch_iterator, DatasetManifest, Split, Transform};
use crate::error::{Error, Result};
use crate::metrics::{metrics_report, Averaging, MetricsReport, ReportInputs, ZeroDivision};
use crate::train::{load_checkpoint, CheckpointMeta, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub batch_size: usize,
    pub workers: usize,
    pub averaging: Averaging,
    pub zero_division: ZeroDivision,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            batch_size: 32,
            workers: 1,
            averaging: Averaging::Macro,
            zero_division: ZeroDivision::Zero,
        }
    }
}

/// Class probabilities for every record of a split, in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub record_ids: Vec<usize>,
    pub labels: Vec<usize>,
    pub probs: Vec<Vec<f64>>,
}

pub fn predict_split(
    model: &Model,
    manifest: &DatasetManifest,
    split: Split,
    transform: Transform,
    options: &EvalOptions,
) -> Result<Predictions> {
    let batches = batch_iterator(manifest, split, options.batch_size, 0, transform)?.with_workers(options.workers)?;
    let mut out = Predictions {
        record_ids: Vec::new(),
        labels: Vec::new(),
        probs: Vec::new(),
    };
    for batch in batches {
        let batch = batch?;
        let probs = model.predict(&batch.images)?.to_dtype(DType::F64)?.to_vec2::<f64>()?;
        out.probs.extend(probs);
        out.labels.extend(batch.labels);
        out.record_ids.extend(batch.record_ids);
    }
    Ok(out)
}

fn check_classes(model_classes: &[String], manifest: &DatasetManifest) -> Result<()> {
    if model_classes != manifest.classes.as_slice() {
        return Err(Error::Evaluation(format!(
            "model classes ({} entries) differ from the manifest classes ({} entries)",
            model_classes.len(),
            manifest.classes.len()
        )));
    }
    Ok(())
}

/// Metrics for an in-memory model; `meta` supplies the eval geometry and
/// the configuration echo.
pub fn evaluate_model(
    model: &Model,
    meta: &CheckpointMeta,
    manifest: &DatasetManifest,
    split: Split,
    options: &EvalOptions,
) -> Result<MetricsReport> {
    check_classes(model.classes(), manifest)?;
    let transform = Transform::eval_for(&meta.train.augment);
    let preds = predict_split(model, manifest, split, transform, options)?;
    let config = serde_json::json!({
        "epoch": meta.epoch,
        "train": meta.train,
        "variant": meta.variant,
        "params": meta.params,
        "eval": options,
    });
    metrics_report(
        &preds.probs,
        &preds.labels,
        ReportInputs {
            variant: meta.variant.kind,
            backbone: meta.variant.backbone.name,
            split: split.as_str(),
            classes: model.classes(),
            params_millions: meta.params.millions(),
            averaging: options.averaging,
            zero_division: options.zero_division,
            config,
        },
    )
}

/// Loads a checkpoint directory and evaluates it on `split`.
pub fn evaluate(checkpoint: &Path, manifest: &DatasetManifest, split: Split, options: &EvalOptions) -> Result<MetricsReport> {
    let ckpt = load_checkpoint(checkpoint)?;
    check_classes(&ckpt.meta.classes, manifest)?;
    evaluate_model(&ckpt.model, &ckpt.meta, manifest, split, options)
}
