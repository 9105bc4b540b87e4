//! Checkpoint directories: `config.json`, `weights.safetensors`,
//! `history.csv` and `rng_state`.

use std::fs;
use std::path::{Path, PathBuf};

use candle_core::DType;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::model::{Model, ParameterRegistry};
use super::variant::ModelVariant;
use crate::backbone::BackboneInit;
use crate::error::{Error, IoContext, Result};

pub const CONFIG_FILE: &str = "config.json";
pub const WEIGHTS_FILE: &str = "weights.safetensors";
pub const HISTORY_FILE: &str = "history.csv";
pub const RNG_FILE: &str = "rng_state";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_top1: Option<f64>,
}

/// Everything needed to rebuild the model, apart from the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    /// Epoch the weights were taken after (0 = before training).
    pub epoch: usize,
    pub train: TrainConfig,
    pub variant: ModelVariant,
    pub classes: Vec<String>,
    pub params: ParameterRegistry,
    /// Mean loss of the first training batch, before any update.
    pub initial_loss: f64,
}

/// Seeds are derived per epoch and batch from the base seed, so the
/// generator state is fully described by the base seed and the next epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub next_epoch: usize,
}

pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub history: Vec<HistoryRow>,
    pub rng: RngState,
    pub model: Model,
}

pub fn history_csv(history: &[HistoryRow]) -> String {
    let mut out = String::from("epoch,train_loss,val_top1\n");
    for row in history {
        let val = row.val_top1.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", row.epoch, row.train_loss, val));
    }
    out
}

pub fn parse_history(text: &str) -> Result<Vec<HistoryRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let bad = |what: &str| Error::Input(format!("history: bad {what} `{}`", rec.as_slice()));
        rows.push(HistoryRow {
            epoch: rec[0].parse().map_err(|_| bad("epoch"))?,
            train_loss: rec[1].parse().map_err(|_| bad("loss"))?,
            val_top1: if rec[2].is_empty() {
                None
            } else {
                Some(rec[2].parse().map_err(|_| bad("val_top1"))?)
            },
        });
    }
    Ok(rows)
}

/// Writes a checkpoint directory atomically: the files are assembled in a
/// sibling staging directory that then replaces `dir`.
pub fn save_checkpoint(
    dir: &Path,
    model: &Model,
    meta: &CheckpointMeta,
    history: &[HistoryRow],
    rng: &RngState,
) -> Result<()> {
    let parent = dir.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(parent).at(parent)?;
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let staging = parent.join(format!(".{name}.staging-{}", std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging).at(&staging)?;
    }
    fs::create_dir_all(&staging).at(&staging)?;
    fs::write(staging.join(CONFIG_FILE), serde_json::to_string_pretty(meta)? + "\n").at(&staging)?;
    model.save_weights(&staging.join(WEIGHTS_FILE))?;
    fs::write(staging.join(HISTORY_FILE), history_csv(history)).at(&staging)?;
    fs::write(staging.join(RNG_FILE), serde_json::to_string(rng)? + "\n").at(&staging)?;
    let old = parent.join(format!(".{name}.old-{}", std::process::id()));
    if dir.exists() {
        fs::rename(dir, &old).at(dir)?;
    }
    fs::rename(&staging, dir).at(dir)?;
    if old.exists() {
        fs::remove_dir_all(&old).at(&old)?;
    }
    Ok(())
}

pub fn read_meta(dir: &Path) -> Result<CheckpointMeta> {
    let path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&path).at(&path)?;
    let meta: CheckpointMeta = serde_json::from_str(&text)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::Input(format!(
            "{}: unsupported checkpoint format {}",
            path.display(),
            meta.format_version
        )));
    }
    Ok(meta)
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let meta = read_meta(dir)?;
    let mut model = Model::build(&meta.variant, meta.classes.clone(), &BackboneInit::Deferred, 0, DType::F32)?;
    model.load_weights(&dir.join(WEIGHTS_FILE))?;
    let history_path = dir.join(HISTORY_FILE);
    let history = parse_history(&fs::read_to_string(&history_path).at(&history_path)?)?;
    let rng_path = dir.join(RNG_FILE);
    let rng = serde_json::from_str(&fs::read_to_string(&rng_path).at(&rng_path)?)?;
    Ok(Checkpoint {
        meta,
        history,
        rng,
        model,
    })
}

impl CheckpointMeta {
    pub fn new(
        epoch: usize,
        train: &TrainConfig,
        model: &Model,
        initial_loss: f64,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            epoch,
            train: train.clone(),
            variant: model.variant().clone(),
            classes: model.classes().to_vec(),
            params: model.registry(),
            initial_loss,
        }
    }
}

/// Paths of the checkpoints a training run produces under `out`.
pub fn final_dir(out: &Path) -> PathBuf {
    out.join("final")
}

pub fn best_dir(out: &Path) -> PathBuf {
    out.join("best")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_round_trip() {
        let rows = vec![
            HistoryRow {
                epoch: 1,
                train_loss: 1.2345678901234567,
                val_top1: None,
            },
            HistoryRow {
                epoch: 2,
                train_loss: 0.5,
                val_top1: Some(0.75),
            },
        ];
        let text = history_csv(&rows);
        assert_eq!(parse_history(&text).unwrap(), rows);
        assert!(text.starts_with("epoch,train_loss,val_top1\n1,1.2345678901234567,\n"));
    }
}
