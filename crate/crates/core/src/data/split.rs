//! Deterministic per-class (stratified) train/val/test assignment.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, Split};
use super::table::{self, TableRow};
use crate::error::{Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Exact per-class counts.
    CountTable,
    /// Per-class fractions, rounded to the nearest count.
    Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValCounts {
    None,
    /// Validation takes as many images per class as training.
    MirrorTrain,
    Table(BTreeMap<String, usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPolicy {
    pub mode: SplitMode,
    #[serde(default)]
    pub per_class_train_counts: Option<BTreeMap<String, usize>>,
    #[serde(default = "no_val")]
    pub val_counts: ValCounts,
    #[serde(default)]
    pub train_ratio: f64,
    #[serde(default)]
    pub val_ratio: f64,
    pub seed: u64,
}

fn no_val() -> ValCounts {
    ValCounts::None
}

impl SplitPolicy {
    pub fn count_table(counts: BTreeMap<String, usize>, seed: u64) -> Self {
        Self {
            mode: SplitMode::CountTable,
            per_class_train_counts: Some(counts),
            val_counts: ValCounts::None,
            train_ratio: 0.0,
            val_ratio: 0.0,
            seed,
        }
    }

    /// Count-table policy from a built-in table name.
    pub fn named_table(name: &str, seed: u64) -> Result<Self> {
        let rows: &[TableRow] =
            table::count_table(name).ok_or_else(|| Error::Config(format!("unknown count table `{name}`")))?;
        Ok(Self::count_table(table::train_counts(rows), seed))
    }

    pub fn ratio(train_ratio: f64, val_ratio: f64, seed: u64) -> Self {
        Self {
            mode: SplitMode::Ratio,
            per_class_train_counts: None,
            val_counts: ValCounts::None,
            train_ratio,
            val_ratio,
            seed,
        }
    }

    pub fn with_mirrored_val(mut self) -> Self {
        self.val_counts = ValCounts::MirrorTrain;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            SplitMode::Ratio => {
                let ok = |r: f64| r.is_finite() && r >= 0.0;
                if !ok(self.train_ratio) || !ok(self.val_ratio) || self.train_ratio + self.val_ratio > 1.0 {
                    return Err(Error::Config(format!(
                        "ratios train {} + val {} must be non-negative and sum to at most 1",
                        self.train_ratio, self.val_ratio
                    )));
                }
            }
            SplitMode::CountTable => {
                if self.per_class_train_counts.is_none() {
                    return Err(Error::Config("count_table mode needs per-class train counts".into()));
                }
            }
        }
        Ok(())
    }

    /// (train, val) counts for a class of `size` records.
    fn counts_for(&self, class: &str, size: usize) -> Result<(usize, usize)> {
        let (train, val) = match self.mode {
            SplitMode::CountTable => {
                let counts = self.per_class_train_counts.as_ref().expect("validated");
                let train = *counts
                    .get(class)
                    .ok_or_else(|| Error::Split(format!("no train count for class `{class}`")))?;
                let val = match &self.val_counts {
                    ValCounts::None => 0,
                    ValCounts::MirrorTrain => train,
                    ValCounts::Table(t) => *t
                        .get(class)
                        .ok_or_else(|| Error::Split(format!("no val count for class `{class}`")))?,
                };
                (train, val)
            }
            SplitMode::Ratio => {
                let train = (size as f64 * self.train_ratio).round() as usize;
                let val = match &self.val_counts {
                    ValCounts::MirrorTrain => train,
                    _ => (size as f64 * self.val_ratio).round() as usize,
                };
                (train.min(size), val.min(size - train.min(size)))
            }
        };
        if train + val > size {
            return Err(Error::Split(format!(
                "class `{class}` has {size} images but {train} train + {val} val were requested"
            )));
        }
        Ok((train, val))
    }
}

/// Assigns every record of `manifest` to train/val/test. Any previous
/// assignment is discarded.
///
/// Within each class, records are sorted by relative path and shuffled with a
/// stream keyed by (seed, class name); the first `train` go to train, the
/// next `val` to val, the rest to test.
pub fn stratified_split(manifest: &DatasetManifest, policy: &SplitPolicy) -> Result<DatasetManifest> {
    policy.validate()?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); manifest.classes.len()];
    for (i, r) in manifest.records.iter().enumerate() {
        by_class[r.class_index].push(i);
    }
    let mut out = manifest.clone();
    for (class_index, members) in by_class.iter_mut().enumerate() {
        let class = &manifest.classes[class_index];
        let (train, val) = policy.counts_for(class, members.len())?;
        members.sort_by(|&a, &b| manifest.records[a].relative_path.cmp(&manifest.records[b].relative_path));
        members.shuffle(&mut rng_for(policy.seed, &["split", class]));
        for (rank, &i) in members.iter().enumerate() {
            out.records[i].split = if rank < train {
                Split::Train
            } else if rank < train + val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    Ok(out)
}
