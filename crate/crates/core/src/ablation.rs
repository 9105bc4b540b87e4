//! The variant × backbone experiment grid.
//!
//! Layout under the plan's output directory:
//!
//! ```text
//! cells/<variant>__<backbone>/checkpoint/{best,final}/
//! cells/<variant>__<backbone>/report/{report.json,confusion.csv,table.txt,table.csv}
//! cells/<variant>__<backbone>/done.json     (checksum of the cell inputs)
//! cells/<variant>__<backbone>/error.txt     (only when the cell failed)
//! tables/{table.txt,table.csv,<variant>.txt,<variant>.csv}
//! artifacts.json                            (every file produced, relative)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backbone::{BackboneInit, BackboneKind, BackboneSpec, PreprocessMode};
use crate::data::manifest::write_atomic;
use crate::data::{DatasetManifest, Split};
use crate::error::{Error, IoContext, Result};
use crate::eval::{evaluate, EvalOptions};
use crate::head::RegionSpec;
use crate::metrics::{read_report, render_tables, write_report, MetricsReport, REPORT_FILE};
use crate::seed::derive_seed;
use crate::train::checkpoint::{best_dir, final_dir};
use crate::train::{train, HeadSettings, ModelVariant, TrainConfig, VariantKind};

/// Where grid cells take backbone weights from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackboneSource {
    Pretrained { dir: PathBuf },
    /// Seeded random weights, shared by every variant of one backbone.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPlan {
    pub variants: Vec<VariantKind>,
    pub backbones: Vec<BackboneKind>,
    /// Shared training settings; `seed` is the base seed of the grid.
    pub train: TrainConfig,
    #[serde(default)]
    pub head: HeadSettings,
    #[serde(default)]
    pub regions: Option<RegionSpec>,
    #[serde(default)]
    pub preprocessing: Option<PreprocessMode>,
    /// Feature channels for fixture backbones.
    #[serde(default)]
    pub fixture_channels: Option<usize>,
    pub source: BackboneSource,
    #[serde(default = "default_eval_split")]
    pub eval_split: Split,
    #[serde(default)]
    pub eval: EvalOptions,
    pub out_dir: PathBuf,
}

fn default_eval_split() -> Split {
    Split::Test
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Trained,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub variant: VariantKind,
    pub backbone: BackboneKind,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationSummary {
    pub cells: Vec<CellResult>,
    pub reports: Vec<MetricsReport>,
}

impl AblationSummary {
    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Failed).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct DoneMarker {
    checksum: String,
}

/// Per-cell seed, derived from the base seed and the cell identity only.
pub fn cell_seed(base: u64, variant: VariantKind, backbone: BackboneKind) -> u64 {
    derive_seed(base, &["cell", variant.name(), backbone.name()])
}

pub fn cell_name(variant: VariantKind, backbone: BackboneKind) -> String {
    format!("{}__{}", variant.name(), backbone.name())
}

impl AblationPlan {
    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() || self.backbones.is_empty() {
            return Err(Error::Config("ablation grid needs at least one variant and one backbone".into()));
        }
        self.train.validate()
    }

    pub fn cells(&self) -> Vec<(VariantKind, BackboneKind)> {
        let mut cells = Vec::new();
        for &v in &self.variants {
            for &b in &self.backbones {
                if !cells.contains(&(v, b)) {
                    cells.push((v, b));
                }
            }
        }
        cells
    }

    pub fn cell_dir(&self, variant: VariantKind, backbone: BackboneKind) -> PathBuf {
        self.out_dir.join("cells").join(cell_name(variant, backbone))
    }

    pub fn cell_variant(&self, variant: VariantKind, backbone: BackboneKind) -> Result<ModelVariant> {
        let mut spec = BackboneSpec::new(backbone);
        if let Some(c) = self.fixture_channels.filter(|_| !BackboneKind::PRETRAINED.contains(&backbone)) {
            spec = spec.with_channels(c)?;
        }
        if let Some(mode) = self.preprocessing {
            spec.preprocessing = mode;
        }
        let mut v = ModelVariant::new(variant, spec);
        v.head = self.head.clone();
        if variant.uses_regions() {
            v.regions = self.regions.clone();
        }
        Ok(v)
    }

    pub fn cell_config(&self, variant: VariantKind, backbone: BackboneKind) -> TrainConfig {
        TrainConfig {
            seed: cell_seed(self.train.seed, variant, backbone),
            ..self.train.clone()
        }
    }

    pub fn cell_init(&self, backbone: BackboneKind) -> BackboneInit {
        match &self.source {
            BackboneSource::Pretrained { dir } => BackboneInit::Pretrained { dir: dir.clone() },
            BackboneSource::Random => BackboneInit::Seeded {
                seed: derive_seed(self.train.seed, &["backbone", backbone.name()]),
            },
        }
    }

    /// Hash over everything that determines a cell's result.
    pub fn cell_checksum(&self, manifest: &DatasetManifest, variant: VariantKind, backbone: BackboneKind) -> Result<String> {
        let inputs = serde_json::json!({
            "variant": self.cell_variant(variant, backbone)?,
            "train": self.cell_config(variant, backbone),
            "init": self.cell_init(backbone),
            "eval_split": self.eval_split,
            "eval": self.eval,
        });
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&inputs)?);
        h.update(manifest.to_csv_string()?.as_bytes());
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Trains and evaluates one cell unless an up-to-date result exists.
pub fn run_cell(
    plan: &AblationPlan,
    manifest: &DatasetManifest,
    variant: VariantKind,
    backbone: BackboneKind,
) -> Result<CellStatus> {
    let dir = plan.cell_dir(variant, backbone);
    let checksum = plan.cell_checksum(manifest, variant, backbone)?;
    let done_path = dir.join("done.json");
    if let Ok(text) = fs::read_to_string(&done_path) {
        let done: Option<DoneMarker> = serde_json::from_str(&text).ok();
        if done.is_some_and(|d| d.checksum == checksum) && dir.join("report").join(REPORT_FILE).is_file() {
            return Ok(CellStatus::Skipped);
        }
    }
    if dir.exists() {
        fs::remove_dir_all(&dir).at(&dir)?;
    }
    fs::create_dir_all(&dir).at(&dir)?;
    let result = (|| {
        let model_variant = plan.cell_variant(variant, backbone)?;
        let config = plan.cell_config(variant, backbone);
        let ckpt = dir.join("checkpoint");
        let run = train(&config, &model_variant, manifest, &plan.cell_init(backbone), Some(&ckpt))?;
        let chosen = if run.best_epoch.is_some() {
            best_dir(&ckpt)
        } else {
            final_dir(&ckpt)
        };
        let report = evaluate(&chosen, manifest, plan.eval_split, &plan.eval)?;
        write_report(&dir.join("report"), &report)
    })();
    match result {
        Ok(()) => {
            let marker = serde_json::to_string_pretty(&DoneMarker { checksum })? + "\n";
            write_atomic(&done_path, marker.as_bytes())?;
            Ok(CellStatus::Trained)
        }
        Err(e) => {
            write_atomic(&dir.join("error.txt"), format!("{e}\n").as_bytes())?;
            Err(e)
        }
    }
}

/// Runs every cell in order. Failures are recorded and the grid continues.
pub fn run_plan(plan: &AblationPlan, manifest: &DatasetManifest) -> Result<AblationSummary> {
    plan.validate()?;
    fs::create_dir_all(&plan.out_dir).at(&plan.out_dir)?;
    let mut cells = Vec::new();
    for (variant, backbone) in plan.cells() {
        log::info!("cell {}", cell_name(variant, backbone));
        let (status, error) = match run_cell(plan, manifest, variant, backbone) {
            Ok(s) => (s, None),
            Err(e) => {
                log::error!("cell {} failed: {e}", cell_name(variant, backbone));
                (CellStatus::Failed, Some(e.to_string()))
            }
        };
        cells.push(CellResult {
            variant,
            backbone,
            status,
            error,
        });
    }
    let reports = finalize(plan)?;
    Ok(AblationSummary { cells, reports })
}

/// Collects the finished reports, renders the tables and writes the
/// artifact list. Safe to call on its own after out-of-process cells.
pub fn finalize(plan: &AblationPlan) -> Result<Vec<MetricsReport>> {
    let mut reports = Vec::new();
    for (variant, backbone) in plan.cells() {
        let dir = plan.cell_dir(variant, backbone);
        let path = dir.join("report").join(REPORT_FILE);
        if dir.join("done.json").is_file() && path.is_file() {
            reports.push(read_report(&path)?);
        }
    }
    let tables_dir = plan.out_dir.join("tables");
    fs::create_dir_all(&tables_dir).at(&tables_dir)?;
    if !reports.is_empty() {
        let tables = render_tables(&reports)?;
        write_atomic(&tables_dir.join("table.txt"), tables.text.as_bytes())?;
        write_atomic(&tables_dir.join("table.csv"), tables.csv.as_bytes())?;
        for t in &tables.per_variant {
            write_atomic(&tables_dir.join(format!("{}.txt", t.variant.name())), t.text.as_bytes())?;
            write_atomic(&tables_dir.join(format!("{}.csv", t.variant.name())), t.csv.as_bytes())?;
        }
    }
    write_artifacts(&plan.out_dir)?;
    Ok(reports)
}

fn write_artifacts(root: &Path) -> Result<()> {
    let mut files = Vec::new();
    collect_files(root, root, &mut files)?;
    files.retain(|f| f != "artifacts.json");
    files.sort();
    let text = serde_json::to_string_pretty(&files)? + "\n";
    write_atomic(&root.join("artifacts.json"), text.as_bytes())
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir).at(dir)? {
        let entry = entry.at(dir)?;
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        if entry.file_type().at(&path)?.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("under root");
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_seeds_are_independent_of_grid() {
        let a = cell_seed(7, VariantKind::Full, BackboneKind::Resnet50);
        let b = cell_seed(7, VariantKind::Baseline, BackboneKind::Resnet50);
        assert_ne!(a, b);
        assert_eq!(a, cell_seed(7, VariantKind::Full, BackboneKind::Resnet50));
    }
}
