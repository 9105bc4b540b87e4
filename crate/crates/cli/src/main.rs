//! `rpca`: ingest, split, train, eval, ablate, gradcam, report, weights and
//! fixture subcommands.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<rpca::Error> for CliError {
    fn from(e: rpca::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "rpca", version, about = "Region-pooled channel-attention image classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Clone)]
pub struct Common {
    /// JSON or YAML config; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a class-per-folder image tree into a manifest.
    Ingest(IngestArgs),
    /// Assign train/val/test per class.
    Split(SplitArgs),
    /// Train one variant over one backbone.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Eval(EvalArgs),
    /// Train and evaluate a variant × backbone grid, then render tables.
    Ablate(AblateArgs),
    /// Grad-CAM heatmaps and overlays for images.
    Gradcam(GradcamArgs),
    /// Render tables from saved reports.
    Report(ReportArgs),
    /// Manage the local backbone weight cache.
    Weights(WeightsArgs),
    /// Write the synthetic position-class dataset.
    Fixture(FixtureArgs),
}

#[derive(Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Manifest CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip report; defaults to `<out>` with a `.skipped.tsv` extension.
    #[arg(long)]
    pub skip_report: Option<PathBuf>,
}

#[derive(Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset root; ingested when `--manifest` is absent.
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Existing manifest CSV; prior assignments are discarded.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `count-table` or `ratio`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Built-in count table (`womensports`).
    #[arg(long)]
    pub table: Option<String>,
    /// JSON/YAML mapping of class name to train count.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    #[arg(long)]
    pub train_ratio: Option<f64>,
    #[arg(long)]
    pub val_ratio: Option<f64>,
    /// `none` or `mirror` (validation takes as many images as train).
    #[arg(long)]
    pub val: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct ModelFlags {
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub backbone: Option<String>,
    /// Feature channels of fixture backbones.
    #[arg(long)]
    pub channels: Option<usize>,
    /// `bgr_zero_center` or `scale_signed_unit`.
    #[arg(long)]
    pub preprocessing: Option<String>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// `bilinear` or `nearest`.
    #[arg(long)]
    pub upsample: Option<String>,
    #[arg(long)]
    pub grid_side: Option<usize>,
}

#[derive(Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `basic` or `extended`; defaults per variant.
    #[arg(long)]
    pub regime: Option<String>,
    #[arg(long)]
    pub trainable_backbone: Option<bool>,
    /// `constant` or `step`.
    #[arg(long)]
    pub lr_schedule: Option<String>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Seeded random backbone weights instead of pretrained ones.
    #[arg(long)]
    pub random_init: bool,
    /// Pretrained weight directory; defaults to `RPCA_WEIGHTS_DIR`.
    #[arg(long)]
    pub weights_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Image root; defaults to the manifest's directory.
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Checkpoint directory (`best/` and `final/` are written under it).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Args)]
pub struct EvalFlags {
    #[arg(long)]
    pub eval_batch_size: Option<usize>,
    #[arg(long)]
    pub eval_workers: Option<usize>,
    /// `macro` or `weighted`.
    #[arg(long)]
    pub averaging: Option<String>,
    /// `zero` or `nan`.
    #[arg(long)]
    pub zero_division: Option<String>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Checkpoint directory, or a training output holding `best/`/`final/`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub root: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<String>,
    /// Report directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub eval: EvalFlags,
}

#[derive(Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Run directory; every artifact is written under it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated variants; defaults to all five.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    /// Comma-separated backbones; defaults to the four pretrained ones.
    #[arg(long, value_delimiter = ',')]
    pub backbones: Option<Vec<String>>,
    #[arg(long)]
    pub fixture_channels: Option<usize>,
    #[arg(long)]
    pub eval_split: Option<String>,
    /// Cells run in up to N separate processes.
    #[arg(long)]
    pub parallel: Option<usize>,
    /// Run only this cell (`<variant>__<backbone>`) without rendering tables.
    #[arg(long)]
    pub cell: Option<String>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub eval: EvalFlags,
}

#[derive(Args)]
pub struct GradcamArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Image files; repeatable.
    #[arg(long = "image")]
    pub images: Vec<PathBuf>,
    /// Target class (index or name); defaults to the predicted class.
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Heatmap opacity in the overlay.
    #[arg(long)]
    pub alpha: Option<f32>,
    /// Also write `panel.png` with one image/overlay row per input.
    #[arg(long)]
    pub panel: bool,
}

#[derive(Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Report files or directories searched for `report.json`; repeatable.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightsAction {
    /// Expected file per backbone and whether it is present.
    List,
    /// Check a weight file against the architecture.
    Validate,
    /// Validate a local file and copy it into the weight directory.
    Import,
}

#[derive(Args)]
pub struct WeightsArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(value_enum)]
    pub action: WeightsAction,
    #[arg(long)]
    pub backbone: Option<String>,
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Defaults to `RPCA_WEIGHTS_DIR`.
    #[arg(long)]
    pub weights_dir: Option<PathBuf>,
    /// With `list`, print every expected tensor name and shape.
    #[arg(long)]
    pub tensors: bool,
}

#[derive(Args)]
pub struct FixtureArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Train images per class.
    #[arg(long)]
    pub train: Option<usize>,
    /// Test images per class.
    #[arg(long)]
    pub test: Option<usize>,
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Split(a) => commands::split(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Gradcam(a) => commands::gradcam(a),
        Command::Report(a) => commands::report(a),
        Command::Weights(a) => commands::weights(a),
        Command::Fixture(a) => commands::fixture(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
