use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::str::FromStr;

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use rpca::ablation::{cell_name, finalize, run_cell, run_plan, AblationPlan, BackboneSource, CellStatus};
use rpca::backbone::{
    expected_tensors, validate_weights_file, weights_path, BackboneInit, BackboneKind, BackboneSpec, PreprocessMode,
    WEIGHTS_DIR_ENV,
};
use rpca::data::synthetic::position_fixture_manifest;
use rpca::data::{build_manifest, eval_transform, stratified_split, DatasetManifest, Split, SplitMode, SplitPolicy};
use rpca::eval::{evaluate, EvalOptions};
use rpca::gradcam::{self as cam, colorize, overlay, panel, png_bytes};
use rpca::head::RegionSpec;
use rpca::imaging::ImageTensor;
use rpca::metrics::{read_report, render_tables, write_report, REPORT_FILE};
use rpca::seed::derive_seed;
use rpca::train::checkpoint::{best_dir, final_dir, CONFIG_FILE};
use rpca::train::{load_checkpoint, train as train_model, HeadSettings, ModelVariant, TrainConfig, VariantKind};

use crate::config::{finish, has_path, load_document, merge, set_path, Overrides};
use crate::{
    AblateArgs, CliError, CliResult, EvalArgs, EvalFlags, FixtureArgs, GradcamArgs, IngestArgs, ReportArgs, SplitArgs,
    TrainArgs, TrainFlags, WeightsAction, WeightsArgs,
};

/// Lower-case with `-` mapped to `_`, the spelling of serialized enums.
fn norm(s: &str) -> String {
    s.trim().to_ascii_lowercase().replace('-', "_")
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn parse_variant(s: &str) -> CliResult<VariantKind> {
    VariantKind::from_str(s).map_err(usage)
}

fn parse_backbone(s: &str) -> CliResult<BackboneKind> {
    BackboneKind::from_str(s).map_err(usage)
}

fn train_overrides(o: &mut Overrides, f: &TrainFlags) {
    o.opt("train.epochs", f.epochs)
        .opt("train.lr", f.lr)
        .opt("train.momentum", f.momentum)
        .opt("train.batch_size", f.batch_size)
        .opt("train.seed", f.seed)
        .opt("train.regime", f.regime.as_deref().map(norm))
        .opt("train.trainable_backbone", f.trainable_backbone)
        .opt("train.lr_schedule", f.lr_schedule.as_deref().map(norm))
        .opt("train.weight_decay", f.weight_decay)
        .opt("train.workers", f.workers);
    if f.random_init {
        o.set("source", "random");
    } else if let Some(dir) = &f.weights_dir {
        o.set("source", serde_json::json!({ "pretrained": { "dir": dir } }));
    }
}

fn eval_overrides(o: &mut Overrides, f: &EvalFlags) {
    o.opt("eval.batch_size", f.eval_batch_size)
        .opt("eval.workers", f.eval_workers)
        .opt("eval.averaging", f.averaging.as_deref().map(norm))
        .opt("eval.zero_division", f.zero_division.as_deref().map(norm));
}

fn require_seed(doc: &Value) -> CliResult {
    if has_path(doc, "train.seed") {
        Ok(())
    } else {
        Err(usage("--seed is required for training runs"))
    }
}

/// Pretrained weights from `RPCA_WEIGHTS_DIR` unless a source was chosen.
fn fill_source(doc: &mut Value) -> CliResult {
    if has_path(doc, "source") {
        return Ok(());
    }
    let BackboneInit::Pretrained { dir } = BackboneInit::from_env()? else {
        unreachable!("from_env yields pretrained weights")
    };
    set_path(doc, "source", serde_json::json!({ "pretrained": { "dir": dir } }));
    Ok(())
}

/// Image root defaults to the directory holding the manifest.
fn fill_root(doc: &mut Value) {
    if has_path(doc, "root") {
        return;
    }
    if let Some(parent) = doc.get("manifest").and_then(Value::as_str).map(|m| Path::new(m).parent().map(Path::to_path_buf)) {
        let parent = parent.filter(|p| !p.as_os_str().is_empty()).unwrap_or_else(|| PathBuf::from("."));
        set_path(doc, "root", serde_json::to_value(parent).expect("path"));
    }
}

fn read_manifest(manifest: &Path, root: &Path) -> CliResult<DatasetManifest> {
    Ok(DatasetManifest::read_csv(manifest, root)?)
}

fn init_for(source: &BackboneSource, seed: u64, backbone: BackboneKind) -> BackboneInit {
    match source {
        BackboneSource::Pretrained { dir } => BackboneInit::Pretrained { dir: dir.clone() },
        BackboneSource::Random => BackboneInit::Seeded {
            seed: derive_seed(seed, &["backbone", backbone.name()]),
        },
    }
}

/// A checkpoint directory, or the best (else final) one under a training
/// output directory.
fn resolve_checkpoint(path: &Path) -> PathBuf {
    if path.join(CONFIG_FILE).is_file() {
        path.to_path_buf()
    } else if best_dir(path).join(CONFIG_FILE).is_file() {
        best_dir(path)
    } else {
        final_dir(path)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(anyhow::Error::from)? + "\n";
    fs::write(path, text).with_context(|| path.display().to_string())?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct IngestSettings {
    root: PathBuf,
    out: PathBuf,
    skip_report: PathBuf,
}

pub fn ingest(a: IngestArgs) -> CliResult {
    let mut o = Overrides::default();
    o.opt("root", a.root).opt("out", a.out).opt("skip_report", a.skip_report);
    let mut doc = merge(a.common.config.as_deref(), &o)?;
    if !has_path(&doc, "skip_report") {
        if let Some(out) = doc.get("out").and_then(Value::as_str) {
            let path = Path::new(out).with_extension("skipped.tsv");
            set_path(&mut doc, "skip_report", serde_json::to_value(path).expect("path"));
        }
    }
    let s: IngestSettings = finish("ingest", doc)?;
    let manifest = build_manifest(&s.root)?;
    for w in &manifest.warnings {
        log::warn!("{w}");
    }
    manifest.write_csv(&s.out)?;
    manifest.write_skip_report(&s.skip_report)?;
    println!(
        "{} images in {} classes, {} skipped",
        manifest.records.len(),
        manifest.num_classes(),
        manifest.skipped.len()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ValMode {
    #[default]
    None,
    Mirror,
}

#[derive(Serialize, Deserialize)]
struct SplitSettings {
    #[serde(default)]
    root: Option<PathBuf>,
    #[serde(default)]
    manifest: Option<PathBuf>,
    out: PathBuf,
    mode: SplitMode,
    #[serde(default)]
    table: Option<String>,
    #[serde(default)]
    counts: Option<PathBuf>,
    #[serde(default)]
    train_ratio: f64,
    #[serde(default)]
    val_ratio: f64,
    #[serde(default)]
    val: ValMode,
    #[serde(default)]
    seed: u64,
}

pub fn split(a: SplitArgs) -> CliResult {
    let mut o = Overrides::default();
    o.opt("root", a.root)
        .opt("manifest", a.manifest)
        .opt("out", a.out)
        .opt("mode", a.mode.as_deref().map(norm))
        .opt("table", a.table)
        .opt("counts", a.counts)
        .opt("train_ratio", a.train_ratio)
        .opt("val_ratio", a.val_ratio)
        .opt("val", a.val.as_deref().map(norm))
        .opt("seed", a.seed);
    let mut doc = merge(a.common.config.as_deref(), &o)?;
    fill_root(&mut doc);
    let s: SplitSettings = finish("split", doc)?;

    let mut policy = match s.mode {
        SplitMode::CountTable => match (&s.table, &s.counts) {
            (Some(name), None) => SplitPolicy::named_table(name, s.seed).map_err(usage)?,
            (None, Some(path)) => {
                let counts: BTreeMap<String, usize> = serde_json::from_value(load_document(path)?)
                    .map_err(|e| usage(format!("{}: {e}", path.display())))?;
                SplitPolicy::count_table(counts, s.seed)
            }
            _ => return Err(usage("count-table mode needs exactly one of --table or --counts")),
        },
        SplitMode::Ratio => SplitPolicy::ratio(s.train_ratio, s.val_ratio, s.seed),
    };
    if s.val == ValMode::Mirror {
        policy = policy.with_mirrored_val();
    }
    let root = s.root.clone().ok_or_else(|| usage("--root or --manifest is required"))?;
    let manifest = match &s.manifest {
        Some(path) => read_manifest(path, &root)?,
        None => build_manifest(&root)?,
    };
    let out = stratified_split(&manifest, &policy)?;
    out.write_csv(&s.out)?;
    println!(
        "train {} val {} test {}",
        out.split_len(Split::Train),
        out.split_len(Split::Val),
        out.split_len(Split::Test)
    );
    Ok(())
}

fn default_variant() -> VariantKind {
    VariantKind::Full
}

fn default_backbone() -> BackboneKind {
    BackboneKind::Resnet50
}

#[derive(Serialize, Deserialize)]
struct TrainSettings {
    manifest: PathBuf,
    root: PathBuf,
    out: PathBuf,
    #[serde(default = "default_variant")]
    variant: VariantKind,
    #[serde(default = "default_backbone")]
    backbone: BackboneKind,
    #[serde(default)]
    channels: Option<usize>,
    #[serde(default)]
    preprocessing: Option<PreprocessMode>,
    #[serde(default)]
    regions: Option<RegionSpec>,
    #[serde(default)]
    head: HeadSettings,
    train: TrainConfig,
    source: BackboneSource,
}

pub fn train(a: TrainArgs) -> CliResult {
    let mut o = Overrides::default();
    o.opt("manifest", a.manifest).opt("root", a.root).opt("out", a.out);
    let m = &a.model;
    o.opt("variant", m.variant.as_deref().map(parse_variant).transpose()?)
        .opt("backbone", m.backbone.as_deref().map(parse_backbone).transpose()?)
        .opt("channels", m.channels)
        .opt("preprocessing", m.preprocessing.as_deref().map(norm))
        .opt("head.dropout", m.dropout)
        .opt("head.hidden", m.hidden)
        .opt("head.upsample", m.upsample.as_deref().map(norm))
        .opt("head.grid_side", m.grid_side);
    train_overrides(&mut o, &a.train);
    let mut doc = merge(a.common.config.as_deref(), &o)?;
    require_seed(&doc)?;
    fill_root(&mut doc);
    fill_source(&mut doc)?;
    let s: TrainSettings = finish("train", doc)?;

    let manifest = read_manifest(&s.manifest, &s.root)?;
    let mut spec = BackboneSpec::new(s.backbone);
    if let Some(c) = s.channels {
        spec = spec.with_channels(c)?;
    }
    if let Some(mode) = s.preprocessing {
        spec.preprocessing = mode;
    }
    let mut variant = ModelVariant::new(s.variant, spec);
    variant.head = s.head.clone();
    variant.regions = s.regions.clone();
    variant.validate()?;
    let init = init_for(&s.source, s.train.seed, s.backbone);
    fs::create_dir_all(&s.out).with_context(|| s.out.display().to_string())?;
    write_json(&s.out.join("run_config.json"), &s)?;
    let run = train_model(&s.train, &variant, &manifest, &init, Some(&s.out))?;
    println!(
        "initial loss {:.6}, final loss {:.6}{}",
        run.initial_loss,
        run.final_loss(),
        run.best_epoch.map(|e| format!(", best epoch {e}")).unwrap_or_default()
    );
    Ok(())
}

fn default_split() -> Split {
    Split::Test
}

#[derive(Serialize, Deserialize)]
struct EvalSettings {
    checkpoint: PathBuf,
    manifest: PathBuf,
    root: PathBuf,
    #[serde(default = "default_split")]
    split: Split,
    out: PathBuf,
    #[serde(default)]
    eval: EvalOptions,
}

pub fn eval(a: EvalArgs) -> CliResult {
    let mut o = Overrides::default();
    o.opt("checkpoint", a.checkpoint)
        .opt("manifest", a.manifest)
        .opt("root", a.root)
        .opt("split", a.split.as_deref().map(norm))
        .opt("out", a.out);
    eval_overrides(&mut o, &a.eval);
    let mut doc = merge(a.common.config.as_deref(), &o)?;
    fill_root(&mut doc);
    let s: EvalSettings = finish("eval", doc)?;
    let manifest = read_manifest(&s.manifest, &s.root)?;
    let report = evaluate(&resolve_checkpoint(&s.checkpoint), &manifest, s.split, &s.eval)?;
    write_report(&s.out, &report)?;
    println!(
        "{} samples: top-1 {:.4}, top-3 {:.4}, precision {:.4}, recall {:.4}, F1 {:.4}",
        report.samples, report.top1, report.top3, report.precision, report.recall, report.f1
    );
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct AblateSettings {
    manifest: PathBuf,
    root: PathBuf,
    #[serde(flatten)]
    plan: AblationPlan,
}

const PLAN_FILE: &str = "plan.json";

pub fn ablate(a: AblateArgs) -> CliResult {
    let mut o = Overrides::default();
    o.opt("manifest", a.manifest)
        .opt("root", a.root)
        .opt("out_dir", a.out)
        .opt("fixture_channels", a.fixture_channels)
        .opt("eval_split", a.eval_split.as_deref().map(norm))
        .opt("head.dropout", a.dropout)
        .opt("head.hidden", a.hidden);
    if let Some(vs) = &a.variants {
        o.set("variants", vs.iter().map(|v| parse_variant(v)).collect::<CliResult<Vec<_>>>()?);
    }
    if let Some(bs) = &a.backbones {
        o.set("backbones", bs.iter().map(|b| parse_backbone(b)).collect::<CliResult<Vec<_>>>()?);
    }
    train_overrides(&mut o, &a.train);
    eval_overrides(&mut o, &a.eval);
    let mut doc = merge(a.common.config.as_deref(), &o)?;
    require_seed(&doc)?;
    if !has_path(&doc, "variants") {
        set_path(&mut doc, "variants", serde_json::to_value(VariantKind::ALL).expect("variants"));
    }
    if !has_path(&doc, "backbones") {
        set_path(&mut doc, "backbones", serde_json::to_value(BackboneKind::PRETRAINED).expect("backbones"));
    }
    fill_root(&mut doc);
    fill_source(&mut doc)?;
    let s: AblateSettings = finish("ablate", doc)?;
    let plan = &s.plan;
    plan.validate().map_err(usage)?;
    let manifest = read_manifest(&s.manifest, &s.root)?;

    if let Some(name) = &a.cell {
        let (variant, backbone) = plan
            .cells()
            .into_iter()
            .find(|&(v, b)| cell_name(v, b) == *name)
            .ok_or_else(|| usage(format!("cell `{name}` is not in the grid")))?;
        let status = run_cell(plan, &manifest, variant, backbone)?;
        println!("cell {name}: {}", status_name(status));
        return Ok(());
    }

    fs::create_dir_all(&plan.out_dir).with_context(|| plan.out_dir.display().to_string())?;
    let plan_path = plan.out_dir.join(PLAN_FILE);
    write_json(&plan_path, &s)?;
    let failed = match a.parallel.filter(|&n| n > 1) {
        Some(n) => {
            let failed = run_processes(plan, &plan_path, n)?;
            finalize(plan)?;
            failed
        }
        None => {
            let summary = run_plan(plan, &manifest)?;
            for c in &summary.cells {
                println!("cell {}: {}", cell_name(c.variant, c.backbone), status_name(c.status));
            }
            summary.failed()
        }
    };
    let table = plan.out_dir.join("tables").join("table.txt");
    if table.is_file() {
        print!("{}", fs::read_to_string(&table).with_context(|| table.display().to_string())?);
    }
    if failed > 0 {
        return Err(anyhow!("{failed} grid cell(s) failed; see cells/*/error.txt").into());
    }
    Ok(())
}

fn status_name(status: CellStatus) -> &'static str {
    match status {
        CellStatus::Trained => "trained",
        CellStatus::Skipped => "skipped",
        CellStatus::Failed => "failed",
    }
}

/// Runs each cell as `rpca ablate --config <plan> --cell <name>` with at
/// most `n` children alive. Returns the number of failed cells.
fn run_processes(plan: &AblationPlan, plan_path: &Path, n: usize) -> CliResult<usize> {
    let exe = std::env::current_exe().context("locating the rpca executable")?;
    let mut pending: Vec<String> = plan.cells().into_iter().map(|(v, b)| cell_name(v, b)).collect();
    pending.reverse();
    let mut running: Vec<(String, Child)> = Vec::new();
    let mut failed = 0;
    while !pending.is_empty() || !running.is_empty() {
        while running.len() < n {
            let Some(name) = pending.pop() else { break };
            let child = Command::new(&exe)
                .args(["ablate", "--config"])
                .arg(plan_path)
                .args(["--cell", &name])
                .stdout(Stdio::null())
                .spawn()
                .with_context(|| format!("spawning cell {name}"))?;
            running.push((name, child));
        }
        let (name, mut child) = running.remove(0);
        let ok = child.wait().with_context(|| format!("waiting for cell {name}"))?.success();
        println!("cell {name}: {}", if ok { "done" } else { "failed" });
        if !ok {
            failed += 1;
        }
    }
    Ok(failed)
}

fn default_alpha() -> f32 {
    0.4
}

#[derive(Serialize, Deserialize)]
struct GradcamSettings {
    checkpoint: PathBuf,
    images: Vec<PathBuf>,
    #[serde(default)]
    class: Option<String>,
    out: PathBuf,
    #[serde(default = "default_alpha")]
    alpha: f32,
    #[serde(default)]
    panel: bool,
}

#[derive(Serialize)]
struct GradcamSidecar<'a> {
    image: &'a Path,
    predicted_class: usize,
    predicted_name: &'a str,
    target_class: usize,
    target_name: &'a str,
    all_zero: bool,
    peak: (usize, usize),
}

pub fn gradcam(a: GradcamArgs) -> CliResult {
    let mut o = Overrides::default();
    o.opt("checkpoint", a.checkpoint)
        .opt("class", a.class)
        .opt("out", a.out)
        .opt("alpha", a.alpha);
    if !a.images.is_empty() {
        o.set("images", &a.images);
    }
    if a.panel {
        o.set("panel", true);
    }
    let doc = merge(a.common.config.as_deref(), &o)?;
    let s: GradcamSettings = finish("gradcam", doc)?;
    if s.images.is_empty() {
        return Err(usage("at least one --image is required"));
    }
    let model = load_checkpoint(&resolve_checkpoint(&s.checkpoint))?.model;
    let classes = model.classes().to_vec();
    let target = match &s.class {
        None => None,
        Some(c) => Some(match c.parse::<usize>() {
            Ok(i) => i,
            Err(_) => classes
                .iter()
                .position(|n| n == c)
                .ok_or_else(|| usage(format!("unknown class `{c}`")))?,
        }),
    };
    fs::create_dir_all(&s.out).with_context(|| s.out.display().to_string())?;
    let mut rows = Vec::new();
    for path in &s.images {
        let stem = path
            .file_stem()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| usage(format!("{}: no file name", path.display())))?;
        let image = eval_transform(&ImageTensor::open(path)?)?;
        let heatmap = cam::gradcam(&model, &image, target)?;
        let over = overlay(&heatmap, &image, s.alpha)?;
        let cam_path = s.out.join(format!("{stem}_cam.png"));
        fs::write(&cam_path, png_bytes(&colorize(&heatmap).to_rgb8())?).with_context(|| cam_path.display().to_string())?;
        let over_path = s.out.join(format!("{stem}_overlay.png"));
        fs::write(&over_path, png_bytes(&over)?).with_context(|| over_path.display().to_string())?;
        let sidecar = GradcamSidecar {
            image: path,
            predicted_class: heatmap.predicted_class,
            predicted_name: &classes[heatmap.predicted_class],
            target_class: heatmap.target_class,
            target_name: &classes[heatmap.target_class],
            all_zero: heatmap.all_zero,
            peak: heatmap.argmax(),
        };
        write_json(&s.out.join(format!("{stem}_cam.json")), &sidecar)?;
        if heatmap.all_zero {
            log::warn!("{}: heatmap is all zero", path.display());
        }
        println!("{}: predicted {}", path.display(), classes[heatmap.predicted_class]);
        rows.push((image, over));
    }
    if s.panel {
        let path = s.out.join("panel.png");
        fs::write(&path, png_bytes(&panel(&rows)?)?).with_context(|| path.display().to_string())?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ReportSettings {
    inputs: Vec<PathBuf>,
    out: PathBuf,
}

fn find_reports(path: &Path, out: &mut Vec<PathBuf>) -> CliResult {
    if path.is_file() {
        out.push(path.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| path.display().to_string())?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for entry in entries {
        if entry.is_dir() {
            find_reports(&entry, out)?;
        } else if entry.file_name().is_some_and(|n| n == REPORT_FILE) {
            out.push(entry);
        }
    }
    Ok(())
}

pub fn report(a: ReportArgs) -> CliResult {
    let mut o = Overrides::default();
    o.opt("out", a.out);
    if !a.inputs.is_empty() {
        o.set("inputs", &a.inputs);
    }
    let doc = merge(a.common.config.as_deref(), &o)?;
    let s: ReportSettings = finish("report", doc)?;
    let mut paths = Vec::new();
    for input in &s.inputs {
        find_reports(input, &mut paths)?;
    }
    if paths.is_empty() {
        return Err(usage("no report.json found under the given inputs"));
    }
    let reports = paths.iter().map(|p| read_report(p)).collect::<Result<Vec<_>, _>>()?;
    let tables = render_tables(&reports)?;
    fs::create_dir_all(&s.out).with_context(|| s.out.display().to_string())?;
    fs::write(s.out.join("table.txt"), &tables.text)?;
    fs::write(s.out.join("table.csv"), &tables.csv)?;
    for t in &tables.per_variant {
        fs::write(s.out.join(format!("{}.txt", t.variant.name())), &t.text)?;
        fs::write(s.out.join(format!("{}.csv", t.variant.name())), &t.csv)?;
    }
    print!("{}", tables.text);
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct WeightsSettings {
    action: WeightsAction,
    #[serde(default)]
    backbone: Option<BackboneKind>,
    #[serde(default)]
    file: Option<PathBuf>,
    #[serde(default)]
    weights_dir: Option<PathBuf>,
    #[serde(default)]
    tensors: bool,
}

pub fn weights(a: WeightsArgs) -> CliResult {
    let mut o = Overrides::default();
    o.set("action", a.action)
        .opt("backbone", a.backbone.as_deref().map(parse_backbone).transpose()?)
        .opt("file", a.file)
        .opt("weights_dir", a.weights_dir);
    if a.tensors {
        o.set("tensors", true);
    }
    let mut doc = merge(a.common.config.as_deref(), &o)?;
    if !has_path(&doc, "weights_dir") {
        if let Some(dir) = std::env::var_os(WEIGHTS_DIR_ENV) {
            set_path(&mut doc, "weights_dir", serde_json::to_value(PathBuf::from(dir)).expect("path"));
        }
    }
    let s: WeightsSettings = finish("weights", doc)?;
    let kinds: Vec<BackboneKind> = match s.backbone {
        Some(k) => vec![k],
        None => BackboneKind::PRETRAINED.to_vec(),
    };
    let dir = || {
        s.weights_dir
            .clone()
            .ok_or_else(|| usage(format!("--weights-dir or {WEIGHTS_DIR_ENV} is required")))
    };
    match s.action {
        WeightsAction::List => {
            for kind in kinds {
                match &s.weights_dir {
                    Some(d) => {
                        let path = weights_path(d, kind);
                        let state = if path.is_file() { "present" } else { "missing" };
                        println!("{kind}\t{}\t{state}", path.display());
                    }
                    None => println!("{kind}\t{kind}.safetensors"),
                }
                if s.tensors {
                    let mut names: Vec<_> = expected_tensors(&BackboneSpec::new(kind))?.into_iter().collect();
                    names.sort();
                    for (name, shape) in names {
                        println!("  {name}\t{shape:?}");
                    }
                }
            }
        }
        WeightsAction::Validate => {
            if s.file.is_some() && s.backbone.is_none() {
                return Err(usage("--file needs --backbone"));
            }
            let mut bad = 0;
            for kind in kinds {
                let path = match &s.file {
                    Some(f) => f.clone(),
                    None => weights_path(&dir()?, kind),
                };
                match validate_weights_file(&BackboneSpec::new(kind), &path) {
                    Ok(n) => println!("{kind}\t{}\tok ({n} tensors)", path.display()),
                    Err(e) => {
                        println!("{kind}\t{}\tinvalid: {e}", path.display());
                        bad += 1;
                    }
                }
            }
            if bad > 0 {
                return Err(anyhow!("{bad} weight file(s) failed validation").into());
            }
        }
        WeightsAction::Import => {
            let (Some(kind), Some(file)) = (s.backbone, &s.file) else {
                return Err(usage("import needs --backbone and --file"));
            };
            let n = validate_weights_file(&BackboneSpec::new(kind), file)?;
            let dir = dir()?;
            fs::create_dir_all(&dir).with_context(|| dir.display().to_string())?;
            let dest = weights_path(&dir, kind);
            fs::copy(file, &dest).with_context(|| dest.display().to_string())?;
            println!("{kind}\t{}\timported ({n} tensors)", dest.display());
        }
    }
    Ok(())
}

fn fixture_defaults() -> (usize, usize, usize, usize) {
    (5, 100, 100, 64)
}

#[derive(Serialize, Deserialize)]
struct FixtureSettings {
    out: PathBuf,
    #[serde(default = "defaults::classes")]
    classes: usize,
    #[serde(default = "defaults::train")]
    train: usize,
    #[serde(default = "defaults::test")]
    test: usize,
    #[serde(default = "defaults::side")]
    side: usize,
    #[serde(default)]
    seed: u64,
}

mod defaults {
    pub fn classes() -> usize {
        super::fixture_defaults().0
    }
    pub fn train() -> usize {
        super::fixture_defaults().1
    }
    pub fn test() -> usize {
        super::fixture_defaults().2
    }
    pub fn side() -> usize {
        super::fixture_defaults().3
    }
}

pub const FIXTURE_MANIFEST: &str = "manifest.csv";

pub fn fixture(a: FixtureArgs) -> CliResult {
    let mut o = Overrides::default();
    o.opt("out", a.out)
        .opt("classes", a.classes)
        .opt("train", a.train)
        .opt("test", a.test)
        .opt("side", a.side)
        .opt("seed", a.seed);
    let doc = merge(a.common.config.as_deref(), &o)?;
    let s: FixtureSettings = finish("fixture", doc)?;
    let manifest = position_fixture_manifest(&s.out, s.classes, s.train, s.test, s.side, s.seed)?;
    let path = s.out.join(FIXTURE_MANIFEST);
    manifest.write_csv(&path)?;
    println!(
        "{} classes, train {} test {}, manifest {}",
        manifest.num_classes(),
        manifest.split_len(Split::Train),
        manifest.split_len(Split::Test),
        path.display()
    );
    Ok(())
}
