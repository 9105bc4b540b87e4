//! Confusion matrices, top-k accuracy, precision/recall/F1 and result
//! tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backbone::BackboneKind;
use crate::data::manifest::write_atomic;
use crate::error::{Error, IoContext, Result};
use crate::train::VariantKind;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: Vec<String>) -> Self {
        let k = classes.len();
        Self {
            classes,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn diagonal(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let k = self.num_classes();
        (0..k).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    /// CSV with class names as the header row and first column.
    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut buf);
            let mut header = vec!["true\\predicted".to_string()];
            header.extend(self.classes.iter().cloned());
            w.write_record(&header)?;
            for (name, row) in self.classes.iter().zip(&self.counts) {
                let mut rec = vec![name.clone()];
                rec.extend(row.iter().map(|c| c.to_string()));
                w.write_record(&rec)?;
            }
            w.flush().map_err(|e| Error::Metric(e.to_string()))?;
        }
        Ok(String::from_utf8(buf).expect("utf-8 csv"))
    }
}

fn index_names(k: usize) -> Vec<String> {
    (0..k).map(|i| i.to_string()).collect()
}

/// Counts (true, predicted) pairs; classes are named by index.
pub fn confusion(predicted: &[usize], truth: &[usize], k: usize) -> Result<ConfusionMatrix> {
    confusion_named(predicted, truth, index_names(k))
}

pub fn confusion_named(predicted: &[usize], truth: &[usize], classes: Vec<String>) -> Result<ConfusionMatrix> {
    if predicted.len() != truth.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(classes);
    let k = cm.num_classes();
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::Input(format!("class index ({t}, {p}) outside {k} classes")));
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroDivision {
    /// 0/0 is reported as 0.
    #[default]
    Zero,
    /// 0/0 is reported as NaN and propagates into the averages.
    Nan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Unweighted mean over classes.
    #[default]
    Macro,
    /// Mean weighted by true-class support.
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub class_name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub per_class: Vec<ClassScores>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub averaging: Averaging,
}

fn ratio(num: f64, den: f64, zero: ZeroDivision) -> f64 {
    if den == 0.0 {
        match zero {
            ZeroDivision::Zero => 0.0,
            ZeroDivision::Nan => f64::NAN,
        }
    } else {
        num / den
    }
}

/// Macro precision/recall/F1 with 0/0 = 0.
pub fn prf_from_confusion(cm: &ConfusionMatrix) -> Result<Prf> {
    prf_with(cm, Averaging::Macro, ZeroDivision::Zero)
}

pub fn prf_with(cm: &ConfusionMatrix, averaging: Averaging, zero: ZeroDivision) -> Result<Prf> {
    if cm.num_classes() == 0 || cm.total() == 0 {
        return Err(Error::Metric("precision/recall need at least one sample".into()));
    }
    let rows = cm.row_sums();
    let cols = cm.col_sums();
    let per_class: Vec<ClassScores> = (0..cm.num_classes())
        .map(|k| {
            let tp = cm.counts[k][k] as f64;
            let fp = cols[k] as f64 - tp;
            let fn_ = rows[k] as f64 - tp;
            let precision = ratio(tp, tp + fp, zero);
            let recall = ratio(tp, tp + fn_, zero);
            let f1 = ratio(2.0 * precision * recall, precision + recall, zero);
            ClassScores {
                class_name: cm.classes[k].clone(),
                precision,
                recall,
                f1,
                support: rows[k],
            }
        })
        .collect();
    let weights: Vec<f64> = match averaging {
        Averaging::Macro => vec![1.0; per_class.len()],
        Averaging::Weighted => rows.iter().map(|&r| r as f64).collect(),
    };
    let wsum: f64 = weights.iter().sum();
    let avg = |f: fn(&ClassScores) -> f64| per_class.iter().zip(&weights).map(|(c, w)| f(c) * w).sum::<f64>() / wsum;
    Ok(Prf {
        precision: avg(|c| c.precision),
        recall: avg(|c| c.recall),
        f1: avg(|c| c.f1),
        per_class,
        averaging,
    })
}

/// Index of the largest entry; the lower index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// The `k` most probable classes, highest first; ties go to the lower index.
pub fn top_k(row: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Fraction of rows whose true class is among the `k` most probable.
pub fn topk_accuracy(probs: &[Vec<f64>], truth: &[usize], k: usize) -> Result<f64> {
    if probs.len() != truth.len() {
        return Err(Error::Input(format!("{} rows for {} labels", probs.len(), truth.len())));
    }
    if probs.is_empty() {
        return Err(Error::Metric("top-k accuracy of an empty set".into()));
    }
    let classes = probs[0].len();
    if k == 0 || k > classes {
        return Err(Error::Parameter(format!("k = {k} must be in 1..={classes}")));
    }
    let mut hits = 0usize;
    for (row, &t) in probs.iter().zip(truth) {
        if row.len() != classes {
            return Err(Error::Input("probability rows differ in length".into()));
        }
        if top_k(row, k).contains(&t) {
            hits += 1;
        }
    }
    Ok(hits as f64 / probs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variant: VariantKind,
    pub backbone: BackboneKind,
    pub split: String,
    pub samples: usize,
    pub top1: f64,
    /// Top-3, or top-K when there are fewer than three classes.
    pub top3: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub averaging: Averaging,
    pub per_class: Vec<ClassScores>,
    pub confusion: ConfusionMatrix,
    /// Backbone plus head parameters, in millions.
    pub params_millions: f64,
    /// Configuration echo (training and model settings).
    #[serde(default)]
    pub config: serde_json::Value,
}

pub struct ReportInputs<'a> {
    pub variant: VariantKind,
    pub backbone: BackboneKind,
    pub split: &'a str,
    pub classes: &'a [String],
    pub params_millions: f64,
    pub averaging: Averaging,
    pub zero_division: ZeroDivision,
    pub config: serde_json::Value,
}

/// Aggregates every metric from class probabilities and true labels.
pub fn metrics_report(probs: &[Vec<f64>], truth: &[usize], inputs: ReportInputs<'_>) -> Result<MetricsReport> {
    let k = inputs.classes.len();
    let predicted: Vec<usize> = probs.iter().map(|r| argmax(r)).collect();
    let cm = confusion_named(&predicted, truth, inputs.classes.to_vec())?;
    let prf = prf_with(&cm, inputs.averaging, inputs.zero_division)?;
    Ok(MetricsReport {
        variant: inputs.variant,
        backbone: inputs.backbone,
        split: inputs.split.to_string(),
        samples: truth.len(),
        top1: topk_accuracy(probs, truth, 1)?,
        top3: topk_accuracy(probs, truth, k.min(3))?,
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        averaging: prf.averaging,
        per_class: prf.per_class,
        confusion: cm,
        params_millions: inputs.params_millions,
        config: inputs.config,
    })
}

pub const TABLE_COLUMNS: [&str; 7] = [
    "Backbone CNN",
    "Top-1 Acc",
    "Top-3 Acc",
    "Precision",
    "Recall",
    "F1-score",
    "Param (M)",
];

fn row_cells(r: &MetricsReport) -> [String; 7] {
    let pct = |v: f64| format!("{:.2}", v * 100.0);
    [
        r.backbone.display_name().to_string(),
        pct(r.top1),
        pct(r.top3),
        pct(r.precision),
        pct(r.recall),
        pct(r.f1),
        format!("{:.1}", r.params_millions),
    ]
}

fn sorted(reports: &[MetricsReport]) -> Vec<&MetricsReport> {
    let mut rows: Vec<&MetricsReport> = reports.iter().collect();
    rows.sort_by_key(|r| (r.variant.table_rank(), r.backbone));
    rows
}

fn aligned(rows: &[[String; 7]]) -> String {
    let mut widths: Vec<usize> = TABLE_COLUMNS.iter().map(|c| c.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |cells: &[&str], out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&TABLE_COLUMNS, &mut out);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&rule.join("  "));
    out.push('\n');
    for row in rows {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&cells, &mut out);
    }
    out
}

fn csv_table(rows: &[[String; 7]]) -> Result<String> {
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut buf);
        w.write_record(TABLE_COLUMNS)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| Error::Metric(e.to_string()))?;
    }
    Ok(String::from_utf8(buf).expect("utf-8 csv"))
}

/// One variant's rows in the seven-column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantTable {
    pub variant: VariantKind,
    pub text: String,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTables {
    /// Every variant's table under its title.
    pub text: String,
    /// Same rows as one CSV; the variant is the first column.
    pub csv: String,
    pub per_variant: Vec<VariantTable>,
}

/// Renders reports grouped by variant, one row per backbone.
pub fn render_tables(reports: &[MetricsReport]) -> Result<RenderedTables> {
    if reports.is_empty() {
        return Err(Error::Metric("no reports to render".into()));
    }
    let rows = sorted(reports);
    let mut per_variant = Vec::new();
    let mut text = String::new();
    for kind in VariantKind::TABLE_ORDER {
        let cells: Vec<[String; 7]> = rows.iter().filter(|r| r.variant == kind).map(|r| row_cells(r)).collect();
        if cells.is_empty() {
            continue;
        }
        let table = aligned(&cells);
        if !text.is_empty() {
            text.push('\n');
        }
        let _ = writeln!(text, "{} ({})", kind.title(), kind.name());
        text.push_str(&table);
        per_variant.push(VariantTable {
            variant: kind,
            text: table,
            csv: csv_table(&cells)?,
        });
    }
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut buf);
        let mut header = vec!["Variant"];
        header.extend(TABLE_COLUMNS);
        w.write_record(&header)?;
        for r in &rows {
            let mut rec = vec![r.variant.name().to_string()];
            rec.extend(row_cells(r));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Metric(e.to_string()))?;
    }
    Ok(RenderedTables {
        text,
        csv: String::from_utf8(buf).expect("utf-8 csv"),
        per_variant,
    })
}

pub const REPORT_FILE: &str = "report.json";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const TABLE_TEXT_FILE: &str = "table.txt";
pub const TABLE_CSV_FILE: &str = "table.csv";

pub fn report_json(report: &MetricsReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

/// Writes `report.json`, `confusion.csv`, `table.txt` and `table.csv`.
pub fn write_report(dir: &Path, report: &MetricsReport) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    write_atomic(&dir.join(REPORT_FILE), report_json(report)?.as_bytes())?;
    write_atomic(&dir.join(CONFUSION_FILE), report.confusion.to_csv()?.as_bytes())?;
    let tables = render_tables(std::slice::from_ref(report))?;
    write_atomic(&dir.join(TABLE_TEXT_FILE), tables.text.as_bytes())?;
    write_atomic(&dir.join(TABLE_CSV_FILE), tables.per_variant[0].csv.as_bytes())?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<MetricsReport> {
    let text = fs::read_to_string(path).at(path)?;
    Ok(serde_json::from_str(&text)?)
}
