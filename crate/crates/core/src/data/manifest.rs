//! Dataset manifests: one record per decodable image under
//! `<root>/<class>/<file>`, persisted as CSV.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

pub const MANIFEST_HEADER: [&str; 4] = ["relative_path", "class_name", "class_index", "split"];
const IMAGE_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            other => Err(Error::Input(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub relative_path: String,
    pub class_name: String,
    pub class_index: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkipEntry {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub classes: Vec<String>,
    pub records: Vec<Record>,
    /// Files found under the root that did not become records.
    pub skipped: Vec<SkipEntry>,
    pub warnings: Vec<String>,
}

impl DatasetManifest {
    /// Builds a manifest from explicit records, deriving the class table
    /// (sorted names) and checking the indices against it.
    pub fn from_records(root: impl Into<PathBuf>, classes: Vec<String>, records: Vec<Record>) -> Result<Self> {
        let manifest = Self {
            root: root.into(),
            classes,
            records,
            skipped: Vec::new(),
            warnings: Vec::new(),
        };
        manifest.check()?;
        Ok(manifest)
    }

    fn check(&self) -> Result<()> {
        for r in &self.records {
            if self.classes.get(r.class_index) != Some(&r.class_name) {
                return Err(Error::Input(format!(
                    "{}: class index {} does not name `{}`",
                    r.relative_path, r.class_index, r.class_name
                )));
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn path_of(&self, record: &Record) -> PathBuf {
        self.root.join(&record.relative_path)
    }

    /// Indices of the records in `split`, in manifest order.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn split_len(&self, split: Split) -> usize {
        self.records.iter().filter(|r| r.split == split).count()
    }

    /// Per-class record counts for `split`, indexed like `classes`.
    pub fn class_counts(&self, split: Split) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for r in self.records.iter().filter(|r| r.split == split) {
            counts[r.class_index] += 1;
        }
        counts
    }

    /// The CSV document `write_csv` produces.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut buf);
            w.write_record(MANIFEST_HEADER)?;
            for r in &self.records {
                w.write_record([
                    r.relative_path.as_str(),
                    r.class_name.as_str(),
                    &r.class_index.to_string(),
                    r.split.as_str(),
                ])?;
            }
            w.flush().map_err(|e| Error::Input(e.to_string()))?;
        }
        Ok(String::from_utf8(buf).map_err(|e| Error::Input(e.to_string()))?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string()?.as_bytes())
    }

    /// Reads a manifest CSV. The class table is rebuilt from the records;
    /// indices must be contiguous from zero.
    pub fn read_csv(path: &Path, root: impl Into<PathBuf>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().from_path(path).map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Input(format!("{}: {e}", path.display())),
            _ => Error::Csv(e),
        })?;
        let header = reader.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
            return Err(Error::Input(format!(
                "{}: expected header `{}`",
                path.display(),
                MANIFEST_HEADER.join(",")
            )));
        }
        let mut records = Vec::new();
        for row in reader.records() {
            let row = row?;
            let class_index = row[2]
                .parse()
                .map_err(|_| Error::Input(format!("{}: bad class index `{}`", path.display(), &row[2])))?;
            records.push(Record {
                relative_path: row[0].to_string(),
                class_name: row[1].to_string(),
                class_index,
                split: row[3].parse()?,
            });
        }
        let n = records.iter().map(|r| r.class_index + 1).max().unwrap_or(0);
        let mut classes: Vec<Option<String>> = vec![None; n];
        for r in &records {
            classes[r.class_index].get_or_insert_with(|| r.class_name.clone());
        }
        let classes = classes
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| Error::Input(format!("{}: no record for class index {i}", path.display()))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_records(root, classes, records)
    }

    /// Plain-text skip report, one `path<TAB>reason` per line.
    pub fn skip_report(&self) -> String {
        self.skipped.iter().map(|s| format!("{}\t{}\n", s.path, s.reason)).collect()
    }

    pub fn write_skip_report(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.skip_report().as_bytes())
    }
}

/// Scans `<root>/<class>/<file>`; classes are the subdirectories sorted by
/// name. Every file is fully decoded; failures go to the skip report.
pub fn build_manifest(root: &Path) -> Result<DatasetManifest> {
    let mut class_dirs = Vec::new();
    for entry in fs::read_dir(root).at(root)? {
        let entry = entry.at(root)?;
        if entry.file_type().at(entry.path())?.is_dir() {
            class_dirs.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    class_dirs.sort();
    if class_dirs.is_empty() {
        return Err(Error::Ingestion(format!("{}: no class folders", root.display())));
    }

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut warnings = Vec::new();
    for (class_index, class_name) in class_dirs.iter().enumerate() {
        let dir = root.join(class_name);
        let mut files = Vec::new();
        for entry in fs::read_dir(&dir).at(&dir)? {
            let entry = entry.at(&dir)?;
            if entry.file_type().at(entry.path())?.is_file() {
                files.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        files.sort();
        let before = records.len();
        for file in files {
            let relative_path = format!("{class_name}/{file}");
            let ext = Path::new(&file)
                .extension()
                .map(|e| e.to_string_lossy().to_ascii_lowercase())
                .unwrap_or_default();
            if !IMAGE_EXTENSIONS.contains(&ext.as_str()) {
                skipped.push(SkipEntry {
                    path: relative_path,
                    reason: "not a JPEG/PNG file".into(),
                });
                continue;
            }
            match decode_check(&dir.join(&file)) {
                Ok(()) => records.push(Record {
                    relative_path,
                    class_name: class_name.clone(),
                    class_index,
                    split: Split::Unassigned,
                }),
                Err(reason) => skipped.push(SkipEntry {
                    path: relative_path,
                    reason,
                }),
            }
        }
        if records.len() == before {
            let msg = format!("class folder `{class_name}` has no decodable images");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    if records.is_empty() {
        return Err(Error::Ingestion(format!("{}: no decodable images", root.display())));
    }
    Ok(DatasetManifest {
        root: root.to_path_buf(),
        classes: class_dirs,
        records,
        skipped,
        warnings,
    })
}

fn decode_check(path: &Path) -> std::result::Result<(), String> {
    let reader = image::ImageReader::open(path)
        .and_then(|r| r.with_guessed_format())
        .map_err(|e| e.to_string())?;
    reader.decode().map(|_| ()).map_err(|e| e.to_string().replace(['\n', '\t'], " "))
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_file_name(format!(
        ".{}.tmp-{}",
        path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp).at(&tmp)?;
        f.write_all(bytes).at(&tmp)?;
        f.sync_all().at(&tmp)?;
    }
    fs::rename(&tmp, path).at(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_parse_round_trip() {
        for s in [Split::Train, Split::Val, Split::Test, Split::Unassigned] {
            assert_eq!(s.as_str().parse::<Split>().unwrap(), s);
        }
        assert!("holdout".parse::<Split>().is_err());
    }

    #[test]
    fn inconsistent_index_rejected() {
        let rec = Record {
            relative_path: "a/1.png".into(),
            class_name: "a".into(),
            class_index: 1,
            split: Split::Train,
        };
        assert!(DatasetManifest::from_records("/", vec!["a".into(), "b".into()], vec![rec]).is_err());
    }
}
