//! Style-transfer datasets: the record type, JSONL/TSV loading and writing,
//! text cleaning, and the synthetic symbolic-comparison task.

mod clean;
mod symb;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clean::{clean_text, CONTRACTION_SUFFIXES};
pub use symb::{
    generate_symb, parse_comparison, verbalize_comparison, ComparisonParseError, SymbSpec,
};

use crate::prompt::{direction_label, StyleLabel};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Parse(#[from] ComparisonParseError),
    #[error("unknown dataset format `{0}` (expected jsonl or tsv)")]
    UnknownFormat(String),
    #[error("cannot write: {0}")]
    Write(String),
}

/// One row: a source text, an optional human reference, and its direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StylePairRecord {
    pub id: String,
    pub source: String,
    #[serde(default)]
    pub reference: Option<String>,
    pub source_style: StyleLabel,
    pub target_style: StyleLabel,
}

impl StylePairRecord {
    pub fn direction(&self) -> String {
        direction_label(&self.source_style, &self.target_style)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Jsonl,
    Tsv,
}

impl FromStr for DatasetFormat {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(DatasetFormat::Jsonl),
            "tsv" => Ok(DatasetFormat::Tsv),
            other => Err(DatasetError::UnknownFormat(other.to_string())),
        }
    }
}

impl DatasetFormat {
    /// Guesses from the file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("tsv") => DatasetFormat::Tsv,
            _ => DatasetFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub format: DatasetFormat,
    /// Fail on the first malformed row instead of skipping it.
    pub strict: bool,
    /// Run [`clean_text`] over sources and references.
    pub clean: bool,
    /// Keep only sources whose whitespace word count lies in `[min, max]`.
    pub word_range: Option<(usize, usize)>,
}

impl LoadOptions {
    pub fn new(format: DatasetFormat) -> Self {
        Self {
            format,
            strict: false,
            clean: false,
            word_range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedRow {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct DatasetReport {
    pub count: usize,
    /// Record count per `source->target` direction.
    pub directions: BTreeMap<String, usize>,
    pub skipped: Vec<SkippedRow>,
    pub filtered: usize,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub records: Vec<StylePairRecord>,
    pub report: DatasetReport,
}

pub fn load_dataset(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<LoadedDataset, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_dataset(file, opts)
}

pub fn read_dataset(reader: impl Read, opts: &LoadOptions) -> Result<LoadedDataset, DatasetError> {
    let mut records = Vec::new();
    let mut report = DatasetReport::default();
    let mut ids = HashSet::new();

    let reader = BufReader::new(reader);
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|source| DatasetError::Io {
            path: format!("line {lineno}"),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = match opts.format {
            DatasetFormat::Jsonl => parse_jsonl_row(&line),
            DatasetFormat::Tsv => {
                if lineno == 1 && is_tsv_header(&line) {
                    continue;
                }
                parse_tsv_row(&line)
            }
        }
        .and_then(|r| {
            if ids.contains(&r.id) {
                Err(format!("duplicate id `{}`", r.id))
            } else {
                Ok(r)
            }
        });

        let mut record = match parsed {
            Ok(r) => r,
            Err(message) if opts.strict => {
                return Err(DatasetError::Malformed {
                    line: lineno,
                    message,
                })
            }
            Err(reason) => {
                warn!("skipping line {lineno}: {reason}");
                report.skipped.push(SkippedRow {
                    line: lineno,
                    reason,
                });
                continue;
            }
        };
        ids.insert(record.id.clone());

        if opts.clean {
            record.source = clean_text(&record.source);
            record.reference = record.reference.as_deref().map(clean_text);
        }
        if let Some((lo, hi)) = opts.word_range {
            let n = record.source.split_whitespace().count();
            if n < lo || n > hi {
                report.filtered += 1;
                continue;
            }
        }
        *report.directions.entry(record.direction()).or_default() += 1;
        records.push(record);
    }
    report.count = records.len();
    Ok(LoadedDataset { records, report })
}

fn check_source(r: StylePairRecord) -> Result<StylePairRecord, String> {
    if r.source.trim().is_empty() {
        return Err("empty source".into());
    }
    if r.id.trim().is_empty() {
        return Err("empty id".into());
    }
    Ok(r)
}

fn parse_jsonl_row(line: &str) -> Result<StylePairRecord, String> {
    let mut r: StylePairRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if r.reference.as_deref().is_some_and(|s| s.trim().is_empty()) {
        r.reference = None;
    }
    check_source(r)
}

const TSV_HEADER: [&str; 5] = ["id", "source", "reference", "source_style", "target_style"];

fn is_tsv_header(line: &str) -> bool {
    let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
    cols.first() == Some(&"id") && cols.iter().all(|c| TSV_HEADER.contains(c))
}

fn parse_tsv_row(line: &str) -> Result<StylePairRecord, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    let (id, source, reference, s1, s2) = match cols.as_slice() {
        [id, src, reference, s1, s2] => (id, src, Some(*reference), s1, s2),
        [id, src, s1, s2] => (id, src, None, s1, s2),
        _ => return Err(format!("expected 4 or 5 tab-separated columns, found {}", cols.len())),
    };
    let label = |s: &str| s.parse::<StyleLabel>().map_err(|e| e.to_string());
    check_source(StylePairRecord {
        id: id.trim().to_string(),
        source: source.to_string(),
        reference: reference
            .filter(|r| !r.trim().is_empty())
            .map(str::to_string),
        source_style: label(s1)?,
        target_style: label(s2)?,
    })
}

/// Writes records as JSONL, or as TSV with a header row.
pub fn write_records(
    mut out: impl Write,
    records: &[StylePairRecord],
    format: DatasetFormat,
) -> Result<(), DatasetError> {
    let err = |e: std::io::Error| DatasetError::Write(e.to_string());
    match format {
        DatasetFormat::Jsonl => {
            for r in records {
                let line = serde_json::to_string(r).map_err(|e| DatasetError::Write(e.to_string()))?;
                writeln!(out, "{line}").map_err(err)?;
            }
        }
        DatasetFormat::Tsv => {
            writeln!(out, "{}", TSV_HEADER.join("\t")).map_err(err)?;
            for r in records {
                let fields = [
                    r.id.clone(),
                    r.source.clone(),
                    r.reference.clone().unwrap_or_default(),
                    r.source_style.to_string(),
                    r.target_style.to_string(),
                ];
                if let Some(f) = fields.iter().find(|f| f.contains(['\t', '\n', '\r'])) {
                    return Err(DatasetError::Write(format!(
                        "record {}: field `{f}` contains a tab or newline",
                        r.id
                    )));
                }
                writeln!(out, "{}", fields.join("\t")).map_err(err)?;
            }
        }
    }
    Ok(())
}
