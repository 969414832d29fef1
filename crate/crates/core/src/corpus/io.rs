use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{validate_record, AnnotationRecord};
use crate::digest::sha256_hex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    /// First malformed line aborts the load.
    Strict,
    /// Malformed lines are skipped and reported.
    #[default]
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineDiagnostic {
    /// 1-based.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedDataset {
    pub records: Vec<AnnotationRecord>,
    /// 1-based source line of each record.
    pub lines: Vec<usize>,
    pub diagnostics: Vec<LineDiagnostic>,
}

impl LoadedDataset {
    pub fn hash(&self) -> String {
        dataset_hash(&self.records)
    }
}

fn record_line(record: &AnnotationRecord) -> String {
    serde_json::to_string(&record.to_json()).expect("record serializes")
}

pub fn load_dataset(path: &Path, mode: LoadMode) -> Result<LoadedDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = LoadedDataset::default();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str(&line)
            .map_err(|e| format!("invalid JSON: {e}"))
            .and_then(|value| validate_record(&value).map_err(|e| e.to_string()));
        match parsed {
            Ok(record) => {
                out.records.push(record);
                out.lines.push(line_no);
            }
            Err(message) => {
                if mode == LoadMode::Strict {
                    return Err(Error::MalformedLine {
                        path: path.to_path_buf(),
                        line: line_no,
                        message,
                    });
                }
                out.diagnostics.push(LineDiagnostic {
                    line: line_no,
                    message,
                });
            }
        }
    }
    Ok(out)
}

pub fn save_dataset(records: &[AnnotationRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        writeln!(writer, "{}", record_line(record)).map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// SHA-256 over the canonical line serialization of the records.
pub fn dataset_hash(records: &[AnnotationRecord]) -> String {
    let mut canonical = String::new();
    for record in records {
        canonical.push_str(&record_line(record));
        canonical.push('\n');
    }
    sha256_hex(canonical.as_bytes())
}
