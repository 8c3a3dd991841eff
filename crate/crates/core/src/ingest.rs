//! JSONL scene-record ingestion and re-emission.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_record, SceneRecord};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Open { path: String, source: io::Error },
    #[error("read failed at line {line}: {source}")]
    Read { line: usize, source: io::Error },
}

/// A line that could not be turned into a valid record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedLine {
    pub line: usize,
    pub reason: String,
}

/// Counters for one ingestion pass.
///
/// `rejected` counts local parse/validation failures; `error_records` counts
/// well-formed records carrying an upstream error descriptor. Only the latter
/// feeds `err_pct`. Blank lines are ignored entirely.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestStats {
    pub total_lines: usize,
    pub parsed: usize,
    pub rejected: usize,
    pub error_records: usize,
    pub err_pct: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejected_lines: Vec<RejectedLine>,
}

impl IngestStats {
    fn finish(mut self) -> Self {
        self.err_pct = if self.parsed == 0 {
            0.0
        } else {
            100.0 * self.error_records as f64 / self.parsed as f64
        };
        self
    }
}

/// Reads one scene per line. Malformed or invalid lines are counted and
/// logged but never abort the stream; only I/O failures are fatal.
pub fn load_scene_records<R: BufRead>(
    source: R,
) -> Result<(Vec<SceneRecord>, IngestStats), IngestError> {
    let mut records = Vec::new();
    let mut stats = IngestStats::default();
    let mut seen = HashSet::new();
    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| IngestError::Read {
            line: lineno,
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        stats.total_lines += 1;
        let outcome = serde_json::from_str::<SceneRecord>(&line)
            .map_err(|e| format!("malformed JSON: {e}"))
            .and_then(|r| validate_record(r).map_err(|e| e.to_string()))
            .and_then(|r| {
                if seen.insert(r.scene_id.clone()) {
                    Ok(r)
                } else {
                    Err(format!("duplicate scene_id {:?}", r.scene_id))
                }
            });
        match outcome {
            Ok(record) => {
                stats.parsed += 1;
                if record.is_error() {
                    stats.error_records += 1;
                }
                records.push(record);
            }
            Err(reason) => {
                warn!("line {lineno}: {reason}");
                stats.rejected += 1;
                stats.rejected_lines.push(RejectedLine {
                    line: lineno,
                    reason,
                });
            }
        }
    }
    Ok((records, stats.finish()))
}

pub fn load_scene_file(
    path: impl AsRef<Path>,
) -> Result<(Vec<SceneRecord>, IngestStats), IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Open {
        path: path.display().to_string(),
        source,
    })?;
    load_scene_records(BufReader::new(file))
}

/// Writes records in canonical form: one compact JSON object per line with
/// fields in schema order and unknown output fields sorted by key.
pub fn write_scene_records<W: Write>(mut sink: W, records: &[SceneRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut sink, r)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}
