//! JSON Lines persistence for memory records.
//!
//! One record per line, LF terminated, UTF-8. Vector components are written
//! with nine significant digits, which round-trips every `f32` exactly, so a
//! reloaded store ranks identically and re-saving yields the same bytes.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::embedding::EmbeddingVector;
use crate::record::{MemoryRecord, RecordId, UserId};
use crate::store::{Inner, StoreError};

/// Outcome of reading a journal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JournalLoad {
    pub records: usize,
    /// Unterminated, unparseable final lines that were skipped.
    pub truncated_lines: usize,
}

struct Components<'a>(&'a [f32]);

impl Serialize for Components<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
        for x in self.0 {
            let raw = RawValue::from_string(format!("{x:.8e}")).map_err(serde::ser::Error::custom)?;
            seq.serialize_element(&raw)?;
        }
        seq.end()
    }
}

#[derive(Serialize)]
struct LineOut<'a> {
    record_id: &'a RecordId,
    user_id: &'a UserId,
    text: &'a str,
    timestamp: &'a DateTime<Utc>,
    source_id: &'a str,
    chunk_index: usize,
    vector: Components<'a>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LineIn {
    record_id: RecordId,
    user_id: UserId,
    text: String,
    timestamp: DateTime<Utc>,
    source_id: String,
    chunk_index: usize,
    vector: Vec<f32>,
}

pub fn encode_line(record: &MemoryRecord) -> String {
    let line = LineOut {
        record_id: &record.record_id,
        user_id: &record.user_id,
        text: &record.text,
        timestamp: &record.timestamp,
        source_id: &record.source_id,
        chunk_index: record.chunk_index,
        vector: Components(record.vector.as_slice()),
    };
    serde_json::to_string(&line).expect("journal line serializes")
}

pub fn decode_line(line: &str) -> Result<MemoryRecord, String> {
    let parsed: LineIn = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let vector = EmbeddingVector::from_unit(parsed.vector).map_err(|e| e.to_string())?;
    Ok(MemoryRecord {
        record_id: parsed.record_id,
        user_id: parsed.user_id,
        text: parsed.text,
        timestamp: parsed.timestamp,
        source_id: parsed.source_id,
        chunk_index: parsed.chunk_index,
        vector,
    })
}

pub(crate) fn write_all<'a>(
    path: &Path,
    records: impl Iterator<Item = &'a MemoryRecord>,
) -> io::Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        for record in records {
            out.write_all(encode_line(record).as_bytes())?;
            out.write_all(b"\n")?;
        }
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    }
    fs::rename(tmp, path)
}

pub(crate) fn read_all(path: &Path) -> Result<(Inner, JournalLoad), StoreError> {
    let content = fs::read_to_string(path)?;
    let mut inner = Inner::default();
    let mut load = JournalLoad::default();

    let terminated = content.ends_with('\n');
    let lines: Vec<&str> = content.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        match decode_line(line) {
            Ok(record) => {
                inner.insert(record).map_err(|e| StoreError::Journal {
                    line: line_no,
                    reason: e.to_string(),
                })?;
                load.records += 1;
            }
            Err(_) if line_no == lines.len() && !terminated => {
                load.truncated_lines += 1;
            }
            Err(reason) => return Err(StoreError::Journal { line: line_no, reason }),
        }
    }
    Ok((inner, load))
}

/// Appends records to an existing journal, one flush per batch.
#[derive(Debug)]
pub struct JournalWriter {
    path: PathBuf,
    file: File,
}

impl JournalWriter {
    pub fn append(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append_records(&mut self, records: &[MemoryRecord]) -> io::Result<()> {
        let mut buf = String::new();
        for record in records {
            buf.push_str(&encode_line(record));
            buf.push('\n');
        }
        self.file.write_all(buf.as_bytes())?;
        self.file.flush()
    }
}
