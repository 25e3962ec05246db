//! Append-only persistence for run logs and tariff history.
//!
//! One line-delimited JSON file per record kind under a data directory:
//! `runs.jsonl` and `tariffs.jsonl`. Records are immutable once written and
//! ids increase monotonically across both files, so a store can be reopened
//! and appended to indefinitely. The wall-clock creation timestamp lives
//! only in this envelope — payloads stay deterministic.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::runlog::RunLog;
use crate::scalar::Scalar;
use crate::tariff::PriceSchedule;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("record is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("record {id} does not exist")]
    NotFound { id: u64 },
    #[error("record {id} is a {actual:?} record, not {expected:?}")]
    WrongKind { id: u64, expected: RecordKind, actual: RecordKind },
    #[error("{file} line {line} is corrupt: {message}")]
    Corrupt { file: String, line: usize, message: String },
}

/// What a history record holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Run,
    Tariff,
}

impl RecordKind {
    fn file_name(self) -> &'static str {
        match self {
            RecordKind::Run => "runs.jsonl",
            RecordKind::Tariff => "tariffs.jsonl",
        }
    }
}

/// Envelope around a stored payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    /// Unique, monotonically increasing across the whole store.
    pub id: u64,
    /// RFC 3339 creation timestamp (UTC).
    pub created: String,
    pub kind: RecordKind,
    pub payload: Value,
}

/// A store rooted at a data directory.
#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    next_id: u64,
}

impl Store {
    /// Opens (creating if necessary) the store under `dir` and resumes id
    /// numbering after the highest id on disk.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut max_id = 0;
        for kind in [RecordKind::Run, RecordKind::Tariff] {
            let path = dir.join(kind.file_name());
            if !path.exists() {
                continue;
            }
            for record in read_records(&path)? {
                max_id = max_id.max(record.id);
            }
        }
        Ok(Self { dir, next_id: max_id + 1 })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Appends a payload of the given kind and returns its new id.
    pub fn append<P: Serialize>(
        &mut self,
        kind: RecordKind,
        payload: &P,
    ) -> Result<u64, StoreError> {
        let record = HistoryRecord {
            id: self.next_id,
            created: Utc::now().to_rfc3339_opts(SecondsFormat::Micros, true),
            kind,
            payload: serde_json::to_value(payload)?,
        };
        let mut line = serde_json::to_string(&record)?;
        line.push('\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.dir.join(kind.file_name()))?;
        file.write_all(line.as_bytes())?;
        file.flush()?;
        self.next_id += 1;
        Ok(record.id)
    }

    pub fn append_run<T: Scalar>(&mut self, log: &RunLog<T>) -> Result<u64, StoreError> {
        self.append(RecordKind::Run, log)
    }

    pub fn append_tariff<T: Scalar>(
        &mut self,
        prices: &PriceSchedule<T>,
    ) -> Result<u64, StoreError> {
        self.append(RecordKind::Tariff, prices)
    }

    /// Loads one record by id.
    pub fn load(&self, id: u64) -> Result<HistoryRecord, StoreError> {
        for kind in [RecordKind::Run, RecordKind::Tariff] {
            let path = self.dir.join(kind.file_name());
            if !path.exists() {
                continue;
            }
            if let Some(record) = read_records(&path)?.into_iter().find(|r| r.id == id) {
                return Ok(record);
            }
        }
        Err(StoreError::NotFound { id })
    }

    /// Loads a record and decodes it as a run log.
    pub fn load_run<T: Scalar>(&self, id: u64) -> Result<RunLog<T>, StoreError> {
        let record = self.load(id)?;
        if record.kind != RecordKind::Run {
            return Err(StoreError::WrongKind {
                id,
                expected: RecordKind::Run,
                actual: record.kind,
            });
        }
        Ok(serde_json::from_value(record.payload)?)
    }

    /// Loads a record and decodes it as a price schedule.
    pub fn load_tariff<T: Scalar>(&self, id: u64) -> Result<PriceSchedule<T>, StoreError> {
        let record = self.load(id)?;
        if record.kind != RecordKind::Tariff {
            return Err(StoreError::WrongKind {
                id,
                expected: RecordKind::Tariff,
                actual: record.kind,
            });
        }
        Ok(serde_json::from_value(record.payload)?)
    }

    /// Ids of stored records, ascending, optionally filtered by kind and by
    /// an inclusive creation-time range.
    pub fn list(
        &self,
        kind: Option<RecordKind>,
        created_from: Option<DateTime<Utc>>,
        created_to: Option<DateTime<Utc>>,
    ) -> Result<Vec<u64>, StoreError> {
        let kinds = match kind {
            Some(k) => vec![k],
            None => vec![RecordKind::Run, RecordKind::Tariff],
        };
        let mut ids = Vec::new();
        for k in kinds {
            let path = self.dir.join(k.file_name());
            if !path.exists() {
                continue;
            }
            for record in read_records(&path)? {
                let created = DateTime::parse_from_rfc3339(&record.created)
                    .map(|t| t.with_timezone(&Utc))
                    .map_err(|e| StoreError::Corrupt {
                        file: k.file_name().into(),
                        line: 0,
                        message: format!("unparsable created timestamp: {e}"),
                    })?;
                if created_from.is_some_and(|from| created < from) {
                    continue;
                }
                if created_to.is_some_and(|to| created > to) {
                    continue;
                }
                ids.push(record.id);
            }
        }
        ids.sort_unstable();
        Ok(ids)
    }
}

fn read_records(path: &Path) -> Result<Vec<HistoryRecord>, StoreError> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: HistoryRecord =
            serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                file: path.display().to_string(),
                line: index + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}
