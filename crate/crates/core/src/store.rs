//! Durable log of generation interactions and their ratings.
//!
//! [`JsonlStore`] keeps one JSON object per line. Interactions and ratings are
//! separate lines, so the file is only ever appended to; the in-memory index is
//! rebuilt from the log on open.
//!
//! ```text
//! {"v":1,"type":"interaction","record":{"id":"…","prompt":"…",…}}
//! {"v":1,"type":"rating","id":"…","rating":4}
//! ```

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;
use unicode_normalization::UnicodeNormalization;
use uuid::Uuid;

use crate::params::SamplingParams;

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_PAGE_SIZE: usize = 1000;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("no interaction with id {0}")]
    NotFound(Uuid),
    #[error("interaction {0} is already rated")]
    AlreadyRated(Uuid),
    #[error("rating {0} is outside 1..=5")]
    OutOfRange(i64),
    #[error("invalid page: {0}")]
    InvalidPage(String),
    #[error("storage is full")]
    StorageFull,
    #[error("serialization failed: {0}")]
    SerializationFailure(#[from] serde_json::Error),
    #[error("corrupt log at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for StoreError {
    fn from(err: io::Error) -> Self {
        match err.kind() {
            io::ErrorKind::StorageFull | io::ErrorKind::QuotaExceeded => StoreError::StorageFull,
            _ => StoreError::Io(err),
        }
    }
}

/// A user score on the 1 to 5 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct Rating(u8);

impl Rating {
    pub fn new(score: i64) -> Result<Self, StoreError> {
        if (1..=5).contains(&score) {
            Ok(Rating(score as u8))
        } else {
            Err(StoreError::OutOfRange(score))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<i64> for Rating {
    type Error = StoreError;

    fn try_from(score: i64) -> Result<Self, Self::Error> {
        Rating::new(score)
    }
}

impl From<Rating> for u8 {
    fn from(r: Rating) -> u8 {
        r.0
    }
}

/// One generation event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub id: Uuid,
    pub prompt: String,
    pub params: SamplingParams,
    pub output: String,
    pub rating: Option<Rating>,
    pub provider_id: String,
    /// True when the local sampling loop produced the output; false when the
    /// hyperparameters were forwarded to a remote model.
    pub sampled_locally: bool,
    /// Name of the PRNG behind a locally sampled output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_algorithm: Option<String>,
    pub created_at: DateTime<Utc>,
}

impl InteractionRecord {
    /// A fresh, unrated record with a random id, stamped with the current time.
    pub fn new(
        prompt: impl Into<String>,
        params: SamplingParams,
        output: impl Into<String>,
        provider_id: impl Into<String>,
        sampled_locally: bool,
    ) -> Self {
        Self {
            id: Uuid::new_v4(),
            prompt: prompt.into(),
            params,
            output: output.into(),
            rating: None,
            provider_id: provider_id.into(),
            sampled_locally,
            rng_algorithm: None,
            created_at: Utc::now(),
        }
    }
}

/// A previously used `(presence, frequency)` pair for the score graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScorePoint {
    pub record_id: Uuid,
    pub presence: f64,
    pub frequency: f64,
    pub rating: Option<u8>,
}

impl From<&InteractionRecord> for ScorePoint {
    fn from(r: &InteractionRecord) -> Self {
        Self {
            record_id: r.id,
            presence: r.params.presence_penalty(),
            frequency: r.params.frequency_penalty(),
            rating: r.rating.map(Rating::get),
        }
    }
}

/// Prompts match when equal after trailing-whitespace trim and NFC
/// normalization.
pub fn prompt_key(prompt: &str) -> String {
    prompt.trim_end().nfc().collect()
}

/// Storage backend for interaction history.
pub trait SessionStore: Send + Sync {
    /// Persists an unrated record. Rejects records that already carry a
    /// rating or reuse an existing id.
    fn append(&self, record: InteractionRecord) -> Result<Uuid, StoreError>;

    fn get(&self, id: Uuid) -> Result<Option<InteractionRecord>, StoreError>;

    /// Sets the rating once; a second call fails with `AlreadyRated`.
    fn set_rating(&self, id: Uuid, score: i64) -> Result<InteractionRecord, StoreError>;

    /// Records for `prompt`, oldest first.
    fn query_by_prompt(&self, prompt: &str) -> Result<Vec<InteractionRecord>, StoreError>;

    /// Newest first. `limit` must be in `1..=MAX_PAGE_SIZE`.
    fn list_all(&self, limit: usize, offset: usize) -> Result<Vec<InteractionRecord>, StoreError>;

    fn len(&self) -> Result<usize, StoreError>;

    fn is_empty(&self) -> Result<bool, StoreError> {
        Ok(self.len()? == 0)
    }

    fn score_graph_points(&self, prompt: &str) -> Result<Vec<ScorePoint>, StoreError> {
        Ok(self.query_by_prompt(prompt)?.iter().map(ScorePoint::from).collect())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LogLine {
    v: u32,
    #[serde(flatten)]
    entry: LogEntry,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogEntry {
    Interaction { record: InteractionRecord },
    Rating { id: Uuid, rating: Rating },
}

#[derive(Debug, Default)]
struct Index {
    records: Vec<InteractionRecord>,
    by_id: HashMap<Uuid, usize>,
    by_prompt: HashMap<String, Vec<usize>>,
}

impl Index {
    fn insert(&mut self, record: InteractionRecord) {
        let pos = self.records.len();
        self.by_id.insert(record.id, pos);
        self.by_prompt
            .entry(prompt_key(&record.prompt))
            .or_default()
            .push(pos);
        self.records.push(record);
    }

    fn check_new(&self, record: &InteractionRecord) -> Result<(), StoreError> {
        if record.rating.is_some() {
            return Err(StoreError::InvalidRecord(
                "rating must be absent when a record is created".into(),
            ));
        }
        if self.by_id.contains_key(&record.id) {
            return Err(StoreError::InvalidRecord(format!(
                "duplicate id {}",
                record.id
            )));
        }
        Ok(())
    }

    fn rateable(&self, id: Uuid) -> Result<usize, StoreError> {
        let pos = *self.by_id.get(&id).ok_or(StoreError::NotFound(id))?;
        if self.records[pos].rating.is_some() {
            return Err(StoreError::AlreadyRated(id));
        }
        Ok(pos)
    }
}

/// JSON Lines backend. One writer at a time; readers share a snapshot of the
/// in-memory index that always reflects a prefix of the log.
#[derive(Debug)]
pub struct JsonlStore {
    path: PathBuf,
    writer: Mutex<File>,
    index: RwLock<Index>,
}

impl JsonlStore {
    /// Opens or creates the log at `path` and replays it.
    ///
    /// A final line that is both unterminated and unparsable is the remains of
    /// an interrupted write; it is truncated away. Any other bad line is an
    /// error.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;

        let mut index = Index::default();
        let mut good_len: u64 = 0;
        let mut reader = BufReader::new(&file);
        let mut line = String::new();
        let mut line_no = 0;
        loop {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            line_no += 1;
            let terminated = line.ends_with('\n');
            if line.trim().is_empty() {
                good_len += n as u64;
                continue;
            }
            match serde_json::from_str::<LogLine>(&line) {
                Ok(parsed) => {
                    replay(&mut index, parsed, line_no)?;
                    good_len += n as u64;
                }
                Err(e) if !terminated => {
                    warn!(path = %path.display(), line = line_no, error = %e, "dropping torn final line");
                    break;
                }
                Err(e) => {
                    return Err(StoreError::Corrupt {
                        line: line_no,
                        reason: e.to_string(),
                    })
                }
            }
        }
        drop(reader);

        let actual_len = file.metadata()?.len();
        if actual_len != good_len {
            file.set_len(good_len)?;
            file.sync_all()?;
        } else if good_len > 0 {
            // A valid final line may still lack its newline.
            file.seek(SeekFrom::Start(good_len - 1))?;
            let mut last = [0u8; 1];
            io::Read::read_exact(&mut file, &mut last)?;
            if last[0] != b'\n' {
                file.write_all(b"\n")?;
                file.sync_data()?;
            }
        }

        Ok(Self {
            path,
            writer: Mutex::new(file),
            index: RwLock::new(index),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn write_line(file: &mut File, line: &LogLine) -> Result<(), StoreError> {
        let mut buf = serde_json::to_vec(line)?;
        buf.push(b'\n');
        file.write_all(&buf)?;
        file.sync_data()?;
        Ok(())
    }

    fn read_index(&self) -> std::sync::RwLockReadGuard<'_, Index> {
        self.index.read().unwrap_or_else(|e| e.into_inner())
    }
}

fn replay(index: &mut Index, line: LogLine, line_no: usize) -> Result<(), StoreError> {
    if line.v != SCHEMA_VERSION {
        return Err(StoreError::Corrupt {
            line: line_no,
            reason: format!("unsupported schema version {}", line.v),
        });
    }
    let corrupt = |e: StoreError| StoreError::Corrupt {
        line: line_no,
        reason: e.to_string(),
    };
    match line.entry {
        LogEntry::Interaction { record } => {
            index.check_new(&record).map_err(corrupt)?;
            index.insert(record);
        }
        LogEntry::Rating { id, rating } => {
            let pos = index.rateable(id).map_err(corrupt)?;
            index.records[pos].rating = Some(rating);
        }
    }
    Ok(())
}

impl SessionStore for JsonlStore {
    fn append(&self, record: InteractionRecord) -> Result<Uuid, StoreError> {
        let mut file = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        self.read_index().check_new(&record)?;
        let id = record.id;
        let line = LogLine {
            v: SCHEMA_VERSION,
            entry: LogEntry::Interaction { record },
        };
        Self::write_line(&mut file, &line)?;
        let LogEntry::Interaction { record } = line.entry else {
            unreachable!()
        };
        self.index
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(record);
        Ok(id)
    }

    fn get(&self, id: Uuid) -> Result<Option<InteractionRecord>, StoreError> {
        let index = self.read_index();
        Ok(index.by_id.get(&id).map(|&pos| index.records[pos].clone()))
    }

    fn set_rating(&self, id: Uuid, score: i64) -> Result<InteractionRecord, StoreError> {
        let rating = Rating::new(score)?;
        let mut file = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let pos = self.read_index().rateable(id)?;
        Self::write_line(
            &mut file,
            &LogLine {
                v: SCHEMA_VERSION,
                entry: LogEntry::Rating { id, rating },
            },
        )?;
        let mut index = self.index.write().unwrap_or_else(|e| e.into_inner());
        index.records[pos].rating = Some(rating);
        Ok(index.records[pos].clone())
    }

    fn query_by_prompt(&self, prompt: &str) -> Result<Vec<InteractionRecord>, StoreError> {
        let index = self.read_index();
        let mut found: Vec<InteractionRecord> = index
            .by_prompt
            .get(&prompt_key(prompt))
            .map(|positions| positions.iter().map(|&p| index.records[p].clone()).collect())
            .unwrap_or_default();
        // Stable: equal timestamps keep append order.
        found.sort_by_key(|r| r.created_at);
        Ok(found)
    }

    fn list_all(&self, limit: usize, offset: usize) -> Result<Vec<InteractionRecord>, StoreError> {
        if limit == 0 || limit > MAX_PAGE_SIZE {
            return Err(StoreError::InvalidPage(format!(
                "limit must be in 1..={MAX_PAGE_SIZE}, got {limit}"
            )));
        }
        let index = self.read_index();
        let mut order: Vec<usize> = (0..index.records.len()).collect();
        order.sort_by(|&a, &b| {
            index.records[b]
                .created_at
                .cmp(&index.records[a].created_at)
                .then(b.cmp(&a))
        });
        Ok(order
            .into_iter()
            .skip(offset)
            .take(limit)
            .map(|p| index.records[p].clone())
            .collect())
    }

    fn len(&self) -> Result<usize, StoreError> {
        Ok(self.read_index().records.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn params(alpha: f64, beta: f64) -> SamplingParams {
        SamplingParams::new(0.9, alpha, beta, 1).unwrap()
    }

    fn record(prompt: &str) -> InteractionRecord {
        InteractionRecord::new(prompt, params(0.0, 0.0), "out", "toy", true)
    }

    fn at(secs: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_700_000_000 + secs, 0).unwrap()
    }

    fn open_temp() -> (tempfile::TempDir, JsonlStore) {
        let dir = tempfile::tempdir().unwrap();
        let store = JsonlStore::open(dir.path().join("log.jsonl")).unwrap();
        (dir, store)
    }

    #[test]
    fn append_then_get_round_trips() {
        let (_d, store) = open_temp();
        let r = record("P");
        let id = store.append(r.clone()).unwrap();
        assert_eq!(store.get(id).unwrap(), Some(r));
    }

    #[test]
    fn append_rejects_preset_rating_and_duplicate_id() {
        let (_d, store) = open_temp();
        let mut r = record("P");
        r.rating = Some(Rating::new(3).unwrap());
        assert!(matches!(store.append(r), Err(StoreError::InvalidRecord(_))));

        let r = record("P");
        store.append(r.clone()).unwrap();
        assert!(matches!(store.append(r), Err(StoreError::InvalidRecord(_))));
    }

    #[test]
    fn distinct_ids() {
        let (_d, store) = open_temp();
        let a = store.append(record("P")).unwrap();
        let b = store.append(record("P")).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn rating_is_write_once_and_bounded() {
        let (_d, store) = open_temp();
        let id = store.append(record("P")).unwrap();
        assert!(matches!(store.set_rating(id, 6), Err(StoreError::OutOfRange(6))));
        assert!(matches!(store.set_rating(id, 0), Err(StoreError::OutOfRange(0))));
        let updated = store.set_rating(id, 3).unwrap();
        assert_eq!(updated.rating, Some(Rating::new(3).unwrap()));
        assert_eq!(store.get(id).unwrap().unwrap().rating.map(Rating::get), Some(3));
        assert!(matches!(store.set_rating(id, 4), Err(StoreError::AlreadyRated(_))));
        assert!(matches!(
            store.set_rating(Uuid::new_v4(), 4),
            Err(StoreError::NotFound(_))
        ));
    }

    #[test]
    fn query_filters_and_orders() {
        let (_d, store) = open_temp();
        let mut ids = vec![];
        for (i, secs) in [3, 1, 2].into_iter().enumerate() {
            let mut r = record("P");
            r.created_at = at(secs);
            r.output = format!("{i}");
            ids.push((secs, store.append(r).unwrap()));
        }
        store.append(record("Q")).unwrap();
        ids.sort();
        let got: Vec<Uuid> = store
            .query_by_prompt("P")
            .unwrap()
            .into_iter()
            .map(|r| r.id)
            .collect();
        assert_eq!(got, ids.into_iter().map(|(_, id)| id).collect::<Vec<_>>());
        assert!(store.query_by_prompt("unknown").unwrap().is_empty());
    }

    #[test]
    fn prompt_matching_normalizes() {
        let (_d, store) = open_temp();
        // "é" precomposed vs decomposed, plus trailing whitespace.
        store.append(record("caf\u{e9}")).unwrap();
        assert_eq!(store.query_by_prompt("cafe\u{301}  \n").unwrap().len(), 1);
        // Leading whitespace is significant.
        assert!(store.query_by_prompt(" caf\u{e9}").unwrap().is_empty());
    }

    #[test]
    fn score_points_project_penalties() {
        let (_d, store) = open_temp();
        let id = store
            .append(InteractionRecord::new("P", params(0.5, 1.0), "o", "toy", true))
            .unwrap();
        store.append(record("P")).unwrap();
        store.set_rating(id, 4).unwrap();
        let points = store.score_graph_points("P").unwrap();
        assert_eq!(points.len(), 2);
        let rated = points.iter().find(|p| p.record_id == id).unwrap();
        assert_eq!((rated.presence, rated.frequency, rated.rating), (1.0, 0.5, Some(4)));
        assert!(points.iter().any(|p| p.rating.is_none()));
        assert!(store.score_graph_points("none").unwrap().is_empty());
    }

    #[test]
    fn paging() {
        let (_d, store) = open_temp();
        let mut ids = vec![];
        for i in 0..5 {
            let mut r = record("P");
            r.created_at = at(i);
            ids.push(store.append(r).unwrap());
        }
        let page = store.list_all(2, 0).unwrap();
        assert_eq!(page.iter().map(|r| r.id).collect::<Vec<_>>(), [ids[4], ids[3]]);
        let page = store.list_all(2, 4).unwrap();
        assert_eq!(page.iter().map(|r| r.id).collect::<Vec<_>>(), [ids[0]]);
        assert!(store.list_all(2, 10).unwrap().is_empty());
        assert_eq!(store.list_all(1000, 0).unwrap().len(), 5);
        assert!(matches!(store.list_all(0, 0), Err(StoreError::InvalidPage(_))));
        assert!(matches!(store.list_all(1001, 0), Err(StoreError::InvalidPage(_))));
    }

    #[test]
    fn reopen_replays_log() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let (a, b) = {
            let store = JsonlStore::open(&path).unwrap();
            let a = store.append(record("P")).unwrap();
            let b = store.append(record("Q")).unwrap();
            store.set_rating(b, 2).unwrap();
            (a, b)
        };
        let store = JsonlStore::open(&path).unwrap();
        assert_eq!(store.len().unwrap(), 2);
        assert_eq!(store.get(a).unwrap().unwrap().rating, None);
        assert_eq!(store.get(b).unwrap().unwrap().rating.map(Rating::get), Some(2));
    }

    #[test]
    fn torn_tail_is_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let id = JsonlStore::open(&path).unwrap().append(record("P")).unwrap();
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"v":1,"type":"rat"#).unwrap();
        drop(f);

        let store = JsonlStore::open(&path).unwrap();
        assert_eq!(store.len().unwrap(), 1);
        store.set_rating(id, 5).unwrap();
        drop(store);
        let store = JsonlStore::open(&path).unwrap();
        assert_eq!(store.get(id).unwrap().unwrap().rating.map(Rating::get), Some(5));
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        JsonlStore::open(&path).unwrap().append(record("P")).unwrap();
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"garbage\n").unwrap();
        drop(f);
        assert!(matches!(
            JsonlStore::open(&path),
            Err(StoreError::Corrupt { line: 2, .. })
        ));
    }

    #[test]
    fn log_lines_carry_schema_version() {
        let (_d, store) = open_temp();
        let id = store.append(record("P")).unwrap();
        store.set_rating(id, 1).unwrap();
        let text = std::fs::read_to_string(store.path()).unwrap();
        let lines: Vec<serde_json::Value> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 2);
        assert!(lines.iter().all(|l| l["v"] == 1));
        assert_eq!(lines[0]["type"], "interaction");
        assert_eq!(lines[1]["type"], "rating");
        assert_eq!(lines[1]["rating"], 1);
    }
}
