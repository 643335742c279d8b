//! Per-user memory store with exact top-k cosine retrieval.
//!
//! Every user's records form an `N x 384` matrix that is scanned in full for
//! each query. Ranking is by descending score, then newer timestamp, then
//! lexicographically smaller record id, so results are fully deterministic.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, PoisonError, RwLock, RwLockReadGuard, RwLockWriteGuard};

use serde::Serialize;
use thiserror::Error;

use crate::embedding::{cosine, EmbeddingVector, DIMENSION};
use crate::journal::{self, JournalLoad, JournalWriter};
use crate::record::{MemoryRecord, RecordId, RetrievalResult, UserId};

pub const DEFAULT_K: usize = 3;
pub const MAX_K: usize = 16;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("record id {0} already exists")]
    DuplicateId(RecordId),
    #[error("record {0} has empty text")]
    EmptyText(RecordId),
    #[error("k must be between 1 and {MAX_K}, got {0}")]
    KOutOfRange(usize),
    #[error("journal line {line}: {reason}")]
    Journal { line: usize, reason: String },
    #[error("journal io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StoreStats {
    pub n_records_per_user: BTreeMap<UserId, usize>,
    pub dimension: usize,
}

#[derive(Debug, Default)]
pub(crate) struct Inner {
    pub(crate) users: HashMap<UserId, Vec<MemoryRecord>>,
    pub(crate) ids: HashMap<RecordId, UserId>,
}

impl Inner {
    fn check(&self, record: &MemoryRecord) -> Result<(), StoreError> {
        if record.text.is_empty() {
            return Err(StoreError::EmptyText(record.record_id.clone()));
        }
        if self.ids.contains_key(&record.record_id) {
            return Err(StoreError::DuplicateId(record.record_id.clone()));
        }
        Ok(())
    }

    pub(crate) fn insert(&mut self, record: MemoryRecord) -> Result<(), StoreError> {
        self.check(&record)?;
        self.ids
            .insert(record.record_id.clone(), record.user_id.clone());
        self.users
            .entry(record.user_id.clone())
            .or_default()
            .push(record);
        Ok(())
    }

    /// Records in canonical order: users ascending, insertion order within a user.
    pub(crate) fn ordered(&self) -> impl Iterator<Item = &MemoryRecord> {
        let mut users: Vec<&UserId> = self.users.keys().collect();
        users.sort();
        users.into_iter().flat_map(move |u| self.users[u].iter())
    }
}

/// Total ranking order used by [`MemoryStore::top_k`].
pub fn rank_order(a_score: f64, a: &MemoryRecord, b_score: f64, b: &MemoryRecord) -> Ordering {
    b_score
        .total_cmp(&a_score)
        .then_with(|| b.timestamp.cmp(&a.timestamp))
        .then_with(|| a.record_id.cmp(&b.record_id))
}

pub fn check_k(k: usize) -> Result<(), StoreError> {
    if (1..=MAX_K).contains(&k) {
        Ok(())
    } else {
        Err(StoreError::KOutOfRange(k))
    }
}

/// Thread-safe store. Readers run concurrently; writers are serialized and
/// a reader never observes a half-applied write.
#[derive(Debug, Default)]
pub struct MemoryStore {
    inner: RwLock<Inner>,
    journal: Mutex<Option<JournalWriter>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn read(&self) -> RwLockReadGuard<'_, Inner> {
        self.inner.read().unwrap_or_else(PoisonError::into_inner)
    }

    fn write(&self) -> RwLockWriteGuard<'_, Inner> {
        self.inner.write().unwrap_or_else(PoisonError::into_inner)
    }

    /// Loads `path` if it exists and appends every later write to it.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, JournalLoad), StoreError> {
        let path = path.as_ref();
        let (store, load) = if path.exists() {
            Self::load_journal(path)?
        } else {
            (Self::new(), JournalLoad::default())
        };
        if load.truncated_lines > 0 {
            // Rewrite so the torn tail does not precede new appends.
            store.save_journal(path)?;
        }
        store.attach_journal(path)?;
        Ok((store, load))
    }

    /// Appends subsequent writes to the journal at `path`.
    pub fn attach_journal(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let writer = JournalWriter::append(path.as_ref())?;
        *self.journal.lock().unwrap_or_else(PoisonError::into_inner) = Some(writer);
        Ok(())
    }

    pub fn journal_path(&self) -> Option<PathBuf> {
        self.journal
            .lock()
            .unwrap_or_else(PoisonError::into_inner)
            .as_ref()
            .map(|w| w.path().to_path_buf())
    }

    pub fn add(&self, record: MemoryRecord) -> Result<RecordId, StoreError> {
        let id = record.record_id.clone();
        self.add_all(vec![record])?;
        Ok(id)
    }

    /// Adds every record or none of them.
    pub fn add_all(&self, records: Vec<MemoryRecord>) -> Result<Vec<RecordId>, StoreError> {
        let mut inner = self.write();
        let mut batch_ids = std::collections::HashSet::new();
        for record in &records {
            inner.check(record)?;
            if !batch_ids.insert(&record.record_id) {
                return Err(StoreError::DuplicateId(record.record_id.clone()));
            }
        }
        if let Some(writer) = self
            .journal
            .lock()
            .unwrap_or_else(PoisonError::into_inner)
            .as_mut()
        {
            writer.append_records(&records)?;
        }
        let ids = records.iter().map(|r| r.record_id.clone()).collect();
        for record in records {
            inner.insert(record)?;
        }
        Ok(ids)
    }

    pub fn top_k(
        &self,
        user_id: &UserId,
        query: &EmbeddingVector,
        k: usize,
    ) -> Result<Vec<RetrievalResult>, StoreError> {
        check_k(k)?;
        let inner = self.read();
        let Some(records) = inner.users.get(user_id) else {
            return Ok(Vec::new());
        };

        let mut scored: Vec<(f64, &MemoryRecord)> = records
            .iter()
            .map(|r| (cosine(query, &r.vector), r))
            .collect();
        let order = |a: &(f64, &MemoryRecord), b: &(f64, &MemoryRecord)| rank_order(a.0, a.1, b.0, b.1);
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(order);

        Ok(scored
            .into_iter()
            .map(|(score, record)| RetrievalResult {
                record: record.clone(),
                score,
            })
            .collect())
    }

    /// A user's records, newest first.
    pub fn list(&self, user_id: &UserId) -> Vec<MemoryRecord> {
        let inner = self.read();
        let mut records = inner.users.get(user_id).cloned().unwrap_or_default();
        records.sort_by(|a, b| {
            b.timestamp
                .cmp(&a.timestamp)
                .then_with(|| a.record_id.cmp(&b.record_id))
        });
        records
    }

    pub fn count(&self, user_id: &UserId) -> usize {
        self.read().users.get(user_id).map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.read().ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Removes all of a user's records from memory. The journal still holds
    /// them until the next [`save_journal`](Self::save_journal) or
    /// [`compact`](Self::compact).
    pub fn erase_user(&self, user_id: &UserId) -> usize {
        let mut inner = self.write();
        let Some(records) = inner.users.remove(user_id) else {
            return 0;
        };
        for r in &records {
            inner.ids.remove(&r.record_id);
        }
        records.len()
    }

    pub fn stats(&self) -> StoreStats {
        let inner = self.read();
        StoreStats {
            n_records_per_user: inner
                .users
                .iter()
                .filter(|(_, records)| !records.is_empty())
                .map(|(u, records)| (u.clone(), records.len()))
                .collect(),
            dimension: DIMENSION,
        }
    }

    /// Writes every live record to `path` in canonical order, replacing the
    /// file atomically.
    pub fn save_journal(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let path = path.as_ref();
        let inner = self.read();
        let mut guard = self.journal.lock().unwrap_or_else(PoisonError::into_inner);
        journal::write_all(path, inner.ordered())?;
        // An attached writer on the same file must follow the rename.
        if let Some(writer) = guard.as_mut() {
            if writer.path() == path {
                *writer = JournalWriter::append(path)?;
            }
        }
        Ok(())
    }

    /// Rewrites the attached journal without erased records.
    pub fn compact(&self) -> Result<(), StoreError> {
        match self.journal_path() {
            Some(path) => self.save_journal(path),
            None => Ok(()),
        }
    }

    pub fn load_journal(path: impl AsRef<Path>) -> Result<(Self, JournalLoad), StoreError> {
        let (inner, load) = journal::read_all(path.as_ref())?;
        Ok((
            Self {
                inner: RwLock::new(inner),
                journal: Mutex::new(None),
            },
            load,
        ))
    }
}
