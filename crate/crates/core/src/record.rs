//! The stored unit of user knowledge and the identifiers that address it.

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingVector;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(String);

impl UserId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordId(String);

impl RecordId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A record whose vector has not been computed yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordDraft {
    pub record_id: RecordId,
    pub user_id: UserId,
    pub text: String,
    pub timestamp: DateTime<Utc>,
    pub source_id: String,
    pub chunk_index: usize,
}

impl RecordDraft {
    pub fn with_vector(self, vector: EmbeddingVector) -> MemoryRecord {
        MemoryRecord {
            record_id: self.record_id,
            user_id: self.user_id,
            text: self.text,
            timestamp: self.timestamp,
            source_id: self.source_id,
            chunk_index: self.chunk_index,
            vector,
        }
    }
}

/// One embedded chunk of a user's knowledge.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryRecord {
    pub record_id: RecordId,
    pub user_id: UserId,
    pub text: String,
    pub timestamp: DateTime<Utc>,
    pub source_id: String,
    pub chunk_index: usize,
    pub vector: EmbeddingVector,
}

/// A record paired with its cosine score against a query.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub record: MemoryRecord,
    pub score: f64,
}
