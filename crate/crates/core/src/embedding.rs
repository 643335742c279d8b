//! Fixed-width unit vectors, cosine similarity, and the builtin embedder.

use serde::{Serialize, Serializer};
use thiserror::Error;

/// Width of every embedding vector.
pub const DIMENSION: usize = 384;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("invalid input{}: {reason}", index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    InvalidInput { index: Option<usize>, reason: String },
    #[error("expected {DIMENSION} dimensions, got {0}")]
    Dimension(usize),
    #[error("vector has non-finite components")]
    NonFinite,
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("vector norm {0} is not 1")]
    NotUnit(f64),
    #[error("embedding backend failed: {0}")]
    Backend(String),
}

impl EmbedError {
    fn at(self, index: usize) -> Self {
        match self {
            EmbedError::InvalidInput { reason, .. } => EmbedError::InvalidInput {
                index: Some(index),
                reason,
            },
            other => other,
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("dimension mismatch: {left} vs {right}")]
pub struct DimensionMismatch {
    pub left: usize,
    pub right: usize,
}

/// A 384-dimensional vector with unit L2 norm.
#[derive(Debug, Clone)]
pub struct EmbeddingVector {
    values: Box<[f32]>,
    norm: f64,
}

impl PartialEq for EmbeddingVector {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
    }
}

impl Serialize for EmbeddingVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.values.serialize(serializer)
    }
}

fn sum_squares(values: &[f32]) -> f64 {
    values.iter().map(|&x| f64::from(x) * f64::from(x)).sum()
}

impl EmbeddingVector {
    /// Scales `values` to unit length.
    pub fn normalize(values: &[f64]) -> Result<Self, EmbedError> {
        if values.len() != DIMENSION {
            return Err(EmbedError::Dimension(values.len()));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(EmbedError::ZeroNorm);
        }
        let values: Box<[f32]> = values.iter().map(|x| (x / norm) as f32).collect();
        let norm = sum_squares(&values).sqrt();
        Ok(Self { values, norm })
    }

    /// Accepts components that are already unit-normalized (within 1e-6).
    pub fn from_unit(values: Vec<f32>) -> Result<Self, EmbedError> {
        if values.len() != DIMENSION {
            return Err(EmbedError::Dimension(values.len()));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let norm = sum_squares(&values).sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(EmbedError::NotUnit(norm));
        }
        Ok(Self {
            values: values.into_boxed_slice(),
            norm,
        })
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }
}

/// Index-ascending dot product accumulated in f64.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

/// `dot(a, b) / (|a| |b|)` over raw slices.
pub fn cosine_slices(a: &[f32], b: &[f32]) -> Result<f64, DimensionMismatch> {
    if a.len() != b.len() {
        return Err(DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let denom = sum_squares(a).sqrt() * sum_squares(b).sqrt();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(a, b) / denom).clamp(-1.0, 1.0))
}

/// Cosine similarity of two embeddings. For unit vectors this is their dot
/// product; the norms are cached so the division costs nothing extra.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    (dot(&a.values, &b.values) / (a.norm * b.norm)).clamp(-1.0, 1.0)
}

/// Anything that turns text into embeddings.
pub trait TextEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| self.embed(t).map_err(|e| e.at(i)))
            .collect()
    }
}

/// Rejects empty and whitespace-only inputs.
pub fn check_input(text: &str) -> Result<(), EmbedError> {
    if text.trim().is_empty() {
        return Err(EmbedError::InvalidInput {
            index: None,
            reason: "text is empty or whitespace".into(),
        });
    }
    Ok(())
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |hash, &b| {
        (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Signed feature hashing of lowercased character trigrams.
///
/// Each trigram (or the whole text, when shorter than three characters) is
/// hashed with FNV-1a; the hash picks bucket `hash % 384` and contributes
/// `+1` or `-1` depending on its top bit. The accumulated vector is
/// L2-normalized.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinEmbedder;

impl BuiltinEmbedder {
    fn accumulate(text: &str) -> [f64; DIMENSION] {
        let mut buckets = [0.0f64; DIMENSION];
        let mut add = |gram: &str| {
            let hash = fnv1a64(gram.as_bytes());
            let sign = if hash >> 63 == 0 { 1.0 } else { -1.0 };
            buckets[(hash % DIMENSION as u64) as usize] += sign;
        };

        let bounds: Vec<usize> = text
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(text.len()))
            .collect();
        let n_chars = bounds.len() - 1;
        if n_chars < 3 {
            add(text);
        } else {
            for i in 0..=n_chars - 3 {
                add(&text[bounds[i]..bounds[i + 3]]);
            }
        }
        buckets
    }
}

impl TextEmbedder for BuiltinEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        check_input(text)?;
        let lowered = text.to_lowercase();
        let mut buckets = Self::accumulate(&lowered);
        if buckets.iter().all(|&x| x == 0.0) {
            // Every trigram cancelled out.
            buckets[(fnv1a64(lowered.as_bytes()) % DIMENSION as u64) as usize] = 1.0;
        }
        EmbeddingVector::normalize(&buckets)
    }
}
