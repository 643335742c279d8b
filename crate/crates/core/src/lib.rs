//! Core of the memora personal-memory engine: text chunking, embeddings,
//! per-user retrieval, prompt assembly and the stub completion model.
//!
//! Everything here is synchronous and free of I/O other than the journal, so
//! it also builds for `wasm32-unknown-unknown`.

pub mod chunker;
pub mod completion;
pub mod embedding;
pub mod journal;
pub mod prompt;
pub mod record;
pub mod store;
pub mod templates;

pub use chunker::{make_records, split, Chunk, ChunkConfig, SplitLevel};
pub use completion::{stub_complete, CompletionRequest, CompletionResult};
pub use embedding::{cosine, BuiltinEmbedder, EmbedError, EmbeddingVector, TextEmbedder, DIMENSION};
pub use prompt::{build as build_prompt, AssembledPrompt, PromptConfig, PromptMode, Turn};
pub use record::{MemoryRecord, RecordDraft, RecordId, RetrievalResult, UserId};
pub use store::{MemoryStore, StoreError, StoreStats, DEFAULT_K, MAX_K};
