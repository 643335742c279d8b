//! The engine behind the HTTP API: accounts, ingest and chat, per user.

use std::collections::HashMap;
use std::time::Instant;

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use memora_core::completion::CompletionRequest;
use memora_core::embedding::EmbedError;
use memora_core::prompt::{PromptConfig, Role, Turn};
use memora_core::store::check_k;
use memora_core::{make_records, split, ChunkConfig, MemoryStore, RecordId, UserId, MAX_K};

use crate::api::{ChatReply, ListQuery, MemoryList, MemoryView, RetrievedContext, StageLatency};
use crate::auth::{hash_password, verify_password, Accounts, AuthError, SessionToken, Sessions};
use crate::config::ServiceConfig;
use crate::embedder::Embedder;
use crate::gateway::{Gateway, GatewayError};

pub const DEFAULT_LIST_LIMIT: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServiceError {
    #[error("{0}")]
    Auth(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    /// Stable error category reported to clients.
    pub fn category(&self) -> &'static str {
        match self {
            ServiceError::Auth(_) => "auth",
            ServiceError::Validation(_) | ServiceError::Conflict(_) => "validation",
            ServiceError::Backend(_) => "backend",
            ServiceError::Internal(_) => "internal",
        }
    }
}

impl From<AuthError> for ServiceError {
    fn from(e: AuthError) -> Self {
        match e {
            AuthError::DuplicateUsername => ServiceError::Conflict(e.to_string()),
            AuthError::EmptyUsername | AuthError::WeakPassword => ServiceError::Validation(e.to_string()),
            AuthError::BadCredentials | AuthError::Unauthenticated => ServiceError::Auth(e.to_string()),
            AuthError::Storage(_) => ServiceError::Internal(e.to_string()),
        }
    }
}

impl From<EmbedError> for ServiceError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::InvalidInput { .. } => ServiceError::Validation(e.to_string()),
            _ => ServiceError::Backend(e.to_string()),
        }
    }
}

impl From<GatewayError> for ServiceError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::InvalidRequest(_) => ServiceError::Validation(e.to_string()),
            _ => ServiceError::Backend(e.to_string()),
        }
    }
}

fn internal(e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Internal(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub text: String,
    pub timestamp: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retrieved_record_ids: Vec<String>,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

pub struct Service {
    config: ServiceConfig,
    chunk_config: ChunkConfig,
    store: MemoryStore,
    accounts: Accounts,
    sessions: Sessions,
    transcripts: Mutex<HashMap<String, Vec<ChatTurn>>>,
    embedder: Embedder,
    gateway: Gateway,
}

impl Service {
    /// Opens the journal and account file named in `config`, if any.
    pub fn new(config: ServiceConfig) -> Result<Self, ServiceError> {
        config.validate().map_err(|e| ServiceError::Validation(e.to_string()))?;
        let store = match &config.journal_path {
            Some(path) => {
                let (store, load) = MemoryStore::open(path).map_err(internal)?;
                if load.truncated_lines > 0 {
                    tracing::warn!(skipped = load.truncated_lines, "journal had a torn final line");
                }
                tracing::info!(records = load.records, path = %path.display(), "journal loaded");
                store
            }
            None => MemoryStore::new(),
        };
        let accounts = match config.accounts_path() {
            Some(path) => Accounts::open(&path)?,
            None => Accounts::in_memory(),
        };
        Ok(Self {
            chunk_config: ChunkConfig::default(),
            store,
            accounts,
            sessions: Sessions::new(chrono::Duration::hours(config.token_ttl_hours)),
            transcripts: Mutex::new(HashMap::new()),
            embedder: Embedder::from_config(&config.embedder),
            gateway: Gateway::from_config(&config.gateway),
            config,
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn store(&self) -> &MemoryStore {
        &self.store
    }

    pub async fn register(&self, username: &str, password: &str) -> Result<UserId, ServiceError> {
        self.accounts.check_new(username, password)?;
        let password = password.to_string();
        let digest = tokio::task::spawn_blocking(move || hash_password(&password))
            .await
            .map_err(internal)?;
        Ok(self.accounts.insert_hashed(username, digest)?)
    }

    pub async fn login(&self, username: &str, password: &str) -> Result<SessionToken, ServiceError> {
        let (user_id, digest) = self.accounts.credentials(username);
        let password = password.to_string();
        let ok = tokio::task::spawn_blocking(move || verify_password(&password, &digest))
            .await
            .map_err(internal)?;
        match user_id {
            Some(id) if ok => Ok(self.sessions.issue(id)),
            _ => Err(AuthError::BadCredentials.into()),
        }
    }

    pub fn authenticate(&self, token: &str) -> Result<UserId, ServiceError> {
        Ok(self.sessions.authenticate(token)?)
    }

    pub fn sessions(&self) -> &Sessions {
        &self.sessions
    }

    pub async fn ingest_entry(
        &self,
        token: &str,
        text: &str,
        timestamp: Option<DateTime<Utc>>,
    ) -> Result<Vec<RecordId>, ServiceError> {
        let user = self.authenticate(token)?;
        self.ingest_for(&user, text, timestamp).await
    }

    /// Splits, embeds and stores one entry. Nothing is stored unless every
    /// chunk embeds successfully.
    pub async fn ingest_for(
        &self,
        user: &UserId,
        text: &str,
        timestamp: Option<DateTime<Utc>>,
    ) -> Result<Vec<RecordId>, ServiceError> {
        if text.trim().is_empty() {
            return Err(ServiceError::Validation("entry text must not be empty".into()));
        }
        let timestamp = timestamp.unwrap_or_else(Utc::now);
        let source_id = uuid::Uuid::new_v4().simple().to_string();
        let chunks: Vec<_> = split(text, &self.chunk_config)
            .into_iter()
            .filter(|c| !c.text.trim().is_empty())
            .collect();
        let drafts = make_records(&chunks, user.as_str(), &source_id, timestamp)
            .map_err(|e| ServiceError::Validation(e.to_string()))?;
        let texts: Vec<String> = drafts.iter().map(|d| d.text.clone()).collect();
        let vectors = self.embedder.embed_batch(&texts).await?;
        let records = drafts
            .into_iter()
            .zip(vectors)
            .map(|(d, v)| d.with_vector(v))
            .collect();
        self.store.add_all(records).map_err(internal)
    }

    pub async fn chat(&self, token: &str, query: &str, k: Option<usize>) -> Result<ChatReply, ServiceError> {
        let user = self.authenticate(token)?;
        self.chat_for(&user, Some(token), query, k).await
    }

    /// Embed, retrieve, assemble, complete. Turns are appended to the
    /// transcript of `session` when one is given.
    pub async fn chat_for(
        &self,
        user: &UserId,
        session: Option<&str>,
        query: &str,
        k: Option<usize>,
    ) -> Result<ChatReply, ServiceError> {
        let started = Instant::now();
        if query.trim().is_empty() {
            return Err(ServiceError::Validation("query must not be empty".into()));
        }
        let k = k.unwrap_or(self.config.default_k);
        check_k(k).map_err(|e| ServiceError::Validation(e.to_string()))?;

        let t = Instant::now();
        let query_vector = self.embedder.embed(query).await?;
        let embed_ms = ms(t);

        let t = Instant::now();
        let results = self.store.top_k(user, &query_vector, k).map_err(internal)?;
        let retrieve_ms = ms(t);

        let t = Instant::now();
        let history: Vec<Turn> = session
            .map(|s| {
                self.transcripts
                    .lock()
                    .get(s)
                    .map(|turns| {
                        let skip = turns.len().saturating_sub(self.config.transcript_window);
                        turns[skip..]
                            .iter()
                            .map(|t| Turn { role: t.role, text: t.text.clone() })
                            .collect()
                    })
                    .unwrap_or_default()
            })
            .unwrap_or_default();
        let prompt_config = PromptConfig {
            relevance_threshold: self.config.relevance_threshold,
            transcript_window_size: self.config.transcript_window,
            server_date: self
                .config
                .include_server_date
                .then(|| Utc::now().date_naive()),
            ..PromptConfig::default()
        };
        let prompt = memora_core::build_prompt(query, &results, &history, &prompt_config)
            .map_err(|e| ServiceError::Validation(e.to_string()))?;
        let prompt_ms = ms(t);

        let context_ids: Vec<String> = prompt.context_ids().iter().map(|id| id.to_string()).collect();
        let mode = prompt.mode;
        let mut request = CompletionRequest::new(prompt, self.config.gateway.model_name.clone());
        request.temperature = self.config.gateway.temperature;
        request.max_tokens = self.config.gateway.max_tokens;

        let t = Instant::now();
        let completion = self.gateway.complete(&request).await?;
        let complete_ms = ms(t);

        let retrieved = results
            .iter()
            .map(|r| RetrievedContext {
                record_id: r.record.record_id.to_string(),
                score: r.score,
                text: r.record.text.clone(),
                timestamp: r.record.timestamp,
                in_prompt: context_ids.iter().any(|id| id == r.record.record_id.as_str()),
            })
            .collect();

        if let Some(session) = session {
            let now = Utc::now();
            let mut transcripts = self.transcripts.lock();
            let turns = transcripts.entry(session.to_string()).or_default();
            turns.push(ChatTurn {
                role: Role::User,
                text: query.to_string(),
                timestamp: now,
                retrieved_record_ids: Vec::new(),
            });
            turns.push(ChatTurn {
                role: Role::Assistant,
                text: completion.text.clone(),
                timestamp: now,
                retrieved_record_ids: context_ids.clone(),
            });
        }

        Ok(ChatReply {
            response_text: completion.text,
            mode,
            retrieved,
            context_ids,
            backend: completion.backend,
            latency: StageLatency {
                embed_ms,
                retrieve_ms,
                prompt_ms,
                complete_ms,
                total_ms: ms(started),
            },
        })
    }

    pub fn transcript(&self, token: &str) -> Vec<ChatTurn> {
        self.transcripts.lock().get(token).cloned().unwrap_or_default()
    }

    pub async fn list_memories(&self, token: &str, params: &ListQuery) -> Result<MemoryList, ServiceError> {
        let user = self.authenticate(token)?;
        self.list_for(&user, params).await
    }

    pub async fn list_for(&self, user: &UserId, params: &ListQuery) -> Result<MemoryList, ServiceError> {
        let total = self.store.count(user);
        let memories = match params.query.as_deref().filter(|q| !q.trim().is_empty()) {
            Some(q) => {
                let k = params.limit.unwrap_or(self.config.default_k).clamp(1, MAX_K);
                let vector = self.embedder.embed(q).await?;
                let results = self.store.top_k(user, &vector, k).map_err(internal)?;
                results
                    .into_iter()
                    .map(|r| MemoryView {
                        record_id: r.record.record_id.to_string(),
                        text: r.record.text,
                        timestamp: r.record.timestamp,
                        source_id: r.record.source_id,
                        chunk_index: r.record.chunk_index,
                        score: Some(r.score),
                    })
                    .collect()
            }
            None => self
                .store
                .list(user)
                .into_iter()
                .skip(params.offset.unwrap_or(0))
                .take(params.limit.unwrap_or(DEFAULT_LIST_LIMIT))
                .map(|r| MemoryView {
                    record_id: r.record_id.to_string(),
                    text: r.text,
                    timestamp: r.timestamp,
                    source_id: r.source_id,
                    chunk_index: r.chunk_index,
                    score: None,
                })
                .collect(),
        };
        Ok(MemoryList { memories, total })
    }

    pub fn delete_memories(&self, token: &str) -> Result<usize, ServiceError> {
        let user = self.authenticate(token)?;
        self.delete_for(&user)
    }

    /// Erases every memory of `user` and compacts the journal right away.
    pub fn delete_for(&self, user: &UserId) -> Result<usize, ServiceError> {
        let removed = self.store.erase_user(user);
        if removed > 0 {
            self.store.compact().map_err(internal)?;
        }
        Ok(removed)
    }
}
