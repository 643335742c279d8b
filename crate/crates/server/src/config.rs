//! Service configuration: a TOML file with `MEMORA_*` environment overrides.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use memora_core::prompt::{DEFAULT_RELEVANCE_THRESHOLD, DEFAULT_TRANSCRIPT_WINDOW};
use memora_core::completion::{DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE};
use memora_core::DEFAULT_K;

pub const DEFAULT_EMBEDDING_MODEL: &str = "BAAI/bge-small-en";
pub const DEFAULT_CHAT_MODEL: &str = "llama-3-70b-instruct";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("environment variable {name}: {reason}")]
    Env { name: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    #[default]
    Builtin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub backend: BackendKind,
    pub endpoint_url: String,
    pub model_name: String,
    /// Sent as a bearer token when set.
    pub api_key: Option<String>,
    pub timeout_ms: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Builtin,
            endpoint_url: String::new(),
            model_name: DEFAULT_EMBEDDING_MODEL.into(),
            api_key: None,
            timeout_ms: 10_000,
        }
    }
}

impl EmbedderConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    /// `builtin` selects the extractive stub.
    pub backend: BackendKind,
    pub endpoint_url: String,
    pub model_name: String,
    pub api_key_header: String,
    pub api_key_value: Option<String>,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Builtin,
            endpoint_url: String::new(),
            model_name: DEFAULT_CHAT_MODEL.into(),
            api_key_header: "Authorization".into(),
            api_key_value: None,
            timeout_ms: 60_000,
            retries: 2,
            backoff_ms: 250,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

impl GatewayConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    /// Memory journal; `None` keeps everything in memory.
    pub journal_path: Option<PathBuf>,
    /// Account file; defaults to `accounts.json` beside the journal.
    pub accounts_path: Option<PathBuf>,
    pub embedder: EmbedderConfig,
    pub gateway: GatewayConfig,
    pub relevance_threshold: f64,
    pub default_k: usize,
    pub transcript_window: usize,
    pub include_server_date: bool,
    pub token_ttl_hours: i64,
    /// Directory of static files served at `/` (the web chat client).
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: ([127, 0, 0, 1], 8080).into(),
            journal_path: None,
            accounts_path: None,
            embedder: EmbedderConfig::default(),
            gateway: GatewayConfig::default(),
            relevance_threshold: DEFAULT_RELEVANCE_THRESHOLD,
            default_k: DEFAULT_K,
            transcript_window: DEFAULT_TRANSCRIPT_WINDOW,
            include_server_date: false,
            token_ttl_hours: 24,
            static_dir: None,
        }
    }
}

fn env_parse<T: std::str::FromStr>(name: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    match std::env::var(name) {
        Ok(raw) => raw.parse().map(Some).map_err(|e: T::Err| ConfigError::Env {
            name: name.into(),
            reason: e.to_string(),
        }),
        Err(_) => Ok(None),
    }
}

impl ServiceConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.into(),
            source,
        })?;
        toml::from_str(&raw).map_err(|source| ConfigError::Parse {
            path: path.into(),
            source,
        })
    }

    /// Reads `path` (if given), then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        config.apply_env()?;
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        if let Some(v) = env_parse("MEMORA_LISTEN")? {
            self.listen = v;
        }
        if let Some(v) = env_parse::<PathBuf>("MEMORA_JOURNAL")? {
            self.journal_path = Some(v);
        }
        if let Some(v) = env_parse("MEMORA_RELEVANCE_THRESHOLD")? {
            self.relevance_threshold = v;
        }
        if let Some(v) = env_parse("MEMORA_DEFAULT_K")? {
            self.default_k = v;
        }
        if let Some(v) = env_parse::<String>("MEMORA_EMBEDDER_URL")? {
            self.embedder.backend = BackendKind::Remote;
            self.embedder.endpoint_url = v;
        }
        if let Some(v) = env_parse("MEMORA_EMBEDDER_TIMEOUT_MS")? {
            self.embedder.timeout_ms = v;
        }
        if let Some(v) = env_parse::<String>("MEMORA_EMBEDDER_API_KEY")? {
            self.embedder.api_key = Some(v);
        }
        if let Some(v) = env_parse::<String>("MEMORA_LLM_URL")? {
            self.gateway.backend = BackendKind::Remote;
            self.gateway.endpoint_url = v;
        }
        if let Some(v) = env_parse("MEMORA_LLM_MODEL")? {
            self.gateway.model_name = v;
        }
        if let Some(v) = env_parse::<String>("MEMORA_LLM_API_KEY")? {
            self.gateway.api_key_value = Some(v);
        }
        if let Some(v) = env_parse("MEMORA_LLM_TIMEOUT_MS")? {
            self.gateway.timeout_ms = v;
        }
        if let Some(v) = env_parse("MEMORA_LLM_RETRIES")? {
            self.gateway.retries = v;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.embedder.backend == BackendKind::Remote && self.embedder.endpoint_url.is_empty() {
            return Err(ConfigError::Invalid("remote embedder needs embedder.endpoint_url".into()));
        }
        if self.gateway.backend == BackendKind::Remote && self.gateway.endpoint_url.is_empty() {
            return Err(ConfigError::Invalid("remote gateway needs gateway.endpoint_url".into()));
        }
        if !(0.0..1.0).contains(&self.relevance_threshold) {
            return Err(ConfigError::Invalid(format!(
                "relevance_threshold must be in [0, 1), got {}",
                self.relevance_threshold
            )));
        }
        memora_core::store::check_k(self.default_k)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.token_ttl_hours <= 0 {
            return Err(ConfigError::Invalid("token_ttl_hours must be positive".into()));
        }
        Ok(())
    }

    pub fn accounts_path(&self) -> Option<PathBuf> {
        self.accounts_path.clone().or_else(|| {
            self.journal_path
                .as_ref()
                .map(|j| j.with_file_name("accounts.json"))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_with_partial_file() {
        let config: ServiceConfig = toml::from_str(
            r#"
            listen = "0.0.0.0:9000"
            journal_path = "/tmp/memories.jsonl"
            relevance_threshold = 0.4

            [gateway]
            backend = "remote"
            endpoint_url = "http://llm.local/v1/chat/completions"
            "#,
        )
        .unwrap();
        assert_eq!(config.listen.port(), 9000);
        assert_eq!(config.gateway.backend, BackendKind::Remote);
        assert_eq!(config.gateway.retries, 2);
        assert_eq!(config.embedder.backend, BackendKind::Builtin);
        assert_eq!(config.accounts_path().unwrap(), PathBuf::from("/tmp/accounts.json"));
        config.validate().unwrap();
    }

    #[test]
    fn remote_without_url_is_invalid() {
        let mut config = ServiceConfig::default();
        config.embedder.backend = BackendKind::Remote;
        assert!(config.validate().is_err());
    }
}
