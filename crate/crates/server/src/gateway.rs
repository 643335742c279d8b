//! Completion backends: a remote chat-completion endpoint with retries, or
//! the deterministic extractive stub.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use memora_core::completion::{
    stub_complete, ChatMessage, CompletionBackend, CompletionRequest, CompletionResult,
};

use crate::config::{BackendKind, GatewayConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
    #[error("completion request timed out")]
    Timeout,
    #[error("completion transport error: {0}")]
    Transport(String),
    #[error("completion endpoint returned HTTP {0}")]
    Status(u16),
    #[error("completion response had no choices")]
    EmptyChoices,
    #[error("malformed completion response: {0}")]
    Malformed(String),
}

impl GatewayError {
    pub fn category(&self) -> &'static str {
        match self {
            GatewayError::InvalidRequest(_) => "validation",
            _ => "backend",
        }
    }

    fn retryable(&self) -> bool {
        match self {
            GatewayError::Timeout | GatewayError::Transport(_) => true,
            GatewayError::Status(code) => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RemoteGateway {
    client: reqwest::Client,
    endpoint: String,
    api_key_header: String,
    api_key_value: Option<String>,
    retries: u32,
    backoff: Duration,
}

impl RemoteGateway {
    pub fn new(config: &GatewayConfig) -> Self {
        let client = reqwest::Client::builder()
            .timeout(config.timeout())
            .build()
            .expect("http client builds");
        Self {
            client,
            endpoint: config.endpoint_url.clone(),
            api_key_header: config.api_key_header.clone(),
            api_key_value: config.api_key_value.clone(),
            retries: config.retries,
            backoff: Duration::from_millis(config.backoff_ms),
        }
    }

    async fn attempt(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let messages = request.messages();
        let body = WireRequest {
            model: &request.model_name,
            messages: &messages,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(value) = &self.api_key_value {
            req = req.header(self.api_key_header.as_str(), value.as_str());
        }
        let resp = req.send().await.map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(GatewayError::Status(status.as_u16()));
        }
        let bytes = resp.bytes().await.map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::Transport(e.to_string())
            }
        })?;
        let parsed: WireResponse =
            serde_json::from_slice(&bytes).map_err(|e| GatewayError::Malformed(e.to_string()))?;
        let choice = parsed.choices.into_iter().next().ok_or(GatewayError::EmptyChoices)?;
        match choice.message.content {
            Some(text) if !text.is_empty() => Ok(text),
            _ => Err(GatewayError::EmptyChoices),
        }
    }

    /// Tries once plus up to `retries` more times, doubling the pause after
    /// each retryable failure.
    pub async fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(request).await {
                Ok(text) => return Ok(text),
                Err(e) if e.retryable() && attempt < self.retries => {
                    tracing::warn!(error = %e, attempt, "completion failed, retrying");
                    tokio::time::sleep(delay).await;
                    delay *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum Gateway {
    Stub,
    Remote(RemoteGateway),
}

impl Gateway {
    pub fn from_config(config: &GatewayConfig) -> Self {
        match config.backend {
            BackendKind::Builtin => Gateway::Stub,
            BackendKind::Remote => Gateway::Remote(RemoteGateway::new(config)),
        }
    }

    pub async fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        request
            .validate()
            .map_err(|e| GatewayError::InvalidRequest(e.to_string()))?;
        let started = Instant::now();
        let (text, backend) = match self {
            Gateway::Stub => (stub_complete(&request.prompt), CompletionBackend::Stub),
            Gateway::Remote(remote) => (remote.complete(request).await?, CompletionBackend::Remote),
        };
        Ok(CompletionResult {
            text,
            backend,
            latency: started.elapsed(),
        })
    }
}
