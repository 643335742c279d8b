//! Completion requests and the deterministic extractive stub model.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::{AssembledPrompt, PromptMode};

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_MAX_TOKENS: u32 = 512;
pub const MAX_TOKENS_LIMIT: u32 = 8192;
pub const STUB_UNKNOWN: &str = "I DO NOT KNOW.";
pub const STUB_CONTEXT_PREFIX: &str = "Based on your saved context: ";

#[derive(Debug, Error, PartialEq)]
pub enum RequestError {
    #[error("temperature must be finite and non-negative, got {0}")]
    Temperature(f64),
    #[error("max_tokens must be in 1..={MAX_TOKENS_LIMIT}, got {0}")]
    MaxTokens(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    pub prompt: AssembledPrompt,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_name: String,
}

impl CompletionRequest {
    pub fn new(prompt: AssembledPrompt, model_name: impl Into<String>) -> Self {
        Self {
            prompt,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            model_name: model_name.into(),
        }
    }

    pub fn validate(&self) -> Result<(), RequestError> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(RequestError::Temperature(self.temperature));
        }
        if !(1..=MAX_TOKENS_LIMIT).contains(&self.max_tokens) {
            return Err(RequestError::MaxTokens(self.max_tokens));
        }
        Ok(())
    }

    /// The two chat messages sent to a remote model.
    pub fn messages(&self) -> [ChatMessage; 2] {
        [
            ChatMessage {
                role: "system".into(),
                content: self.prompt.system_message(),
            },
            ChatMessage {
                role: "user".into(),
                content: self.prompt.user_query.clone(),
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompletionBackend {
    Remote,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionResult {
    pub text: String,
    pub backend: CompletionBackend,
    pub latency: Duration,
}

/// Extractive stand-in for a language model: quotes the best memory in
/// contextual mode and admits ignorance otherwise.
pub fn stub_complete(prompt: &AssembledPrompt) -> String {
    match (prompt.mode, prompt.context_items.first()) {
        (PromptMode::Contextual, Some(top)) => format!("{STUB_CONTEXT_PREFIX}{}", top.text),
        _ => STUB_UNKNOWN.to_string(),
    }
}
