//! Prompt assembly for the two answering modes.
//!
//! Retrieved memories scoring at least the relevance threshold are rendered
//! as a numbered, dated block under the contextual template. When none
//! qualify the generic template is used and no memory text is included.

use std::fmt::Write as _;

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{RecordId, RetrievalResult};
use crate::templates::{CONTEXTUAL_TEMPLATE, GENERIC_TEMPLATE, HONESTY_CLAUSE};

pub const DEFAULT_RELEVANCE_THRESHOLD: f64 = 0.35;
pub const DEFAULT_TRANSCRIPT_WINDOW: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PromptMode {
    Generic,
    Contextual,
}

impl PromptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::Generic => "GENERIC",
            PromptMode::Contextual => "CONTEXTUAL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

impl Turn {
    pub fn user(text: impl Into<String>) -> Self {
        Self { role: Role::User, text: text.into() }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self { role: Role::Assistant, text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextItem {
    pub text: String,
    pub score: f64,
    pub record_id: RecordId,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub generic: String,
    pub contextual: String,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            generic: GENERIC_TEMPLATE.to_string(),
            contextual: CONTEXTUAL_TEMPLATE.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    pub relevance_threshold: f64,
    pub transcript_window_size: usize,
    pub templates: Templates,
    /// When set, a line stating this date is added to the system message.
    pub server_date: Option<NaiveDate>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            relevance_threshold: DEFAULT_RELEVANCE_THRESHOLD,
            transcript_window_size: DEFAULT_TRANSCRIPT_WINDOW,
            templates: Templates::default(),
            server_date: None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("query must not be empty")]
    EmptyQuery,
    #[error("relevance threshold must be in [0, 1), got {0}")]
    BadThreshold(f64),
    #[error("{0} template must contain the honesty clause exactly once")]
    BadTemplate(&'static str),
}

impl PromptConfig {
    pub fn validate(&self) -> Result<(), PromptError> {
        if !(0.0..1.0).contains(&self.relevance_threshold) {
            return Err(PromptError::BadThreshold(self.relevance_threshold));
        }
        if self.templates.generic.matches(HONESTY_CLAUSE).count() != 1 {
            return Err(PromptError::BadTemplate("generic"));
        }
        if self.templates.contextual.matches(HONESTY_CLAUSE).count() != 1 {
            return Err(PromptError::BadTemplate("contextual"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssembledPrompt {
    pub mode: PromptMode,
    pub system_text: String,
    pub context_items: Vec<ContextItem>,
    pub transcript_window: Vec<Turn>,
    pub user_query: String,
    pub server_date: Option<NaiveDate>,
}

impl AssembledPrompt {
    /// Numbered memory block, empty in generic mode.
    pub fn context_block(&self) -> String {
        let mut out = String::new();
        if self.context_items.is_empty() {
            return out;
        }
        out.push_str("Memories:");
        for (i, item) in self.context_items.iter().enumerate() {
            let stamp = item.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true);
            write!(out, "\n{}. [{stamp}] {}", i + 1, item.text).unwrap();
        }
        out
    }

    pub fn transcript_block(&self) -> String {
        let mut out = String::new();
        if self.transcript_window.is_empty() {
            return out;
        }
        out.push_str("Recent conversation:");
        for turn in &self.transcript_window {
            write!(out, "\n{}: {}", turn.role.as_str(), turn.text).unwrap();
        }
        out
    }

    /// System text followed by the memory block, transcript and optional date.
    pub fn system_message(&self) -> String {
        let mut parts = vec![self.system_text.clone()];
        if let Some(date) = self.server_date {
            parts.push(format!("Today's date is {}.", date.format("%A, %-d %B %Y")));
        }
        for block in [self.context_block(), self.transcript_block()] {
            if !block.is_empty() {
                parts.push(block);
            }
        }
        parts.join("\n\n")
    }

    /// The whole prompt as one string.
    pub fn render(&self) -> String {
        format!("{}\n\nuser: {}", self.system_message(), self.user_query)
    }

    pub fn context_ids(&self) -> Vec<RecordId> {
        self.context_items.iter().map(|c| c.record_id.clone()).collect()
    }
}

pub fn build(
    query: &str,
    results: &[RetrievalResult],
    transcript: &[Turn],
    config: &PromptConfig,
) -> Result<AssembledPrompt, PromptError> {
    if query.trim().is_empty() {
        return Err(PromptError::EmptyQuery);
    }
    config.validate()?;

    let mut context_items: Vec<ContextItem> = results
        .iter()
        .filter(|r| r.score >= config.relevance_threshold)
        .map(|r| ContextItem {
            text: r.record.text.clone(),
            score: r.score,
            record_id: r.record.record_id.clone(),
            timestamp: r.record.timestamp,
        })
        .collect();
    context_items.sort_by(|a, b| b.score.total_cmp(&a.score));

    let (mode, system_text) = if context_items.is_empty() {
        (PromptMode::Generic, config.templates.generic.clone())
    } else {
        (PromptMode::Contextual, config.templates.contextual.clone())
    };

    let skip = transcript.len().saturating_sub(config.transcript_window_size);
    Ok(AssembledPrompt {
        mode,
        system_text,
        context_items,
        transcript_window: transcript[skip..].to_vec(),
        user_query: query.to_string(),
        server_date: config.server_date,
    })
}
