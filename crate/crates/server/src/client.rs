//! Blocking-free HTTP client for a running service.

use std::time::Duration;

use chrono::{DateTime, Utc};
use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::api::{
    ChatReply, ChatRequest, Credentials, DeleteReply, ErrorBody, IngestReply, IngestRequest, ListQuery,
    LoginReply, MemoryList, MemoryView, RegisterReply,
};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot reach service: {0}")]
    Transport(String),
    #[error("{category} error (HTTP {status}): {message}")]
    Api {
        status: u16,
        category: String,
        message: String,
    },
}

impl ClientError {
    /// True for failures of the service or the network rather than of the request.
    pub fn is_backend(&self) -> bool {
        match self {
            ClientError::Transport(_) => true,
            ClientError::Api { category, .. } => category == "backend" || category == "internal",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ApiClient {
    http: reqwest::Client,
    base: String,
    token: Option<String>,
}

impl ApiClient {
    pub fn new(base_url: &str) -> Self {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .expect("http client");
        Self {
            http,
            base: base_url.trim_end_matches('/').to_string(),
            token: None,
        }
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }

    pub fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }

    async fn call<B: Serialize, T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        query: &[(&str, String)],
        body: Option<&B>,
    ) -> Result<T, ClientError> {
        let mut req = self.http.request(method, format!("{}{}", self.base, path));
        if !query.is_empty() {
            req = req.query(query);
        }
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        if let Some(body) = body {
            req = req.json(body);
        }
        let resp = req.send().await.map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status();
        let bytes = resp.bytes().await.map_err(|e| ClientError::Transport(e.to_string()))?;
        if status.is_success() {
            let bytes = if status == StatusCode::NO_CONTENT { &b"null"[..] } else { &bytes[..] };
            return serde_json::from_slice(bytes).map_err(|e| ClientError::Api {
                status: status.as_u16(),
                category: "internal".into(),
                message: format!("malformed response: {e}"),
            });
        }
        Err(match serde_json::from_slice::<ErrorBody>(&bytes) {
            Ok(body) => ClientError::Api {
                status: status.as_u16(),
                category: body.error.category,
                message: body.error.message,
            },
            Err(_) => ClientError::Api {
                status: status.as_u16(),
                category: if status.is_server_error() { "backend" } else { "validation" }.into(),
                message: String::from_utf8_lossy(&bytes).into_owned(),
            },
        })
    }

    pub async fn health(&self) -> Result<serde_json::Value, ClientError> {
        self.call::<(), _>(Method::GET, "/v1/health", &[], None).await
    }

    pub async fn register(&self, username: &str, password: &str) -> Result<String, ClientError> {
        let body = Credentials { username: username.into(), password: password.into() };
        let reply: RegisterReply = self.call(Method::POST, "/v1/users", &[], Some(&body)).await?;
        Ok(reply.user_id)
    }

    /// Logs in and keeps the token for later calls.
    pub async fn login(&mut self, username: &str, password: &str) -> Result<LoginReply, ClientError> {
        let body = Credentials { username: username.into(), password: password.into() };
        let reply: LoginReply = self.call(Method::POST, "/v1/sessions", &[], Some(&body)).await?;
        self.token = Some(reply.token.clone());
        Ok(reply)
    }

    pub async fn ingest(&self, text: &str, timestamp: Option<DateTime<Utc>>) -> Result<Vec<String>, ClientError> {
        let body = IngestRequest { text: text.into(), timestamp };
        let reply: IngestReply = self.call(Method::POST, "/v1/memories", &[], Some(&body)).await?;
        Ok(reply.record_ids)
    }

    pub async fn chat(&self, query: &str, k: Option<usize>) -> Result<ChatReply, ClientError> {
        let body = ChatRequest { query: query.into(), k };
        self.call(Method::POST, "/v1/chat", &[], Some(&body)).await
    }

    pub async fn list(&self, query: Option<&str>, limit: Option<usize>) -> Result<Vec<MemoryView>, ClientError> {
        let params = ListQuery { query: query.map(str::to_string), limit, offset: None };
        Ok(self.list_page(&params).await?.memories)
    }

    pub async fn list_page(&self, params: &ListQuery) -> Result<MemoryList, ClientError> {
        let mut query = Vec::new();
        if let Some(q) = &params.query {
            query.push(("query", q.clone()));
        }
        if let Some(l) = params.limit {
            query.push(("limit", l.to_string()));
        }
        if let Some(o) = params.offset {
            query.push(("offset", o.to_string()));
        }
        self.call::<(), _>(Method::GET, "/v1/memories", &query, None).await
    }

    pub async fn delete_all(&self) -> Result<usize, ClientError> {
        let reply: DeleteReply = self.call::<(), _>(Method::DELETE, "/v1/memories", &[], None).await?;
        Ok(reply.deleted)
    }
}
