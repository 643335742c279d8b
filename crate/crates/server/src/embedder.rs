//! Embedding backends: the builtin trigram hasher or a remote embedding
//! service speaking `{"model", "input": [..]}` -> `{"data": [{"index", "embedding"}]}`.

use serde::{Deserialize, Serialize};

use memora_core::embedding::{check_input, EmbedError, EmbeddingVector, TextEmbedder, DIMENSION};
use memora_core::BuiltinEmbedder;

use crate::config::{BackendKind, EmbedderConfig};

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    index: usize,
    embedding: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    client: reqwest::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl RemoteEmbedder {
    pub fn new(config: &EmbedderConfig) -> Self {
        let client = reqwest::Client::builder()
            .timeout(config.timeout())
            .build()
            .expect("http client builds");
        Self {
            client,
            endpoint: config.endpoint_url.clone(),
            model: config.model_name.clone(),
            api_key: config.api_key.clone(),
        }
    }

    async fn call(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let backend = |what: String| EmbedError::Backend(what);
        let mut req = self.client.post(&self.endpoint).json(&EmbedRequest {
            model: &self.model,
            input: texts,
        });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| {
            if e.is_timeout() {
                backend("embedding request timed out".into())
            } else {
                backend(format!("embedding request failed: {e}"))
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(backend(format!("embedding service returned HTTP {}", status.as_u16())));
        }
        let body: EmbedResponse = resp
            .json()
            .await
            .map_err(|e| backend(format!("malformed embedding response: {e}")))?;

        let mut slots: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
        for datum in body.data {
            if datum.embedding.len() != DIMENSION {
                return Err(backend(format!(
                    "embedding service returned {} dimensions, expected {DIMENSION}",
                    datum.embedding.len()
                )));
            }
            let slot = slots
                .get_mut(datum.index)
                .ok_or_else(|| backend(format!("embedding index {} out of range", datum.index)))?;
            *slot = Some(
                EmbeddingVector::normalize(&datum.embedding)
                    .map_err(|e| backend(format!("bad embedding: {e}")))?,
            );
        }
        slots
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| backend(format!("embedding missing for index {i}"))))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub enum Embedder {
    Builtin(BuiltinEmbedder),
    Remote(RemoteEmbedder),
}

impl Embedder {
    pub fn from_config(config: &EmbedderConfig) -> Self {
        match config.backend {
            BackendKind::Builtin => Embedder::Builtin(BuiltinEmbedder),
            BackendKind::Remote => Embedder::Remote(RemoteEmbedder::new(config)),
        }
    }

    pub async fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut out = self.embed_batch(&[text.to_string()]).await.map_err(|e| match e {
            EmbedError::InvalidInput { reason, .. } => EmbedError::InvalidInput { index: None, reason },
            other => other,
        })?;
        Ok(out.remove(0))
    }

    /// Embeds every text or fails as a whole, naming the first invalid index.
    pub async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        for (i, t) in texts.iter().enumerate() {
            check_input(t).map_err(|_| EmbedError::InvalidInput {
                index: Some(i),
                reason: "text is empty or whitespace".into(),
            })?;
        }
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        match self {
            Embedder::Builtin(b) => {
                let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
                b.embed_batch(&refs)
            }
            Embedder::Remote(r) => r.call(texts).await,
        }
    }
}
