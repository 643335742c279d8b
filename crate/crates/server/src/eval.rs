//! Scenario replay and synthetic-corpus scoring.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use memora_core::{PromptMode, UserId};

use crate::api::{ChatReply, StageLatency};
use crate::client::{ApiClient, ClientError};
use crate::service::{Service, ServiceError};
use crate::synthetic::{Corpus, CorpusConfig};

pub const SCENARIO_SCHEMA_VERSION: &str = "1";
pub const REPORT_SCHEMA_VERSION: &str = "1";
pub const SYNTHETIC_NOTE: &str =
    "synthetic stand-in corpus: accuracy is the fraction of queries whose top-k holds an entry of the query's topic";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("reading {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("invalid scenario {name}: {reason}")]
    InvalidScenario { name: String, reason: String },
    #[error("target failed: {0}")]
    Target(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeItem {
    pub text: String,
    /// Defaults to the time of ingestion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioQuery {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_mode: Option<PromptMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_retrieval_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expect_response_contains: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expect_response_excludes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default)]
    pub knowledge: Vec<KnowledgeItem>,
    pub queries: Vec<ScenarioQuery>,
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let read_err = |reason: String| HarnessError::Read { path: path.to_path_buf(), reason };
        let text = std::fs::read_to_string(path).map_err(|e| read_err(e.to_string()))?;
        let scenario: Scenario = serde_json::from_str(&text).map_err(|e| read_err(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |reason: &str| HarnessError::InvalidScenario {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(invalid(&format!("unsupported schema_version {:?}", self.schema_version)));
        }
        if self.name.trim().is_empty() {
            return Err(invalid("name must not be empty"));
        }
        if self.queries.is_empty() {
            return Err(invalid("at least one query is required"));
        }
        if self.knowledge.iter().any(|k| k.text.trim().is_empty()) {
            return Err(invalid("knowledge text must not be empty"));
        }
        for q in &self.queries {
            if q.text.trim().is_empty() {
                return Err(invalid("query text must not be empty"));
            }
            if let Some(k) = q.k {
                if !(1..=memora_core::MAX_K).contains(&k) {
                    return Err(invalid("k out of range"));
                }
            }
            let substrings = q
                .expect_retrieval_contains
                .iter()
                .chain(&q.expect_response_contains)
                .chain(&q.expect_response_excludes);
            if substrings.into_iter().any(|s| s.is_empty()) {
                return Err(invalid("expected substrings must not be empty"));
            }
        }
        Ok(())
    }
}

/// Every `*.json` scenario under `path` (or the single file), sorted by file
/// name. Names must be unique.
pub fn load_suite(path: &Path) -> Result<Vec<Scenario>, HarnessError> {
    let read_err = |reason: String| HarnessError::Read { path: path.to_path_buf(), reason };
    let files = if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| read_err(e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(read_err("no scenario files".into()));
    }
    let scenarios = files.iter().map(|f| Scenario::from_file(f)).collect::<Result<Vec<_>, _>>()?;
    let mut names = HashSet::new();
    for s in &scenarios {
        if !names.insert(s.name.as_str()) {
            return Err(HarnessError::InvalidScenario {
                name: s.name.clone(),
                reason: "duplicate scenario name in suite".into(),
            });
        }
    }
    Ok(scenarios)
}

/// A service the harness drives. `begin` switches to a fresh, empty user.
#[allow(async_fn_in_trait)]
pub trait EvalTarget {
    async fn begin(&mut self, label: &str) -> Result<(), HarnessError>;
    async fn ingest(&mut self, text: &str, timestamp: Option<DateTime<Utc>>) -> Result<(), HarnessError>;
    async fn chat(&mut self, query: &str, k: Option<usize>) -> Result<ChatReply, HarnessError>;
}

fn target_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Target(e.to_string())
}

/// Drives a [`Service`] in the same process.
pub struct InProcessTarget {
    service: Arc<Service>,
    user: UserId,
    runs: usize,
}

impl InProcessTarget {
    pub fn new(service: Arc<Service>) -> Self {
        Self { service, user: UserId::new("eval"), runs: 0 }
    }

    fn session(&self) -> String {
        format!("eval-session:{}", self.user)
    }
}

impl EvalTarget for InProcessTarget {
    async fn begin(&mut self, label: &str) -> Result<(), HarnessError> {
        self.runs += 1;
        self.user = UserId::new(format!("eval:{}:{label}:{}", uuid::Uuid::new_v4().simple(), self.runs));
        Ok(())
    }

    async fn ingest(&mut self, text: &str, timestamp: Option<DateTime<Utc>>) -> Result<(), HarnessError> {
        self.service.ingest_for(&self.user, text, timestamp).await.map_err(target_err)?;
        Ok(())
    }

    async fn chat(&mut self, query: &str, k: Option<usize>) -> Result<ChatReply, HarnessError> {
        let session = self.session();
        self.service
            .chat_for(&self.user, Some(&session), query, k)
            .await
            .map_err(|e: ServiceError| target_err(e))
    }
}

/// Drives a running service over HTTP, registering one throwaway account
/// per scenario.
pub struct HttpTarget {
    client: ApiClient,
}

impl HttpTarget {
    pub fn new(base_url: &str) -> Self {
        Self { client: ApiClient::new(base_url) }
    }
}

impl EvalTarget for HttpTarget {
    async fn begin(&mut self, _label: &str) -> Result<(), HarnessError> {
        let username = format!("eval-{}", uuid::Uuid::new_v4().simple());
        let password = uuid::Uuid::new_v4().simple().to_string();
        self.client.register(&username, &password).await.map_err(target_err)?;
        self.client.login(&username, &password).await.map_err(target_err)?;
        Ok(())
    }

    async fn ingest(&mut self, text: &str, timestamp: Option<DateTime<Utc>>) -> Result<(), HarnessError> {
        self.client.ingest(text, timestamp).await.map_err(target_err)?;
        Ok(())
    }

    async fn chat(&mut self, query: &str, k: Option<usize>) -> Result<ChatReply, HarnessError> {
        self.client.chat(query, k).await.map_err(|e: ClientError| target_err(e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedSummary {
    pub text: String,
    pub score: f64,
    pub in_prompt: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub scenario: String,
    pub index: usize,
    pub query: String,
    pub mode: PromptMode,
    pub response_text: String,
    pub retrieved: Vec<RetrievedSummary>,
    /// Whether the expected record was retrieved, when one is expected.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrieval_hit: Option<bool>,
    pub passed: bool,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p50_ms: f64,
    pub p95_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub samples: usize,
    pub embed: Percentiles,
    pub retrieve: Percentiles,
    pub prompt: Percentiles,
    pub complete: Percentiles,
    pub total: Percentiles,
}

/// Nearest-rank percentile of unsorted samples.
pub fn percentile(samples: &[f64], p: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

impl LatencySummary {
    pub fn from_samples(samples: &[StageLatency]) -> Self {
        let stage = |f: fn(&StageLatency) -> f64| {
            let values: Vec<f64> = samples.iter().map(f).collect();
            Percentiles {
                p50_ms: percentile(&values, 50.0),
                p95_ms: percentile(&values, 95.0),
            }
        };
        Self {
            samples: samples.len(),
            embed: stage(|s| s.embed_ms),
            retrieve: stage(|s| s.retrieve_ms),
            prompt: stage(|s| s.prompt_ms),
            complete: stage(|s| s.complete_ms),
            total: stage(|s| s.total_ms),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    Scenarios,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub kind: ReportKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub scenarios: Vec<String>,
    pub queries: Vec<QueryOutcome>,
    pub passed: usize,
    pub failed: usize,
    /// Fraction of queries with a retrieval expectation that met it; `None`
    /// when no query carries one.
    pub retrieval_accuracy: Option<f64>,
    /// Omitted when timings are disabled, which makes reports reproducible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencySummary>,
}

impl Report {
    fn new(kind: ReportKind, scenarios: Vec<String>, queries: Vec<QueryOutcome>, latencies: Option<&[StageLatency]>) -> Self {
        let passed = queries.iter().filter(|q| q.passed).count();
        let hits: Vec<bool> = queries.iter().filter_map(|q| q.retrieval_hit).collect();
        let retrieval_accuracy =
            (!hits.is_empty()).then(|| hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64);
        Self {
            schema_version: REPORT_SCHEMA_VERSION.into(),
            kind,
            note: None,
            scenarios,
            failed: queries.len() - passed,
            passed,
            queries,
            retrieval_accuracy,
            latency: latencies.map(LatencySummary::from_samples),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub record_latency: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { record_latency: true }
    }
}

fn summarize(reply: &ChatReply) -> Vec<RetrievedSummary> {
    reply
        .retrieved
        .iter()
        .map(|r| RetrievedSummary { text: r.text.clone(), score: r.score, in_prompt: r.in_prompt })
        .collect()
}

/// Checks one reply against the expectations of `query`.
pub fn judge(scenario: &str, index: usize, query: &ScenarioQuery, reply: &ChatReply) -> QueryOutcome {
    let mut reasons = Vec::new();
    if let Some(mode) = query.expect_mode {
        if reply.mode != mode {
            reasons.push(format!("mode was {}, expected {}", reply.mode.as_str(), mode.as_str()));
        }
    }
    let retrieval_hit = query
        .expect_retrieval_contains
        .as_ref()
        .map(|needle| reply.retrieved.iter().any(|r| r.text.contains(needle.as_str())));
    if retrieval_hit == Some(false) {
        reasons.push(format!(
            "no retrieved context contains {:?}",
            query.expect_retrieval_contains.as_deref().unwrap_or_default()
        ));
    }
    for needle in &query.expect_response_contains {
        if !reply.response_text.contains(needle.as_str()) {
            reasons.push(format!("response lacks {needle:?}"));
        }
    }
    for needle in &query.expect_response_excludes {
        if reply.response_text.contains(needle.as_str()) {
            reasons.push(format!("response contains excluded {needle:?}"));
        }
    }
    QueryOutcome {
        scenario: scenario.to_string(),
        index,
        query: query.text.clone(),
        mode: reply.mode,
        response_text: reply.response_text.clone(),
        retrieved: summarize(reply),
        retrieval_hit,
        passed: reasons.is_empty(),
        reasons,
    }
}

async fn replay<T: EvalTarget>(
    scenario: &Scenario,
    target: &mut T,
    outcomes: &mut Vec<QueryOutcome>,
    latencies: &mut Vec<StageLatency>,
) -> Result<(), HarnessError> {
    scenario.validate()?;
    target.begin(&scenario.name).await?;
    for item in &scenario.knowledge {
        target.ingest(&item.text, item.timestamp).await?;
    }
    for (index, query) in scenario.queries.iter().enumerate() {
        let reply = target.chat(&query.text, query.k).await?;
        latencies.push(reply.latency);
        outcomes.push(judge(&scenario.name, index, query, &reply));
    }
    Ok(())
}

pub async fn run<T: EvalTarget>(scenario: &Scenario, target: &mut T, options: RunOptions) -> Result<Report, HarnessError> {
    run_suite(std::slice::from_ref(scenario), target, options).await
}

/// Runs scenarios in order, each against a fresh user.
pub async fn run_suite<T: EvalTarget>(
    scenarios: &[Scenario],
    target: &mut T,
    options: RunOptions,
) -> Result<Report, HarnessError> {
    let mut outcomes = Vec::new();
    let mut latencies = Vec::new();
    for scenario in scenarios {
        replay(scenario, target, &mut outcomes, &mut latencies).await?;
    }
    let names = scenarios.iter().map(|s| s.name.clone()).collect();
    Ok(Report::new(
        ReportKind::Scenarios,
        names,
        outcomes,
        options.record_latency.then_some(&latencies[..]),
    ))
}

/// Ingests a generated corpus into a fresh user and asks every held-out
/// query; a query passes when its top-k holds an entry of its topic.
pub async fn run_synthetic<T: EvalTarget>(
    config: &CorpusConfig,
    target: &mut T,
    options: RunOptions,
) -> Result<Report, HarnessError> {
    config.validate().map_err(|reason| HarnessError::InvalidScenario { name: "synthetic".into(), reason })?;
    let corpus = Corpus::generate(config);
    let name = format!("synthetic-seed{}-k{}", config.seed, config.k);
    target.begin(&name).await?;
    for entry in &corpus.entries {
        target.ingest(&entry.text, Some(entry.timestamp)).await?;
    }
    let mut outcomes = Vec::new();
    let mut latencies = Vec::new();
    for (index, probe) in corpus.queries.iter().enumerate() {
        let reply = target.chat(&probe.text, Some(config.k)).await?;
        latencies.push(reply.latency);
        let hit = reply.retrieved.iter().any(|r| corpus.topic_of(&r.text) == Some(probe.topic));
        let topic = corpus.topic_names[probe.topic];
        outcomes.push(QueryOutcome {
            scenario: name.clone(),
            index,
            query: probe.text.clone(),
            mode: reply.mode,
            response_text: reply.response_text.clone(),
            retrieved: summarize(&reply),
            retrieval_hit: Some(hit),
            passed: hit,
            reasons: if hit { Vec::new() } else { vec![format!("no {topic} entry in top {}", config.k)] },
        });
    }
    let mut report = Report::new(
        ReportKind::Synthetic,
        vec![name],
        outcomes,
        options.record_latency.then_some(&latencies[..]),
    );
    report.note = Some(SYNTHETIC_NOTE.into());
    Ok(report)
}
