use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use memora_core::UserId;
use memora_server::api::ChatReply;
use memora_server::client::{ApiClient, ClientError};
use memora_server::config::{ConfigError, ServiceConfig};
use memora_server::eval::{self, HarnessError, HttpTarget, InProcessTarget, Report, ReportKind, RunOptions};
use memora_server::synthetic::CorpusConfig;
use memora_server::{http, Service, ServiceError};

/// Personal memory assistant: service, ingestion, one-shot questions and
/// evaluation.
///
/// Commands run against an in-process engine over the configured journal,
/// or against a running service when --endpoint is given.
///
/// Exit codes: 0 success, 1 validation or assertion failure (including bad
/// arguments), 2 transport or backend failure. A synthetic evaluation
/// succeeds when its accuracy reaches --min-accuracy.
#[derive(Debug, Parser)]
#[command(name = "memora", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "MEMORA_CONFIG")]
    config: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Output::Text)]
    output: Output,
    /// Base URL of a running service, e.g. http://127.0.0.1:8080.
    #[arg(long, global = true, env = "MEMORA_ENDPOINT")]
    endpoint: Option<String>,
    /// Bearer token for --endpoint.
    #[arg(long, global = true, env = "MEMORA_TOKEN", hide_env_values = true)]
    token: Option<String>,
    /// Memory journal for in-process commands.
    #[arg(long, global = true)]
    journal: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        /// Listen address, overriding the configuration.
        #[arg(long)]
        listen: Option<std::net::SocketAddr>,
    },
    /// Create an account on --endpoint.
    Register(CredentialArgs),
    /// Log in to --endpoint and print a bearer token.
    Login(CredentialArgs),
    /// Store a text entry read from a file or stdin.
    Ingest {
        /// UTF-8 text file; `-` or absent reads stdin.
        path: Option<PathBuf>,
        /// User id for in-process mode.
        #[arg(long, default_value = "local")]
        user: String,
        /// Entry time (RFC 3339); defaults to now.
        #[arg(long)]
        timestamp: Option<DateTime<Utc>>,
    },
    /// Ask one question.
    Ask {
        query: String,
        /// Number of memories to retrieve (1-16).
        #[arg(long)]
        k: Option<usize>,
        /// Also print the retrieved memories with their scores.
        #[arg(long)]
        show_contexts: bool,
        /// User id for in-process mode.
        #[arg(long, default_value = "local")]
        user: String,
    },
    /// Replay scenario files, or score the synthetic corpus.
    Eval {
        /// Scenario file or directory of scenario files.
        #[arg(required_unless_present = "synthetic")]
        path: Option<PathBuf>,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Score the seeded synthetic corpus instead of scenarios.
        #[arg(long, conflicts_with = "path")]
        synthetic: bool,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Retrieval depth for the synthetic corpus.
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Ingest the synthetic corpus in shuffled order.
        #[arg(long)]
        shuffle: bool,
        /// Leave latency out of the report so it is reproducible.
        #[arg(long)]
        no_timings: bool,
        /// Synthetic accuracy needed for a zero exit code.
        #[arg(long, default_value_t = 0.90)]
        min_accuracy: f64,
    },
}

#[derive(Debug, Args)]
struct CredentialArgs {
    #[arg(long)]
    username: String,
    #[arg(long, env = "MEMORA_PASSWORD", hide_env_values = true)]
    password: String,
}

enum Failure {
    Invalid(String),
    Backend(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Backend(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Backend(m) => m,
        }
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Backend(_) | ServiceError::Internal(_) => Failure::Backend(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        if e.is_backend() {
            Failure::Backend(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Target(_) => Failure::Backend(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Outcome = Result<ExitCode, Failure>;

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
}

fn remote_client(cli: &Cli, endpoint: &str) -> Result<ApiClient, Failure> {
    let client = ApiClient::new(endpoint);
    match &cli.token {
        Some(token) => Ok(client.with_token(token)),
        None => Err(Failure::Invalid("--token (or MEMORA_TOKEN) is required with --endpoint".into())),
    }
}

fn local_service(cli: &Cli, mut config: ServiceConfig) -> Result<Service, Failure> {
    if cli.journal.is_some() {
        config.journal_path = cli.journal.clone();
    }
    Ok(Service::new(config)?)
}

fn read_entry(path: Option<&PathBuf>) -> Result<String, Failure> {
    let mut text = String::new();
    match path {
        Some(p) if p.as_os_str() != "-" => {
            text = std::fs::read_to_string(p).map_err(|e| Failure::Invalid(format!("{}: {e}", p.display())))?;
        }
        _ => {
            std::io::stdin()
                .read_to_string(&mut text)
                .map_err(|e| Failure::Invalid(format!("stdin: {e}")))?;
        }
    }
    Ok(text)
}

fn print_chat(output: Output, reply: &ChatReply, show_contexts: bool) {
    match output {
        Output::Json => print_json(reply),
        Output::Text => {
            println!("{}", reply.response_text);
            if show_contexts {
                println!();
                println!("mode: {}", reply.mode.as_str());
                if reply.retrieved.is_empty() {
                    println!("no memories retrieved");
                }
                for (i, r) in reply.retrieved.iter().enumerate() {
                    let marker = if r.in_prompt { "*" } else { " " };
                    println!("{marker}{}. [{:.4}] {} {}", i + 1, r.score, r.record_id, r.text.replace('\n', " "));
                }
            }
        }
    }
}

fn print_report(output: Output, report: &Report) {
    match output {
        Output::Json => println!("{}", report.to_json()),
        Output::Text => {
            for q in &report.queries {
                let status = if q.passed { "PASS" } else { "FAIL" };
                println!("{status} {}#{} {}", q.scenario, q.index, q.query);
                for reason in &q.reasons {
                    println!("     {reason}");
                }
            }
            println!("{} passed, {} failed", report.passed, report.failed);
            if let Some(acc) = report.retrieval_accuracy {
                println!("retrieval accuracy {acc:.3}");
            }
            if let Some(note) = &report.note {
                println!("note: {note}");
            }
            if let Some(lat) = &report.latency {
                println!(
                    "latency ms p50/p95: embed {:.2}/{:.2} retrieve {:.2}/{:.2} prompt {:.2}/{:.2} complete {:.2}/{:.2} total {:.2}/{:.2}",
                    lat.embed.p50_ms, lat.embed.p95_ms,
                    lat.retrieve.p50_ms, lat.retrieve.p95_ms,
                    lat.prompt.p50_ms, lat.prompt.p95_ms,
                    lat.complete.p50_ms, lat.complete.p95_ms,
                    lat.total.p50_ms, lat.total.p95_ms,
                );
            }
        }
    }
}

async fn run(cli: Cli) -> Outcome {
    let config = ServiceConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Serve { listen } => {
            let mut config = config;
            if let Some(addr) = listen {
                config.listen = *addr;
            }
            let service = Arc::new(local_service(&cli, config)?);
            http::serve(service)
                .await
                .map_err(|e| Failure::Backend(format!("serving failed: {e}")))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Register(creds) => {
            let endpoint = cli.endpoint.as_deref().ok_or_else(|| Failure::Invalid("--endpoint is required".into()))?;
            let user_id = ApiClient::new(endpoint).register(&creds.username, &creds.password).await?;
            match cli.output {
                Output::Json => print_json(&json!({ "user_id": user_id })),
                Output::Text => println!("{user_id}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Login(creds) => {
            let endpoint = cli.endpoint.as_deref().ok_or_else(|| Failure::Invalid("--endpoint is required".into()))?;
            let reply = ApiClient::new(endpoint).login(&creds.username, &creds.password).await?;
            match cli.output {
                Output::Json => print_json(&reply),
                Output::Text => println!("{}", reply.token),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Ingest { path, user, timestamp } => {
            let text = read_entry(path.as_ref())?;
            let ids: Vec<String> = match &cli.endpoint {
                Some(endpoint) => remote_client(&cli, endpoint)?.ingest(&text, *timestamp).await?,
                None => local_service(&cli, config)?
                    .ingest_for(&UserId::new(user.as_str()), &text, *timestamp)
                    .await?
                    .iter()
                    .map(|id| id.to_string())
                    .collect(),
            };
            match cli.output {
                Output::Json => print_json(&json!({ "record_ids": ids })),
                Output::Text => ids.iter().for_each(|id| println!("{id}")),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Ask { query, k, show_contexts, user } => {
            let reply = match &cli.endpoint {
                Some(endpoint) => remote_client(&cli, endpoint)?.chat(query, *k).await?,
                None => {
                    local_service(&cli, config)?
                        .chat_for(&UserId::new(user.as_str()), None, query, *k)
                        .await?
                }
            };
            print_chat(cli.output, &reply, *show_contexts);
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { path, report, synthetic, seed, k, shuffle, no_timings, min_accuracy } => {
            let options = RunOptions { record_latency: !no_timings };
            let corpus = CorpusConfig { seed: *seed, k: *k, shuffle: *shuffle, ..CorpusConfig::default() };
            let scenarios = match path {
                Some(p) if !synthetic => Some(eval::load_suite(p)?),
                _ => None,
            };
            let result = match &cli.endpoint {
                Some(endpoint) => {
                    let mut target = HttpTarget::new(endpoint);
                    match &scenarios {
                        Some(s) => eval::run_suite(s, &mut target, options).await?,
                        None => eval::run_synthetic(&corpus, &mut target, options).await?,
                    }
                }
                None => {
                    // Evaluation never touches the configured journal.
                    let mut config = config;
                    config.journal_path = None;
                    config.accounts_path = None;
                    let mut target = InProcessTarget::new(Arc::new(Service::new(config)?));
                    match &scenarios {
                        Some(s) => eval::run_suite(s, &mut target, options).await?,
                        None => eval::run_synthetic(&corpus, &mut target, options).await?,
                    }
                }
            };
            if let Some(out) = report {
                std::fs::write(out, result.to_json() + "\n")
                    .map_err(|e| Failure::Invalid(format!("{}: {e}", out.display())))?;
            }
            print_report(cli.output, &result);
            let passed = match result.kind {
                ReportKind::Synthetic => result.retrieval_accuracy.unwrap_or(0.0) >= *min_accuracy,
                ReportKind::Scenarios => result.all_passed(),
            };
            Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let default_level = if matches!(cli.command, Command::Serve { .. }) { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level)),
        )
        .init();
    let output = cli.output;
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    match runtime.block_on(run(cli)) {
        Ok(code) => code,
        Err(failure) => {
            match output {
                Output::Json => print_json(&json!({ "error": { "message": failure.message(), "exit_code": failure.code() } })),
                Output::Text => eprintln!("error: {}", failure.message()),
            }
            ExitCode::from(failure.code())
        }
    }
}
