//! Multi-tenant memory service: accounts, ingest, retrieval-augmented chat,
//! an HTTP API and an evaluation harness.

pub mod api;
pub mod auth;
pub mod client;
pub mod config;
pub mod embedder;
pub mod eval;
pub mod gateway;
pub mod http;
pub mod service;
pub mod synthetic;

pub use config::ServiceConfig;
pub use service::{Service, ServiceError};
