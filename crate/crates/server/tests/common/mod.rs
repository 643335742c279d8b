#![allow(dead_code)]

use std::sync::Arc;

use axum::Router;
use memora_server::{http, Service, ServiceConfig};

pub struct TestApp {
    pub base: String,
    pub service: Arc<Service>,
}

/// Serves `router` on an ephemeral local port and returns its base URL.
pub async fn serve_router(router: Router) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, router).await.unwrap();
    });
    format!("http://{addr}")
}

pub async fn spawn_app(config: ServiceConfig) -> TestApp {
    let service = Arc::new(Service::new(config).unwrap());
    let base = serve_router(http::router(service.clone())).await;
    TestApp { base, service }
}

pub async fn spawn_default() -> TestApp {
    spawn_app(ServiceConfig::default()).await
}

/// A base URL on which nothing listens.
pub async fn dead_endpoint() -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}")
}

pub const ANIME_NOTE: &str =
    "My colleagues at work would not stop talking about Anime on Netflix. I sure should watch one in the coming days.";
pub const DOCTOR_NOTE: &str = "Today is Monday, 23rd December 2024. I do have an appointment with my Doctor next week wednesday. Also, I would like to call some friends anytime next week.";
