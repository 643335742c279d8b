//! JSON-over-HTTP API.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequestParts, Query, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use crate::api::{
    ChatRequest, Credentials, DeleteReply, ErrorBody, ErrorDetail, IngestReply, IngestRequest, ListQuery,
    LoginReply, MemoryList, RegisterReply,
};
use crate::service::{Service, ServiceError};

pub type AppState = Arc<Service>;

pub struct ApiError(pub ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(ServiceError::Validation(e.body_text()))
    }
}

pub fn status_of(e: &ServiceError) -> StatusCode {
    match e {
        ServiceError::Auth(_) => StatusCode::UNAUTHORIZED,
        ServiceError::Validation(_) => StatusCode::BAD_REQUEST,
        ServiceError::Conflict(_) => StatusCode::CONFLICT,
        ServiceError::Backend(_) => StatusCode::BAD_GATEWAY,
        ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_of(&self.0);
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        let body = ErrorBody {
            error: ErrorDetail {
                category: self.0.category().to_string(),
                message: self.0.to_string(),
            },
        };
        (status, Json(body)).into_response()
    }
}

/// The bearer token of the request.
pub struct Bearer(pub String);

impl<S: Send + Sync> FromRequestParts<S> for Bearer {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, Self::Rejection> {
        parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(|t| Bearer(t.trim().to_string()))
            .ok_or_else(|| ApiError(ServiceError::Auth("missing bearer token".into())))
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn register(
    State(svc): State<AppState>,
    body: Result<Json<Credentials>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<RegisterReply>)> {
    let Json(c) = body?;
    let user_id = svc.register(&c.username, &c.password).await?;
    Ok((StatusCode::CREATED, Json(RegisterReply { user_id: user_id.to_string() })))
}

async fn login(
    State(svc): State<AppState>,
    body: Result<Json<Credentials>, JsonRejection>,
) -> ApiResult<Json<LoginReply>> {
    let Json(c) = body?;
    let session = svc.login(&c.username, &c.password).await?;
    Ok(Json(LoginReply {
        token: session.token,
        user_id: session.user_id.to_string(),
        expires_at: session.expires_at,
    }))
}

async fn logout(State(svc): State<AppState>, Bearer(token): Bearer) -> ApiResult<StatusCode> {
    svc.authenticate(&token)?;
    svc.sessions().revoke(&token);
    Ok(StatusCode::NO_CONTENT)
}

async fn ingest(
    State(svc): State<AppState>,
    Bearer(token): Bearer,
    body: Result<Json<IngestRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<IngestReply>)> {
    svc.authenticate(&token)?;
    let Json(req) = body?;
    let ids = svc.ingest_entry(&token, &req.text, req.timestamp).await?;
    Ok((
        StatusCode::CREATED,
        Json(IngestReply { record_ids: ids.iter().map(|id| id.to_string()).collect() }),
    ))
}

async fn list(
    State(svc): State<AppState>,
    Bearer(token): Bearer,
    params: Result<Query<ListQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<Json<MemoryList>> {
    svc.authenticate(&token)?;
    let Query(p) = params.map_err(|e| ApiError(ServiceError::Validation(e.body_text())))?;
    Ok(Json(svc.list_memories(&token, &p).await?))
}

async fn delete(State(svc): State<AppState>, Bearer(token): Bearer) -> ApiResult<Json<DeleteReply>> {
    let deleted = svc.delete_memories(&token)?;
    Ok(Json(DeleteReply { deleted }))
}

async fn chat(
    State(svc): State<AppState>,
    Bearer(token): Bearer,
    body: Result<Json<ChatRequest>, JsonRejection>,
) -> ApiResult<Response> {
    svc.authenticate(&token)?;
    let Json(req) = body?;
    let reply = svc.chat(&token, &req.query, req.k).await?;
    Ok(Json(reply).into_response())
}

async fn health(State(svc): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "records": svc.store().len() }))
}

pub fn router(service: AppState) -> Router {
    let static_dir = service.config().static_dir.clone();
    let api = Router::new()
        .route("/v1/health", get(health))
        .route("/v1/users", post(register))
        .route("/v1/sessions", post(login).delete(logout))
        .route("/v1/memories", post(ingest).get(list).delete(delete))
        .route("/v1/chat", post(chat))
        .with_state(service);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until ctrl-c.
pub async fn serve(service: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(service.config().listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
