use std::path::Path;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, RawQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use threadscope_core::analytics::AnalyticsError;
use tower_http::services::ServeDir;

use crate::actions::{ActionKind, ModerationAction};
use crate::query::QueryParams;
use crate::service::{ActionsView, Health, Histograms, PostPage, Service, ServiceError, ThreadDetail};

/// JSON error body: a stable machine code plus a human message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl ToString) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: code.to_string(),
                message: message.to_string(),
            },
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let (status, code) = match &e {
            ServiceError::CorpusNotLoaded => (StatusCode::SERVICE_UNAVAILABLE, "corpus_not_loaded"),
            ServiceError::UnknownPost(_) => (StatusCode::NOT_FOUND, "unknown_post"),
            ServiceError::UnknownComment(_) => (StatusCode::NOT_FOUND, "unknown_comment"),
            ServiceError::SchemaMismatch { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "schema_mismatch"),
            ServiceError::CorruptCache(_) => (StatusCode::INTERNAL_SERVER_ERROR, "corrupt_cache"),
            ServiceError::CorpusUnreadable(_) => (StatusCode::INTERNAL_SERVER_ERROR, "corpus_unreadable"),
            ServiceError::StorageFailure(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage_failure"),
            ServiceError::Query(_) => (StatusCode::BAD_REQUEST, "invalid_query"),
            ServiceError::Analytics(AnalyticsError::UnscoredComment(_)) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "unscored_comment")
            }
            ServiceError::Analytics(_) => (StatusCode::BAD_REQUEST, "invalid_query"),
        };
        if status.is_server_error() {
            tracing::error!(error = %e, "request failed");
        }
        ApiError::new(status, code, e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn params(service: &Service, route: &str, raw: Option<String>) -> Result<QueryParams, ApiError> {
    service.telemetry().record(route);
    Ok(QueryParams::parse(raw.as_deref().unwrap_or("")).map_err(ServiceError::from)?)
}

async fn list_posts(State(svc): State<Arc<Service>>, RawQuery(raw): RawQuery) -> ApiResult<PostPage> {
    let q = params(&svc, "GET /posts", raw)?;
    Ok(Json(svc.list_posts(&q)?))
}

async fn get_thread(
    State(svc): State<Arc<Service>>,
    UrlPath(id): UrlPath<String>,
    RawQuery(raw): RawQuery,
) -> ApiResult<ThreadDetail> {
    let q = params(&svc, "GET /posts/{id}", raw)?;
    Ok(Json(svc.get_thread(&id, &q)?))
}

async fn get_histograms(State(svc): State<Arc<Service>>) -> ApiResult<Histograms> {
    svc.telemetry().record("GET /histograms");
    Ok(Json(svc.get_histograms()?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionRequest {
    pub comment_id: String,
    pub kind: ActionKind,
    #[serde(default = "default_actor")]
    pub actor: String,
}

fn default_actor() -> String {
    "moderator".into()
}

async fn post_action(
    State(svc): State<Arc<Service>>,
    body: Result<Json<ActionRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<ModerationAction>), ApiError> {
    svc.telemetry().record("POST /actions");
    let Json(req) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", e.body_text()))?;
    let action = svc.post_action(req.kind, &req.comment_id, &req.actor)?;
    Ok((StatusCode::CREATED, Json(action)))
}

async fn list_actions(State(svc): State<Arc<Service>>) -> Json<ActionsView> {
    svc.telemetry().record("GET /actions");
    Json(svc.actions())
}

async fn health(State(svc): State<Arc<Service>>) -> Json<Health> {
    Json(svc.health())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

pub fn router(service: Arc<Service>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/posts", get(list_posts))
        .route("/posts/{id}", get(get_thread))
        .route("/histograms", get(get_histograms))
        .route("/actions", get(list_actions).post(post_action))
        .route("/health", get(health));
    let api = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    };
    api.with_state(service)
}
