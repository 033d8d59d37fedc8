//! JSON HTTP API over a [`Service`].

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use crowdml_core::quiz::QuizError;
use crowdml_core::service::{Service, ServiceError};
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Request bodies above this are refused before parsing.
const BODY_LIMIT: usize = 1024 * 1024;

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match &e {
            ServiceError::UnknownChallenge(_) | ServiceError::UnknownSubmission(_) | ServiceError::UnknownQuiz(_) => {
                StatusCode::NOT_FOUND
            }
            ServiceError::Unqualified { .. } => StatusCode::FORBIDDEN,
            ServiceError::PayloadTooLarge { .. }
            | ServiceError::InvalidPayload(_)
            | ServiceError::Quiz(QuizError::LengthMismatch { .. } | QuizError::OptionOutOfRange { .. }) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ServiceError::InvalidState(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            log::error!("{e}");
        }
        Self::new(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        let status = if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            StatusCode::PAYLOAD_TOO_LARGE
        } else {
            StatusCode::UNPROCESSABLE_ENTITY
        };
        Self::new(status, e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Svc = State<Arc<Service>>;

/// Runs blocking service work (store writes fsync) off the async workers.
async fn blocking<T, F>(svc: Arc<Service>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Debug, Deserialize)]
pub struct SubmitRequest {
    pub user_id: String,
    pub source: String,
    pub dedupe_key: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub submission_id: String,
}

#[derive(Debug, Deserialize)]
pub struct TagRequest {
    pub tag: String,
}

#[derive(Debug, Deserialize)]
pub struct AttemptRequest {
    pub user_id: String,
    pub answers: Vec<usize>,
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/challenges", get(list_challenges))
        .route("/api/challenges/{id}", get(get_challenge))
        .route("/api/challenges/{id}/submissions", post(submit))
        .route("/api/challenges/{id}/leaderboard", get(get_leaderboard))
        .route("/api/challenges/{id}/approaches", get(get_approaches))
        .route("/api/submissions/{id}", get(get_submission))
        .route("/api/submissions/{id}/tag", post(tag))
        .route("/api/quizzes/{id}", get(get_quiz))
        .route("/api/quizzes/{id}/attempts", post(attempt))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "no such route") })
        .layer(axum::extract::DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(service)
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn list_challenges(State(svc): Svc) -> impl IntoResponse {
    Json(svc.challenges())
}

async fn get_challenge(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.challenge(&id)?))
}

async fn submit(
    State(svc): Svc,
    Path(id): Path<String>,
    body: Result<Json<SubmitRequest>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = body?;
    let submission_id = blocking(svc, move |s| {
        s.submit(&id, &req.user_id, &req.source, req.dedupe_key.as_deref())
    })
    .await?;
    Ok((StatusCode::ACCEPTED, Json(SubmitResponse { submission_id })))
}

async fn get_submission(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.get_result(&id)?))
}

async fn get_leaderboard(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.leaderboard(&id)?))
}

async fn get_approaches(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.approach_summary(&id)?))
}

async fn tag(
    State(svc): Svc,
    Path(id): Path<String>,
    body: Result<Json<TagRequest>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = body?;
    blocking(svc, move |s| s.tag_submission(&id, &req.tag)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn get_quiz(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.quiz(&id)?))
}

async fn attempt(
    State(svc): Svc,
    Path(id): Path<String>,
    body: Result<Json<AttemptRequest>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = body?;
    let result = blocking(svc, move |s| s.attempt_quiz(&id, &req.user_id, &req.answers)).await?;
    Ok(Json(result))
}
