use std::sync::Arc;

use axum::extract::{Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use labgrader_core::domain::JobId;
use labgrader_core::protocol::{ErrorBody, GradingJob, HealthBody};
use serde_json::json;

use crate::coordinator::{Coordinator, FetchError, SubmitError};

fn error(status: StatusCode, code: &str, detail: impl ToString) -> Response {
    (
        status,
        Json(ErrorBody {
            error: code.to_owned(),
            detail: detail.to_string(),
        }),
    )
        .into_response()
}

fn fetch_error(e: FetchError) -> Response {
    match e {
        FetchError::NotFound => error(StatusCode::NOT_FOUND, "not_found", e),
        FetchError::NotReady => error(StatusCode::CONFLICT, "not_ready", e),
        FetchError::Failed(_) => error(StatusCode::CONFLICT, "job_failed", e),
    }
}

pub fn router(coordinator: Arc<Coordinator>) -> Router {
    let authed = Router::new()
        .route("/jobs", post(create_job))
        .route("/jobs/{id}", get(job_status).delete(release_job))
        .route("/jobs/{id}/artifacts", get(job_artifacts))
        .route_layer(middleware::from_fn_with_state(coordinator.clone(), require_token));
    Router::new()
        .route("/health", get(health))
        .merge(authed)
        .with_state(coordinator)
}

async fn require_token(State(c): State<Arc<Coordinator>>, req: Request, next: Next) -> Response {
    let presented = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented != Some(c.config().token.as_str()) {
        return error(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token");
    }
    next.run(req).await
}

async fn health(State(c): State<Arc<Coordinator>>) -> Json<HealthBody> {
    Json(HealthBody {
        testbed_id: c.config().testbed_id.clone(),
        status: c.status(),
    })
}

async fn create_job(State(c): State<Arc<Coordinator>>, Json(job): Json<GradingJob>) -> Response {
    c.purge_expired(std::time::Instant::now());
    let id = job.job_id;
    match c.submit(job) {
        Ok(()) => (StatusCode::ACCEPTED, Json(json!({ "job_id": id }))).into_response(),
        Err(e @ SubmitError::Busy) => error(StatusCode::CONFLICT, "busy", e),
        Err(e @ SubmitError::Duplicate(_)) => error(StatusCode::CONFLICT, "duplicate_job", e),
        Err(e @ SubmitError::ProfileMismatch { .. }) => error(StatusCode::UNPROCESSABLE_ENTITY, "profile_mismatch", e),
    }
}

async fn job_status(State(c): State<Arc<Coordinator>>, Path(id): Path<JobId>) -> Response {
    match c.job_status(id) {
        Some(body) => Json(body).into_response(),
        None => fetch_error(FetchError::NotFound),
    }
}

async fn job_artifacts(State(c): State<Arc<Coordinator>>, Path(id): Path<JobId>) -> Response {
    match c.artifacts(id) {
        Ok(archive) => Json(archive).into_response(),
        Err(e) => fetch_error(e),
    }
}

async fn release_job(State(c): State<Arc<Coordinator>>, Path(id): Path<JobId>) -> Response {
    match c.release(id) {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => fetch_error(e),
    }
}
