//! HTTP/JSON adapter over [`App`]. Each handler decodes the request, calls
//! one [`App`] operation on a blocking thread and encodes the result.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::app::{App, JobKind, ThresholdQuery, TrainRequest};
use crate::ServiceError;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}

/// Encodes an operation result: 200 with the JSON value, or the error body
/// with its status.
pub fn encode<T: Serialize>(result: Result<T, ServiceError>) -> Response {
    match result {
        Ok(v) => Json(v).into_response(),
        Err(e) => e.into_response(),
    }
}

fn decode<T: DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return serde_json::from_str("{}").map_err(|e| ServiceError::BadRequest(format!("request body: {e}")));
    }
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("request body: {e}")))
}

fn bearer(headers: &HeaderMap) -> Option<String> {
    let value = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    value.strip_prefix("Bearer ").map(|t| t.trim().to_string())
}

async fn blocking<T, F>(app: Arc<App>, op: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&App) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || op(&app))
        .await
        .unwrap_or_else(|e| Err(ServiceError::Io(std::io::Error::other(e.to_string()))))
}

fn thresholds(q: Result<Query<ThresholdQuery>, QueryRejection>) -> Result<ThresholdQuery, ServiceError> {
    q.map(|Query(q)| q).map_err(|e| ServiceError::BadRequest(e.body_text()))
}

async fn classify(State(app): State<Arc<App>>, body: Bytes) -> Response {
    encode(blocking(app, move |app| app.classify(&decode(&body)?)).await)
}

async fn bulk(State(app): State<Arc<App>>, body: Bytes) -> Response {
    encode(blocking(app, move |app| app.bulk_ingest(decode(&body)?)).await)
}

async fn sources(State(app): State<Arc<App>>) -> Response {
    encode(blocking(app, |app| Ok(app.list_sources())).await)
}

async fn source_alert(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    q: Result<Query<ThresholdQuery>, QueryRejection>,
) -> Response {
    let q = match thresholds(q) {
        Ok(q) => q,
        Err(e) => return e.into_response(),
    };
    encode(blocking(app, move |app| app.source_alert(&id, &q)).await)
}

async fn alerts(State(app): State<Arc<App>>, q: Result<Query<ThresholdQuery>, QueryRejection>) -> Response {
    let q = match thresholds(q) {
        Ok(q) => q,
        Err(e) => return e.into_response(),
    };
    encode(blocking(app, move |app| app.alerts(&q)).await)
}

async fn vote(State(app): State<Arc<App>>, headers: HeaderMap, body: Bytes) -> Response {
    let token = bearer(&headers);
    encode(blocking(app, move |app| app.vote(token.as_deref(), decode(&body)?)).await)
}

async fn next_comment(State(app): State<Arc<App>>, headers: HeaderMap) -> Response {
    let token = bearer(&headers);
    match blocking(app, move |app| app.next_comment(token.as_deref())).await {
        Ok(None) => StatusCode::NO_CONTENT.into_response(),
        other => encode(other),
    }
}

async fn comment_label(State(app): State<Arc<App>>, Path(id): Path<String>) -> Response {
    encode(blocking(app, move |app| app.comment_label(&id)).await)
}

async fn submit(app: Arc<App>, kind: JobKind, body: Bytes) -> Response {
    let result = decode::<TrainRequest>(&body).and_then(|req| app.submit_job(kind, req));
    match result {
        Ok(status) => (StatusCode::ACCEPTED, Json(status)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn train_job(State(app): State<Arc<App>>, body: Bytes) -> Response {
    submit(app, JobKind::FineTune, body).await
}

async fn evaluate_job(State(app): State<Arc<App>>, body: Bytes) -> Response {
    submit(app, JobKind::Evaluate, body).await
}

async fn classify_job(State(app): State<Arc<App>>, body: Bytes) -> Response {
    submit(app, JobKind::BulkClassify, body).await
}

async fn job(State(app): State<Arc<App>>, Path(id): Path<String>) -> Response {
    encode(app.job(&id))
}

async fn latest_metrics(State(app): State<Arc<App>>) -> Response {
    encode(blocking(app, |app| app.latest_metrics()).await)
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/classify", post(classify))
        .route("/comments:bulk", post(bulk))
        .route("/sources", get(sources))
        .route("/sources/{id}/alert", get(source_alert))
        .route("/alerts", get(alerts))
        .route("/votes", post(vote))
        .route("/annotation/next", get(next_comment))
        .route("/comments/{id}/label", get(comment_label))
        .route("/jobs/train", post(train_job))
        .route("/jobs/evaluate", post(evaluate_job))
        .route("/jobs/classify", post(classify_job))
        .route("/jobs/{id}", get(job))
        .route("/metrics/latest", get(latest_metrics))
        .with_state(app)
}

pub async fn serve(app: Arc<App>, listen: &str) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    axum::serve(listener, router(app)).await?;
    Ok(())
}
