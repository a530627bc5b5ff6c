//! JSON API over the assessment service.
//!
//! | route | |
//! |---|---|
//! | `GET /v1/runways` | runways with their latest data |
//! | `GET /v1/runways/{id}/assessment?at=&threshold=` | assessment payload |
//! | `POST /v1/whatif` | payload with hypothetical edits |
//! | `GET /v1/model/manifest` | training manifest |
//! | `GET /v1/roc` | ROC points of the last evaluation |
//!
//! Errors are `{code, message, detail, model_versions}` with status 400,
//! 404, 503 (stale data) or 500.

use std::path::Path;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use slipway_core::baselines::ScenarioSet;
use slipway_core::dataset::RawInputs;
use slipway_core::eval::{parse_roc_csv, RocPoint};
use slipway_core::service::{assess, what_if, AssessmentPayload, DataStore, ModelBundle, ModelVersions, Snapshot, TrainingManifest, WhatIfRequest};
use slipway_core::time::{format_timestamp, parse_timestamp};
use slipway_core::{Error, Result};

use crate::config::Config;

#[derive(Clone)]
pub struct AppState {
    pub bundle: Arc<ModelBundle>,
    pub versions: ModelVersions,
    pub scenarios: Arc<ScenarioSet>,
    pub store: Arc<DataStore>,
    pub roc: Option<Arc<Vec<RocPoint>>>,
}

impl AppState {
    pub fn new(bundle: ModelBundle, scenarios: ScenarioSet, store: DataStore, roc: Option<Vec<RocPoint>>) -> Self {
        Self {
            versions: bundle.versions(),
            bundle: Arc::new(bundle),
            scenarios: Arc::new(scenarios),
            store: Arc::new(store),
            roc: roc.map(Arc::new),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub detail: Option<String>,
    pub model_versions: Option<ModelVersions>,
}

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>, detail: Option<String>) -> Self {
        Self { status, body: ErrorBody { code: code.into(), message: message.into(), detail, model_versions: None } }
    }

    fn versioned(mut self, v: &ModelVersions) -> Self {
        self.body.model_versions = Some(v.clone());
        self
    }

    fn from_core(e: Error, versions: &ModelVersions) -> Self {
        let (status, code, message) = match &e {
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found", "resource not found"),
            Error::StaleData(_) => (StatusCode::SERVICE_UNAVAILABLE, "stale_data", "no recent data for the requested time"),
            e if e.is_input_error() => (StatusCode::BAD_REQUEST, "invalid_input", "the request could not be processed"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal error"),
        };
        Self::new(status, code, message, Some(e.to_string())).versioned(versions)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

#[derive(Serialize, Deserialize)]
pub struct RunwayInfo {
    pub id: String,
    pub first_observation: String,
    pub last_observation: String,
    pub last_report: Option<String>,
}

#[derive(Serialize, Deserialize)]
pub struct RunwayList {
    pub runways: Vec<RunwayInfo>,
    pub model_versions: ModelVersions,
}

#[derive(Serialize, Deserialize)]
pub struct ManifestResponse {
    pub manifest: TrainingManifest,
    pub expected_positive_rate: f64,
    pub schema_version: u32,
    pub model_versions: ModelVersions,
}

#[derive(Serialize, Deserialize)]
pub struct RocResponse {
    pub points: Vec<RocPoint>,
    pub model_versions: ModelVersions,
}

#[derive(Debug, Deserialize)]
pub struct AssessmentQuery {
    /// ISO-8601 time; defaults to the runway's latest observation.
    pub at: Option<String>,
    pub threshold: Option<f64>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/runways", get(runways))
        .route("/v1/runways/:id/assessment", get(assessment))
        .route("/v1/whatif", post(whatif))
        .route("/v1/model/manifest", get(manifest))
        .route("/v1/roc", get(roc))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route", None) })
        .with_state(state)
}

async fn runways(State(s): State<AppState>) -> ApiResult<RunwayList> {
    let snap = s.store.snapshot();
    let runways = s
        .bundle
        .manifest
        .runways
        .iter()
        .filter_map(|id| {
            let series = snap.series(id).ok()?;
            Some(RunwayInfo {
                id: id.clone(),
                first_observation: format_timestamp(&series.start()),
                last_observation: format_timestamp(&series.end()),
                last_report: snap.history(id).and_then(|h| h.reports().last()).map(|r| format_timestamp(&r.issued_at)),
            })
        })
        .collect();
    Ok(Json(RunwayList { runways, model_versions: s.versions.clone() }))
}

/// Runs CPU-bound work off the async executor.
async fn blocking<T: Send + 'static>(s: &AppState, f: impl FnOnce() -> Result<T> + Send + 'static) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(Ok(v)) => Ok(Json(v)),
        Ok(Err(e)) => Err(ApiError::from_core(e, &s.versions)),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal error", Some(e.to_string()))
            .versioned(&s.versions)),
    }
}

async fn assessment(
    State(s): State<AppState>,
    UrlPath(id): UrlPath<String>,
    query: std::result::Result<Query<AssessmentQuery>, QueryRejection>,
) -> ApiResult<AssessmentPayload> {
    let Query(q) = query.map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_input", "malformed query string", Some(e.body_text()))
            .versioned(&s.versions)
    })?;
    let snap = s.store.snapshot();
    let at = match &q.at {
        Some(text) => parse_timestamp(text).map_err(|e| ApiError::from_core(e, &s.versions))?,
        None => snap.series(&id).map_err(|e| ApiError::from_core(e, &s.versions))?.end(),
    };
    let state = s.clone();
    blocking(&s, move || assess(&state.bundle, &state.scenarios, &snap, &id, at, q.threshold)).await
}

async fn whatif(State(s): State<AppState>, body: std::result::Result<Json<WhatIfRequest>, JsonRejection>) -> ApiResult<AssessmentPayload> {
    let Json(req) = body.map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_input", "malformed request body", Some(e.body_text())).versioned(&s.versions)
    })?;
    let snap = s.store.snapshot();
    let state = s.clone();
    blocking(&s, move || what_if(&state.bundle, &state.scenarios, &snap, &req)).await
}

async fn manifest(State(s): State<AppState>) -> ApiResult<ManifestResponse> {
    Ok(Json(ManifestResponse {
        manifest: s.bundle.manifest.clone(),
        expected_positive_rate: s.bundle.expected_positive_rate,
        schema_version: s.bundle.schema_version,
        model_versions: s.versions.clone(),
    }))
}

async fn roc(State(s): State<AppState>) -> ApiResult<RocResponse> {
    match &s.roc {
        Some(points) => Ok(Json(RocResponse { points: points.to_vec(), model_versions: s.versions.clone() })),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", "no evaluation loaded", Some("start the server with --roc".into()))
            .versioned(&s.versions)),
    }
}

/// Loads the model, data and ROC file and serves until interrupted.
pub fn serve_blocking(model: &Path, data: &Path, roc: Option<&Path>, config: &Config, addr: &str) -> Result<()> {
    let text = std::fs::read_to_string(model).map_err(|e| Error::invalid(format!("cannot read {}: {e}", model.display())))?;
    let bundle = ModelBundle::from_json(&text)?;
    let raw = RawInputs::read_dir(data)?;
    let store = DataStore::new(Snapshot::new(raw.weather, raw.snowtams));
    let roc = match roc {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::invalid(format!("cannot read {}: {e}", p.display())))?;
            Some(parse_roc_csv(&text)?)
        }
        None => None,
    };
    let app = router(AppState::new(bundle, config.assembly.scenarios.clone(), store, roc));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}
