//! JSON prediction service over a directory of model bundles.
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | GET | `/api/models` | | list of loaded models with metadata |
//! | GET | `/api/schema` | `?model=<name>` (optional) | feature names, kinds, training ranges, vocabularies |
//! | GET | `/api/importance/{model}` | | forest importances or linear coefficients |
//! | POST | `/api/predict` | `{"model": "...", "features": {...}}` | `{"prediction": .., "model": .., "warnings": [..]}` |
//!
//! Errors are `{"error": {"code": "...", "message": "..."}}`. Anything else is
//! served from the optional static asset directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mofml_core::artifacts::{
    load_bundle, predict, FeatureValue, ImportanceReport, ModelBundle, PredictError,
    PredictionWarning, BUNDLE_EXTENSION,
};
use mofml_core::evaluate::Metrics;
use mofml_core::ingest::FeatureKind;
use serde::{Deserialize, Serialize};

/// Loaded bundles keyed by model name; immutable once the service starts.
#[derive(Clone)]
pub struct AppState {
    bundles: Arc<BTreeMap<String, ModelBundle>>,
}

impl AppState {
    pub fn new(bundles: Vec<ModelBundle>) -> Self {
        let map = bundles
            .into_iter()
            .map(|b| (b.model_name.clone(), b))
            .collect();
        AppState {
            bundles: Arc::new(map),
        }
    }

    pub fn len(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }

    fn get(&self, model: &str) -> Result<&ModelBundle, ApiError> {
        self.bundles
            .get(model)
            .ok_or_else(|| ApiError::unknown_model(model))
    }
}

/// Loads every `*.mofml.json` file in `dir`, skipping unreadable ones with a warning.
pub fn load_bundle_dir(dir: &Path) -> anyhow::Result<Vec<ModelBundle>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| anyhow::anyhow!("cannot read bundle directory {}: {e}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(BUNDLE_EXTENSION))
        })
        .collect();
    paths.sort();
    let mut bundles = Vec::new();
    for path in paths {
        match load_bundle(&path) {
            Ok(b) => bundles.push(b),
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    if bundles.is_empty() {
        anyhow::bail!(
            "no loadable {BUNDLE_EXTENSION} bundles in {}",
            dir.display()
        );
    }
    Ok(bundles)
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    code: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    features: Option<Vec<String>>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code,
                message: message.into(),
                features: None,
            },
        }
    }

    fn unknown_model(model: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "unknown_model",
            format!("no model named {model:?}"),
        )
    }

    fn internal(detail: impl std::fmt::Display) -> Self {
        log::error!("internal error: {detail}");
        Self::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal_error",
            "internal server error",
        )
    }
}

impl From<PredictError> for ApiError {
    fn from(e: PredictError) -> Self {
        match e {
            PredictError::NonFinitePrediction => ApiError::internal(e),
            PredictError::MissingFeature { ref features } => {
                let mut err = ApiError::new(StatusCode::BAD_REQUEST, e.code(), e.to_string());
                err.body.features = Some(features.clone());
                err
            }
            other => ApiError::new(StatusCode::BAD_REQUEST, other.code(), other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.body }))).into_response()
    }
}

#[derive(Debug, Serialize)]
struct ModelSummary {
    name: String,
    kind: &'static str,
    target: String,
    n_features: usize,
    uses_pca: bool,
    seed: u64,
    created_at: Option<String>,
    dataset_fingerprint: String,
    hyperparameters: String,
    test_metrics: Option<Metrics>,
}

async fn list_models(State(state): State<AppState>) -> Json<Vec<ModelSummary>> {
    let models = state
        .bundles
        .values()
        .map(|b| ModelSummary {
            name: b.model_name.clone(),
            kind: b.kind.as_str(),
            target: b.metadata.target_name.clone(),
            n_features: b.n_features(),
            uses_pca: b.pca.is_some(),
            seed: b.metadata.seed,
            created_at: b.metadata.created_at.clone(),
            dataset_fingerprint: b.metadata.dataset_fingerprint.clone(),
            hyperparameters: b.metadata.hyperparameters.clone(),
            test_metrics: b.metadata.test_metrics,
        })
        .collect();
    Json(models)
}

#[derive(Debug, Serialize)]
struct FeatureDescription {
    name: String,
    kind: FeatureKind,
    min: f64,
    max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    categories: Option<Vec<String>>,
}

#[derive(Debug, Serialize)]
struct SchemaResponse {
    model: String,
    target: String,
    name_column: Option<String>,
    features: Vec<FeatureDescription>,
}

#[derive(Debug, Deserialize)]
struct SchemaQuery {
    model: Option<String>,
}

async fn schema(
    State(state): State<AppState>,
    query: Result<Query<SchemaQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Json<SchemaResponse>, ApiError> {
    let Query(query) = query
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_request", e.body_text()))?;
    let bundle = match &query.model {
        Some(m) => state.get(m)?,
        None => state
            .bundles
            .values()
            .next()
            .ok_or_else(|| ApiError::internal("no bundles loaded"))?,
    };
    let features = bundle
        .features
        .iter()
        .map(|f| FeatureDescription {
            name: f.name.clone(),
            kind: f.kind,
            min: f.min,
            max: f.max,
            categories: bundle.codebook(&f.name).map(|c| c.categories.clone()),
        })
        .collect();
    Ok(Json(SchemaResponse {
        model: bundle.model_name.clone(),
        target: bundle.metadata.target_name.clone(),
        name_column: bundle.name_column.clone(),
        features,
    }))
}

async fn importance(
    State(state): State<AppState>,
    UrlPath(model): UrlPath<String>,
) -> Result<Json<ImportanceReport>, ApiError> {
    let bundle = state.get(&model)?;
    bundle.importance().map(Json).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "importance_unavailable",
            format!("model {model:?} has no per-feature importances"),
        )
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    pub model: String,
    pub features: BTreeMap<String, FeatureValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub prediction: f64,
    pub model: String,
    pub warnings: Vec<PredictionWarning>,
}

/// Shared by the service and the `predict` command so both give identical answers.
pub fn predict_with(
    bundle: &ModelBundle,
    features: &BTreeMap<String, FeatureValue>,
) -> Result<PredictResponse, PredictError> {
    let p = predict(bundle, features)?;
    Ok(PredictResponse {
        prediction: p.value,
        model: bundle.model_name.clone(),
        warnings: p.warnings,
    })
}

async fn predict_handler(
    State(state): State<AppState>,
    body: Result<Json<PredictRequest>, JsonRejection>,
) -> Result<Json<PredictResponse>, ApiError> {
    let Json(request) = body
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_request", e.body_text()))?;
    let bundle = state.get(&request.model)?;
    Ok(Json(predict_with(bundle, &request.features)?))
}

async fn api_not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/models", get(list_models))
        .route("/api/schema", get(schema))
        .route("/api/importance/{model}", get(importance))
        .route("/api/predict", post(predict_handler))
        .route("/api/{*rest}", get(api_not_found).post(api_not_found))
        .with_state(state);
    match static_dir {
        Some(dir) => {
            let root = Arc::new(dir.to_path_buf());
            api.fallback(move |uri: axum::http::Uri| serve_static(root.clone(), uri))
        }
        None => api,
    }
}

/// Resolves a request path under `root`, rejecting any `..` or absolute components.
fn static_path(root: &Path, request_path: &str) -> Option<PathBuf> {
    let mut path = root.to_path_buf();
    for part in request_path.split('/').filter(|p| !p.is_empty()) {
        if part == "." || part == ".." || part.contains('\\') {
            return None;
        }
        path.push(part);
    }
    if request_path.is_empty() || request_path.ends_with('/') {
        path.push("index.html");
    }
    Some(path)
}

async fn serve_static(root: Arc<PathBuf>, uri: axum::http::Uri) -> Response {
    let Some(mut path) = static_path(&root, uri.path()) else {
        return StatusCode::NOT_FOUND.into_response();
    };
    if tokio::fs::metadata(&path)
        .await
        .map(|m| m.is_dir())
        .unwrap_or(false)
    {
        path.push("index.html");
    }
    match tokio::fs::read(&path).await {
        Ok(bytes) => {
            let mime = mime_guess::from_path(&path).first_or_octet_stream();
            (
                [(axum::http::header::CONTENT_TYPE, mime.to_string())],
                bytes,
            )
                .into_response()
        }
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

/// Runs until interrupted (Ctrl-C).
pub async fn serve(
    state: AppState,
    addr: std::net::SocketAddr,
    static_dir: Option<PathBuf>,
) -> anyhow::Result<()> {
    let app = router(state, static_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
