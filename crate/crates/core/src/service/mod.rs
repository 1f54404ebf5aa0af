//! HTTP JSON API over the engine, plus the headless CLI in [`cli`].
//!
//! Datasets and fitted models are cached by id for the lifetime of the
//! server; every computation on them is pure, so handlers only hold the
//! catalog locks long enough to clone an `Arc`.

pub mod cli;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::chart::{compose_check, ChartSpec, CheckLayout};
use crate::dataset::{
    load_csv_with, ColumnKind, Dataset, Filter, LoadOptions, PipelineStep, Transform, Value,
    DEFAULT_DISCRETE_THRESHOLD,
};
use crate::error::{Error, ErrorCode};
use crate::family::FamilyKind;
use crate::fit::{fit_model, FittedModel};
use crate::formula::{describe_model, ModelSpec};
use crate::predict::{assemble_check, residuals, PredictiveTable, DEFAULT_DRAWS};

/// Error body shared by HTTP responses and CLI stderr.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    pub detail: serde_json::Value,
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self.code {
            ErrorCode::ParseError | ErrorCode::UnknownVariable | ErrorCode::Unsupported => {
                StatusCode::BAD_REQUEST
            }
            ErrorCode::DomainError | ErrorCode::FitNotConverged => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError {
            code: e.code(),
            message: e.to_string(),
            detail: e.detail(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<Value>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    pub n_missing: usize,
}

/// Column names, kinds, and levels or numeric range.
pub fn schema(d: &Dataset) -> Vec<ColumnSchema> {
    d.columns()
        .iter()
        .map(|c| {
            let n_missing = (0..c.len()).filter(|&r| c.data.is_missing(r)).count();
            let range = if c.ty.is_discrete() {
                None
            } else {
                c.numeric().and_then(|v| {
                    let mut it = v.iter().flatten().copied();
                    let first = it.next()?;
                    Some(it.fold([first, first], |[lo, hi], x| [lo.min(x), hi.max(x)]))
                })
            };
            ColumnSchema {
                name: c.name.clone(),
                kind: c.ty.kind(),
                levels: c.ty.is_discrete().then(|| c.ty.levels().to_vec()),
                range,
                n_missing,
            }
        })
        .collect()
}

struct StoredModel {
    dataset: String,
    model: Arc<FittedModel>,
}

/// Catalog of datasets and fitted models for one server.
pub struct SessionState {
    datasets: RwLock<HashMap<String, Arc<Dataset>>>,
    models: RwLock<HashMap<String, StoredModel>>,
    next_id: AtomicU64,
    /// Seed used when a sampling request names none.
    pub base_seed: u64,
}

impl Default for SessionState {
    fn default() -> Self {
        SessionState::new(0)
    }
}

impl SessionState {
    pub fn new(base_seed: u64) -> Self {
        SessionState {
            datasets: RwLock::new(HashMap::new()),
            models: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            base_seed,
        }
    }

    fn fresh_id(&self, prefix: &str) -> String {
        format!("{prefix}{}", self.next_id.fetch_add(1, Ordering::Relaxed))
    }

    pub fn insert_dataset(&self, d: Dataset) -> String {
        let id = self.fresh_id("d");
        self.insert_dataset_as(id.clone(), d);
        id
    }

    pub fn insert_dataset_as(&self, id: String, d: Dataset) {
        self.datasets.write().expect("catalog lock").insert(id, Arc::new(d));
    }

    pub fn dataset(&self, id: &str) -> Result<Arc<Dataset>, Error> {
        self.datasets
            .read()
            .expect("catalog lock")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::NotFound {
                kind: "dataset",
                id: id.to_string(),
            })
    }

    fn insert_model(&self, dataset: &str, m: FittedModel) -> String {
        let id = self.fresh_id("m");
        self.models.write().expect("catalog lock").insert(
            id.clone(),
            StoredModel {
                dataset: dataset.to_string(),
                model: Arc::new(m),
            },
        );
        id
    }

    /// The model and the id of the dataset it was fit on.
    pub fn model(&self, id: &str) -> Result<(String, Arc<FittedModel>), Error> {
        self.models
            .read()
            .expect("catalog lock")
            .get(id)
            .map(|s| (s.dataset.clone(), s.model.clone()))
            .ok_or_else(|| Error::NotFound {
                kind: "model",
                id: id.to_string(),
            })
    }
}

pub type SharedState = Arc<SessionState>;

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/datasets", post(upload_dataset))
        .route("/datasets/{id}", get(get_dataset))
        .route("/datasets/{id}/pipeline", post(apply_pipeline))
        .route("/fit", post(fit))
        .route("/models/{id}/draws", get(draws))
        .route("/models/{id}/residuals", get(model_residuals))
        .route("/check", post(check))
        .with_state(state)
}

async fn blocking<T, F>(f: F) -> std::result::Result<T, ApiError>
where
    F: FnOnce() -> std::result::Result<T, Error> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::from(Error::Internal(e.to_string())))?
        .map_err(ApiError::from)
}

#[derive(Debug, Serialize)]
pub struct DatasetResponse {
    pub id: String,
    pub name: String,
    pub n_rows: usize,
    pub pipeline: Vec<PipelineStep>,
    pub schema: Vec<ColumnSchema>,
}

fn dataset_response(id: String, d: &Dataset) -> DatasetResponse {
    DatasetResponse {
        id,
        name: d.name().to_string(),
        n_rows: d.n_rows(),
        pipeline: d.pipeline().to_vec(),
        schema: schema(d),
    }
}

#[derive(Debug, Deserialize)]
struct UploadQuery {
    name: Option<String>,
    discrete_threshold: Option<usize>,
}

async fn upload_dataset(
    State(state): State<SharedState>,
    Query(q): Query<UploadQuery>,
    body: String,
) -> ApiResult<DatasetResponse> {
    let opts = LoadOptions {
        discrete_threshold: q.discrete_threshold.unwrap_or(DEFAULT_DISCRETE_THRESHOLD),
    };
    let name = q.name.unwrap_or_else(|| "upload".into());
    // An upload that yields no table is a malformed request, not a domain error.
    let d = load_csv_with(body.as_bytes(), &name, opts).map_err(|e| match e {
        Error::EmptyDataset => Error::Csv {
            row: 0,
            message: "empty dataset".into(),
        },
        other => other,
    })?;
    let id = state.insert_dataset(d.clone());
    Ok(Json(dataset_response(id, &d)))
}

async fn get_dataset(
    State(state): State<SharedState>,
    Path(id): Path<String>,
) -> ApiResult<DatasetResponse> {
    let d = state.dataset(&id)?;
    Ok(Json(dataset_response(id, &d)))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineRequest {
    pub filters: Vec<Filter>,
    pub transforms: Vec<Transform>,
}

async fn apply_pipeline(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    Json(req): Json<PipelineRequest>,
) -> ApiResult<DatasetResponse> {
    let d = state.dataset(&id)?;
    let out = d.apply_pipeline(&req.filters, &req.transforms)?;
    let new_id = state.insert_dataset(out.clone());
    Ok(Json(dataset_response(new_id, &out)))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRequest {
    pub dataset: String,
    pub family: FamilyKind,
    pub location: String,
    #[serde(default)]
    pub scale: Option<String>,
    #[serde(default)]
    pub label: Option<String>,
}

/// Fit summary for the UI; coefficients and standard errors are deliberately absent.
#[derive(Debug, Serialize)]
pub struct FitResponse {
    pub model_id: String,
    pub label: String,
    pub converged: bool,
    pub diagnostic: Option<String>,
    pub description: Vec<String>,
    pub iterations: usize,
    pub n_obs: usize,
    pub n_dropped: usize,
}

async fn fit(State(state): State<SharedState>, Json(req): Json<FitRequest>) -> ApiResult<FitResponse> {
    let d = state.dataset(&req.dataset)?;
    let label = req
        .label
        .clone()
        .unwrap_or_else(|| req.location.trim().to_string());
    let spec = ModelSpec::parse(req.family, &req.location, req.scale.as_deref(), label)?;
    let description = describe_model(&spec);
    let m = blocking(move || fit_model(&d, &spec)).await?;
    let resp = FitResponse {
        model_id: String::new(),
        label: m.spec.label.clone(),
        converged: m.converged,
        diagnostic: m.diagnostic.clone(),
        description,
        iterations: m.iterations,
        n_obs: m.n_obs,
        n_dropped: m.n_dropped,
    };
    let model_id = state.insert_model(&req.dataset, m);
    Ok(Json(FitResponse { model_id, ..resp }))
}

#[derive(Debug, Deserialize)]
struct DrawsQuery {
    n: Option<usize>,
    seed: Option<u64>,
}

async fn draws(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    Query(q): Query<DrawsQuery>,
) -> std::result::Result<Response, ApiError> {
    let (dataset, m) = state.model(&id)?;
    let d = state.dataset(&dataset)?;
    let n = q.n.unwrap_or(DEFAULT_DRAWS);
    let seed = q.seed.unwrap_or(state.base_seed);
    let table = blocking(move || {
        if !m.converged {
            return Err(Error::NotConverged);
        }
        assemble_check(&d, std::slice::from_ref(&m), n, seed)
    })
    .await?;
    json_response(&table)
}

#[derive(Debug, Serialize)]
pub struct ResidualResponse {
    pub model_id: String,
    pub rows: Vec<usize>,
    pub residuals: Vec<f64>,
}

async fn model_residuals(
    State(state): State<SharedState>,
    Path(id): Path<String>,
) -> ApiResult<ResidualResponse> {
    let (dataset, m) = state.model(&id)?;
    let d = state.dataset(&dataset)?;
    let r = residuals(&m, &d)?;
    Ok(Json(ResidualResponse {
        model_id: id,
        rows: r.rows,
        residuals: r.residuals,
    }))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRequest {
    pub dataset: String,
    pub chart: ChartSpec,
    #[serde(default)]
    pub models: Vec<String>,
    #[serde(default)]
    pub n_draws: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Layout plus the predictive table its panels reference.
#[derive(Debug, Serialize)]
pub struct CheckResponse {
    pub layout: CheckLayout,
    pub predictions: PredictiveTable,
}

/// Assembles and lays out a check; shared by the HTTP handler and the CLI.
pub fn run_check(
    d: &Dataset,
    models: &[FittedModel],
    chart: &ChartSpec,
    n_draws: usize,
    seed: u64,
) -> Result<CheckResponse, Error> {
    let table = assemble_check(d, models, n_draws, seed)?;
    let layout = compose_check(chart, &table)?;
    Ok(CheckResponse {
        layout,
        predictions: table,
    })
}

async fn check(
    State(state): State<SharedState>,
    Json(req): Json<CheckRequest>,
) -> std::result::Result<Response, ApiError> {
    let d = state.dataset(&req.dataset)?;
    let mut models = Vec::with_capacity(req.models.len());
    for id in &req.models {
        let (dataset, m) = state.model(id)?;
        if dataset != req.dataset {
            return Err(Error::Mismatch(format!(
                "model `{id}` was fit on dataset `{dataset}`, not `{}`",
                req.dataset
            ))
            .into());
        }
        models.push((*m).clone());
    }
    let n = req.n_draws.unwrap_or(DEFAULT_DRAWS);
    let seed = req.seed.unwrap_or(state.base_seed);
    let chart = req.chart.clone();
    let resp = blocking(move || run_check(&d, &models, &chart, n, seed)).await?;
    json_response(&resp)
}

fn json_response<T: Serialize>(value: &T) -> std::result::Result<Response, ApiError> {
    let body = serde_json::to_vec(value).map_err(|e| ApiError::from(Error::Internal(e.to_string())))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}
