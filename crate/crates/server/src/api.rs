//! JSON routes for the exploration loop: generate, rate, list history, score
//! graph, and hyperparameter help.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{any, get, post};
use axum::{Json, Router};
use paramscope_core::error::{ProviderError, SamplingError};
use paramscope_core::remote::RemoteError;
use paramscope_core::store::{InteractionRecord, SessionStore, StoreError, MAX_PAGE_SIZE};
use paramscope_core::{generate_sequence, SamplingParams};
use serde::Serialize;
use serde_json::{json, Map, Value};
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;
use tracing::{error, warn};
use uuid::Uuid;

use crate::descriptions::hyperparameters;
use crate::registry::{Provider, ProviderRegistry};

pub const DEFAULT_MAX_TOKENS: usize = 128;
pub const MAX_TOKENS_LIMIT: usize = 4096;
pub const DEFAULT_PAGE_SIZE: usize = 50;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<dyn SessionStore>,
    pub providers: Arc<ProviderRegistry>,
}

impl AppState {
    pub fn new(store: Arc<dyn SessionStore>, providers: ProviderRegistry) -> Self {
        Self {
            store,
            providers: Arc::new(providers),
        }
    }
}

/// Error response body: `{"error": {"code", "message", "field"?, "range"?}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    field: Option<&'static str>,
    range: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            field: None,
            range: None,
        }
    }

    fn bad_field(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field: Some(field),
            ..Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no interaction with id {id}"),
        )
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = Map::new();
        body.insert("code".into(), self.code.into());
        body.insert("message".into(), self.message.into());
        if let Some(field) = self.field {
            body.insert("field".into(), field.into());
        }
        if let Some(range) = self.range {
            body.insert("range".into(), range.into());
        }
        (self.status, Json(json!({ "error": body }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(err: StoreError) -> Self {
        match err {
            StoreError::NotFound(id) => ApiError::not_found(&id.to_string()),
            StoreError::AlreadyRated(_) => {
                ApiError::new(StatusCode::CONFLICT, "already_rated", err.to_string())
            }
            StoreError::OutOfRange(_) => ApiError {
                range: Some("[1,5]".into()),
                code: "out_of_range",
                ..ApiError::bad_field("score", err.to_string())
            },
            StoreError::InvalidPage(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "bad_pagination", err.to_string())
            }
            StoreError::InvalidRecord(_) => ApiError::internal(err.to_string()),
            StoreError::StorageFull
            | StoreError::SerializationFailure(_)
            | StoreError::Corrupt { .. }
            | StoreError::Io(_) => {
                error!(error = %err, "store write failed");
                ApiError::new(
                    StatusCode::INSUFFICIENT_STORAGE,
                    "storage_failure",
                    err.to_string(),
                )
            }
        }
    }
}

fn provider_failure(provider_id: &str, message: impl std::fmt::Display) -> ApiError {
    warn!(provider = provider_id, %message, "provider failed");
    ApiError::new(
        StatusCode::BAD_GATEWAY,
        "provider_failure",
        format!("provider {provider_id:?} failed: {message}"),
    )
}

/// Builds the router. When `static_dir` is given, files under it are served
/// for any path outside `/api`; otherwise `/` serves a small placeholder page.
pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let app = Router::new()
        .route("/api/generate", post(generate))
        .route("/api/interactions", get(list_interactions))
        .route("/api/interactions/{id}/rating", post(rate))
        .route("/api/interactions/{id}/score-graph", get(score_graph))
        .route("/api/hyperparameters", get(list_hyperparameters))
        .route("/api/{*rest}", any(api_fallback))
        .with_state(state);

    let app = match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(placeholder_index)),
    };
    app.layer(TraceLayer::new_for_http())
}

async fn api_fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "no_route", "no such API route")
}

async fn placeholder_index() -> Html<&'static str> {
    Html(include_str!("../static/index.html"))
}

fn parse_object(body: &[u8]) -> Result<Map<String, Value>, ApiError> {
    match serde_json::from_slice::<Value>(body) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_request",
            "request body must be a JSON object",
        )),
        Err(e) => Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_json",
            e.to_string(),
        )),
    }
}

fn required_f64(body: &Map<String, Value>, field: &'static str) -> Result<f64, ApiError> {
    match body.get(field) {
        Some(v) => v
            .as_f64()
            .ok_or_else(|| ApiError::bad_field(field, format!("{field} must be a number"))),
        None => Err(ApiError::bad_field(field, format!("{field} is required"))),
    }
}

fn optional_u64(body: &Map<String, Value>, field: &'static str) -> Result<Option<u64>, ApiError> {
    match body.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v.as_u64().map(Some).ok_or_else(|| {
            ApiError::bad_field(field, format!("{field} must be a non-negative integer"))
        }),
    }
}

/// Validated form of the `/api/generate` body.
#[derive(Debug)]
pub struct GenerateRequest {
    pub prompt: String,
    pub params: SamplingParams,
    pub provider_id: Option<String>,
    pub max_tokens: usize,
}

impl GenerateRequest {
    /// Parses and validates a request body. An absent seed is drawn from
    /// `fresh_seed`.
    pub fn parse(body: &[u8], fresh_seed: impl FnOnce() -> u64) -> Result<Self, ApiError> {
        let body = parse_object(body)?;
        let prompt = match body.get("prompt") {
            Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
            Some(Value::String(_)) => {
                return Err(ApiError::bad_field("prompt", "prompt must not be empty"))
            }
            Some(_) => return Err(ApiError::bad_field("prompt", "prompt must be a string")),
            None => return Err(ApiError::bad_field("prompt", "prompt is required")),
        };
        let top_p = required_f64(&body, "top_p")?;
        let frequency_penalty = required_f64(&body, "frequency_penalty")?;
        let presence_penalty = required_f64(&body, "presence_penalty")?;
        let seed = optional_u64(&body, "seed")?;
        let max_tokens = match optional_u64(&body, "max_tokens")? {
            None => DEFAULT_MAX_TOKENS,
            Some(n) if (1..=MAX_TOKENS_LIMIT as u64).contains(&n) => n as usize,
            Some(_) => {
                return Err(ApiError {
                    range: Some(format!("[1,{MAX_TOKENS_LIMIT}]")),
                    ..ApiError::bad_field(
                        "max_tokens",
                        format!("max_tokens must be between 1 and {MAX_TOKENS_LIMIT}"),
                    )
                })
            }
        };
        let provider_id = match body.get("provider_id") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                return Err(ApiError::bad_field(
                    "provider_id",
                    "provider_id must be a string",
                ))
            }
        };

        let params = SamplingParams::new(
            top_p,
            frequency_penalty,
            presence_penalty,
            seed.unwrap_or_else(fresh_seed),
        )
        .map_err(|e| ApiError {
            range: Some(e.range.to_string()),
            ..ApiError::bad_field(e.field, e.to_string())
        })?;

        Ok(Self {
            prompt,
            params,
            provider_id,
            max_tokens,
        })
    }
}

#[derive(Serialize)]
struct RecordResponse {
    record: InteractionRecord,
}

async fn generate(State(state): State<AppState>, body: Bytes) -> Result<Json<RecordResponse>, ApiError> {
    let request = GenerateRequest::parse(&body, rand::random)?;
    let (provider_id, provider) = state
        .providers
        .resolve(request.provider_id.as_deref())
        .ok_or_else(|| {
            ApiError::bad_field(
                "provider_id",
                format!(
                    "unknown provider; available: {}",
                    state.providers.ids().collect::<Vec<_>>().join(", ")
                ),
            )
        })?;
    let provider_id = provider_id.to_owned();

    let mut record = match provider.clone() {
        Provider::Local(model) => {
            let prompt = request.prompt.clone();
            let params = request.params;
            let max_tokens = request.max_tokens;
            let generation = tokio::task::spawn_blocking(move || {
                generate_sequence(model.as_ref(), &prompt, &params, max_tokens)
            })
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
            .map_err(|e| match e {
                SamplingError::Provider(ProviderError::EmptyPrompt) => {
                    ApiError::bad_field("prompt", "prompt produced no tokens for this provider")
                }
                other => provider_failure(&provider_id, other),
            })?;
            let mut record = InteractionRecord::new(
                request.prompt,
                request.params,
                generation.text,
                provider_id.clone(),
                true,
            );
            record.rng_algorithm = Some(generation.rng_algorithm.to_owned());
            record
        }
        Provider::Remote(client) => {
            let completion = client
                .complete(&request.prompt, &request.params, request.max_tokens)
                .await
                .map_err(|e: RemoteError| provider_failure(&provider_id, e))?;
            InteractionRecord::new(
                request.prompt,
                request.params,
                completion.text,
                provider_id.clone(),
                false,
            )
        }
    };

    let store = state.store.clone();
    let to_store = record.clone();
    let id = tokio::task::spawn_blocking(move || store.append(to_store))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    record.id = id;
    Ok(Json(RecordResponse { record }))
}

async fn rate(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<RecordResponse>, ApiError> {
    let uuid = Uuid::parse_str(&id).map_err(|_| ApiError::not_found(&id))?;
    let body = parse_object(&body)?;
    let score = match body.get("score") {
        Some(v) => v
            .as_i64()
            .ok_or_else(|| ApiError::bad_field("score", "score must be an integer"))?,
        None => return Err(ApiError::bad_field("score", "score is required")),
    };
    let store = state.store.clone();
    let record = tokio::task::spawn_blocking(move || store.set_rating(uuid, score))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(RecordResponse { record }))
}

#[derive(Serialize)]
struct Page {
    records: Vec<InteractionRecord>,
    limit: usize,
    offset: usize,
}

fn parse_usize(query: &HashMap<String, String>, key: &'static str, default: usize) -> Result<usize, ApiError> {
    match query.get(key) {
        None => Ok(default),
        Some(raw) => raw.parse().map_err(|_| ApiError {
            code: "bad_pagination",
            ..ApiError::bad_field(key, format!("{key} must be a non-negative integer"))
        }),
    }
}

async fn list_interactions(
    State(state): State<AppState>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Json<Page>, ApiError> {
    let limit = parse_usize(&query, "limit", DEFAULT_PAGE_SIZE)?;
    let offset = parse_usize(&query, "offset", 0)?;
    if limit == 0 || limit > MAX_PAGE_SIZE {
        return Err(ApiError {
            code: "bad_pagination",
            range: Some(format!("[1,{MAX_PAGE_SIZE}]")),
            ..ApiError::bad_field("limit", format!("limit must be between 1 and {MAX_PAGE_SIZE}"))
        });
    }
    let records = match query.get("prompt") {
        Some(prompt) => state
            .store
            .query_by_prompt(prompt)?
            .into_iter()
            .skip(offset)
            .take(limit)
            .collect(),
        None => state.store.list_all(limit, offset)?,
    };
    Ok(Json(Page {
        records,
        limit,
        offset,
    }))
}

#[derive(Serialize)]
struct GraphPoint {
    record_id: Uuid,
    presence: f64,
    frequency: f64,
    rating: Option<u8>,
    current: bool,
}

#[derive(Serialize)]
struct ScoreGraph {
    prompt: String,
    points: Vec<GraphPoint>,
}

async fn score_graph(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<ScoreGraph>, ApiError> {
    let uuid = Uuid::parse_str(&id).map_err(|_| ApiError::not_found(&id))?;
    let record = state.store.get(uuid)?.ok_or_else(|| ApiError::not_found(&id))?;
    let points = state
        .store
        .score_graph_points(&record.prompt)?
        .into_iter()
        .map(|p| GraphPoint {
            current: p.record_id == uuid,
            record_id: p.record_id,
            presence: p.presence,
            frequency: p.frequency,
            rating: p.rating,
        })
        .collect();
    Ok(Json(ScoreGraph {
        prompt: record.prompt,
        points,
    }))
}

async fn list_hyperparameters() -> impl IntoResponse {
    Json(hyperparameters())
}
