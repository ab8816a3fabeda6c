// SPDX-License-Identifier: Apache-2.0

//! JSON-over-HTTP surface.
//!
//! | route | purpose |
//! |---|---|
//! | `GET /v1/apis/{api_id}/params/{param_name}/candidates?field=&k=` | candidate list |
//! | `POST /v1/events` | record one accept/reject event |
//! | `GET /v1/metrics/acceptance?from=&to=&bucket=weekly` | acceptance rate |
//!
//! Errors are `{"error": "<message>"}` with 400, 404 or 409.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::candidates::{Recommender, ServedCandidate};
use crate::config::ServeConfig;
use crate::events::{EventStore, Field, RecommendationEvent};
use crate::metrics::{
    acceptance_by_kind, acceptance_rate, parse_instant, weekly_series, AcceptanceStats, WeekBucket,
    Window,
};
use crate::ServiceError;

pub const DEFAULT_K: usize = 5;

#[derive(Clone)]
pub struct AppState {
    pub recommender: Arc<Recommender>,
    pub events: Arc<EventStore>,
}

impl AppState {
    pub fn new(recommender: Recommender, events: EventStore) -> AppState {
        AppState {
            recommender: Arc::new(recommender),
            events: Arc::new(events),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::Argument(_) | ServiceError::Validation(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Config(_) | ServiceError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route(
            "/v1/apis/{api_id}/params/{param_name}/candidates",
            get(candidates),
        )
        .route("/v1/events", post(record_event))
        .route("/v1/metrics/acceptance", get(acceptance))
        .with_state(state)
}

#[derive(Deserialize)]
struct CandidateQuery {
    field: Option<String>,
    k: Option<String>,
}

#[derive(Serialize)]
struct CandidateList {
    api_id: String,
    param_name: String,
    field: Field,
    candidates: Vec<ServedCandidate>,
}

async fn candidates(
    State(state): State<AppState>,
    Path((api_id, param_name)): Path<(String, String)>,
    Query(q): Query<CandidateQuery>,
) -> Result<Json<CandidateList>, ServiceError> {
    let field: Field = q.field.as_deref().unwrap_or("description").parse()?;
    let k = match q.k.as_deref() {
        None => DEFAULT_K,
        Some(s) => s.parse().map_err(|_| {
            ServiceError::Argument(format!("k must be a positive integer, got `{s}`"))
        })?,
    };
    let list = state
        .recommender
        .get_candidates(&api_id, &param_name, field, k)?;
    let resolved = state
        .recommender
        .corpus()
        .resolve(&api_id)
        .map_or(api_id, |s| s.api_id.clone());
    Ok(Json(CandidateList {
        api_id: resolved,
        param_name,
        field,
        candidates: list,
    }))
}

async fn record_event(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<Response, ServiceError> {
    let event: RecommendationEvent =
        serde_json::from_slice(&body).map_err(|e| ServiceError::Validation(e.to_string()))?;
    let events = state.events.clone();
    let outcome = tokio::task::spawn_blocking(move || events.record(event))
        .await
        .map_err(|e| ServiceError::Io(e.to_string()))??;
    let status = if outcome.duplicate {
        StatusCode::OK
    } else {
        StatusCode::CREATED
    };
    Ok((status, Json(outcome)).into_response())
}

#[derive(Deserialize)]
struct MetricsQuery {
    from: Option<String>,
    to: Option<String>,
    bucket: Option<String>,
}

#[derive(Serialize)]
struct MetricsReport {
    from: Option<String>,
    to: Option<String>,
    #[serde(flatten)]
    overall: AcceptanceStats,
    by_kind: std::collections::BTreeMap<String, AcceptanceStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    buckets: Option<Vec<WeekBucket>>,
}

async fn acceptance(
    State(state): State<AppState>,
    Query(q): Query<MetricsQuery>,
) -> Result<Json<MetricsReport>, ServiceError> {
    let from = q.from.as_deref().map(parse_instant).transpose()?;
    let to = q.to.as_deref().map(parse_instant).transpose()?;
    let window = Window::new(from, to)?;
    let weekly = match q.bucket.as_deref() {
        None | Some("") => false,
        Some("weekly") => true,
        Some(other) => {
            return Err(ServiceError::Argument(format!(
                "unsupported bucket `{other}`"
            )))
        }
    };
    let events = state.events.events();
    Ok(Json(MetricsReport {
        from: from.map(|t| t.to_rfc3339()),
        to: to.map(|t| t.to_rfc3339()),
        overall: acceptance_rate(&events, &window),
        by_kind: acceptance_by_kind(&events, &window),
        buckets: weekly.then(|| weekly_series(&events, &window)),
    }))
}

/// Loads every artifact named in `config`, binds and serves until Ctrl-C.
pub async fn serve(config: &ServeConfig) -> Result<(), ServiceError> {
    let recommender = config.recommender()?;
    let events = EventStore::open(&config.events)?;
    let app = router(AppState::new(recommender, events));
    let listener = tokio::net::TcpListener::bind(&config.listen)
        .await
        .map_err(|e| ServiceError::Io(format!("{}: {e}", config.listen)))?;
    let addr = listener
        .local_addr()
        .map_err(|e| ServiceError::Io(e.to_string()))?;
    eprintln!("listening on {addr}");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::Io(e.to_string()))
}

/// [`serve`] on a fresh multi-threaded runtime, for synchronous callers.
pub fn serve_blocking(config: &ServeConfig) -> Result<(), ServiceError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| ServiceError::Io(e.to_string()))?
        .block_on(serve(config))
}
