//! Read-only HTTP API over a completed run.
//!
//! | route                     | body                                  |
//! |---------------------------|---------------------------------------|
//! | `GET /risks`              | risk records                          |
//! | `GET /risks/{id}`         | record and decomposition              |
//! | `GET /risks/{id}/matches` | ranked report rows                    |
//! | `GET /graph?format=`      | graph export, `json` (default) or `dot` |
//! | `GET /healthz`            | status and config digest              |

use std::collections::HashMap;
use std::future::Future;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::PipelineConfig;
use super::run::{Pipeline, PipelineError};
use super::store::{self, RecordStore, StoreError};
use crate::extraction::{RiskDecomposition, RiskRecord};
use crate::matcher::{report_rows, MatchReport, ReportRow};

/// Everything the API serves, loaded once from the store.
#[derive(Debug, Clone)]
pub struct ServeState {
    risks: Vec<RiskRecord>,
    decompositions: HashMap<String, RiskDecomposition>,
    matches: HashMap<String, Vec<ReportRow>>,
    match_errors: HashMap<String, String>,
    graph_json: String,
    graph_dot: String,
    config_digest: String,
}

impl ServeState {
    pub fn load(store: &RecordStore, config_digest: &str) -> Result<Self, PipelineError> {
        if store.read(store::SUMMARY)?.is_none() {
            return Err(PipelineError::Data(format!("no completed run in {}", store.root().display())));
        }
        let text = |file: &str| -> Result<String, PipelineError> {
            let bytes = store.read(file)?.ok_or_else(|| StoreError::Corrupt { file: file.to_string() })?;
            Ok(String::from_utf8_lossy(&bytes).into_owned())
        };
        let report = MatchReport { risks: store.matches()? };
        let news = store.news()?;
        let mut matches: HashMap<String, Vec<ReportRow>> = HashMap::new();
        for row in report_rows(&report, &news) {
            matches.entry(row.risk_id.0.clone()).or_default().push(row);
        }
        Ok(ServeState {
            risks: store.risks()?,
            decompositions: store.decompositions()?.into_iter().map(|d| (d.risk_id.0.clone(), d)).collect(),
            matches,
            match_errors: report.risks.into_iter().filter_map(|r| Some((r.risk_id.0, r.error?))).collect(),
            graph_json: text(store::GRAPH_JSON)?,
            graph_dot: text(store::GRAPH_DOT)?,
            config_digest: config_digest.to_string(),
        })
    }
}

type Shared = Arc<RwLock<Arc<ServeState>>>;

fn snapshot(state: &Shared) -> Arc<ServeState> {
    state.read().expect("state poisoned").clone()
}

fn not_found(what: String) -> Response {
    (StatusCode::NOT_FOUND, Json(json!({ "error": what }))).into_response()
}

#[derive(Serialize)]
struct RiskView<'a> {
    record: &'a RiskRecord,
    decomposition: Option<&'a RiskDecomposition>,
}

async fn list_risks(State(state): State<Shared>) -> Response {
    Json(snapshot(&state).risks.clone()).into_response()
}

async fn get_risk(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> Response {
    let s = snapshot(&state);
    match s.risks.iter().find(|r| r.id.0 == id) {
        Some(record) => Json(RiskView { record, decomposition: s.decompositions.get(&id) }).into_response(),
        None => not_found(format!("unknown risk {id}")),
    }
}

async fn get_matches(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> Response {
    let s = snapshot(&state);
    if !s.risks.iter().any(|r| r.id.0 == id) {
        return not_found(format!("unknown risk {id}"));
    }
    if let Some(e) = s.match_errors.get(&id) {
        return Json(json!({ "risk_id": id, "results": [], "error": e })).into_response();
    }
    let rows = s.matches.get(&id).cloned().unwrap_or_default();
    Json(json!({ "risk_id": id, "results": rows })).into_response()
}

#[derive(Deserialize)]
struct GraphQuery {
    format: Option<String>,
}

async fn get_graph(State(state): State<Shared>, Query(q): Query<GraphQuery>) -> Response {
    let s = snapshot(&state);
    match q.format.as_deref().unwrap_or("json") {
        "json" => ([(header::CONTENT_TYPE, "application/json")], s.graph_json.clone()).into_response(),
        "dot" => ([(header::CONTENT_TYPE, "text/vnd.graphviz")], s.graph_dot.clone()).into_response(),
        other => (StatusCode::BAD_REQUEST, Json(json!({ "error": format!("unknown format {other:?}") })))
            .into_response(),
    }
}

async fn healthz(State(state): State<Shared>) -> Response {
    let s = snapshot(&state);
    Json(json!({ "status": "ok", "config_digest": s.config_digest, "risks": s.risks.len() })).into_response()
}

pub fn router(state: Arc<RwLock<Arc<ServeState>>>) -> Router {
    Router::new()
        .route("/risks", get(list_risks))
        .route("/risks/{id}", get(get_risk))
        .route("/risks/{id}/matches", get(get_matches))
        .route("/graph", get(get_graph))
        .route("/healthz", get(healthz))
        .with_state(state)
}

fn refresh(config: &PipelineConfig) -> Result<ServeState, PipelineError> {
    let mut pipeline = Pipeline::open(config.clone())?;
    let sources = config.sources.clone();
    pipeline.fetch_news(&sources)?;
    pipeline.match_news(&config.matching)?;
    ServeState::load(pipeline.store(), config.digest())
}

/// Serve on `listener` until `shutdown` resolves. With a poll interval the
/// configured sources are re-fetched and matched on that period and the
/// served snapshot is swapped after each successful poll.
pub async fn serve_on(
    config: PipelineConfig,
    listener: tokio::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), PipelineError> {
    let store = RecordStore::open_existing(&config.store_dir())?;
    let state: Shared = Arc::new(RwLock::new(Arc::new(ServeState::load(&store, config.digest())?)));
    drop(store);

    let poller = config.serve.poll_interval_secs.filter(|s| *s > 0).map(|secs| {
        let state = state.clone();
        let config = config.clone();
        tokio::spawn(async move {
            let mut ticker = tokio::time::interval(Duration::from_secs(secs));
            ticker.tick().await;
            loop {
                ticker.tick().await;
                let config = config.clone();
                match tokio::task::spawn_blocking(move || refresh(&config)).await {
                    Ok(Ok(fresh)) => *state.write().expect("state poisoned") = Arc::new(fresh),
                    Ok(Err(e)) => log::warn!("poll failed: {e}"),
                    Err(e) => log::warn!("poll task failed: {e}"),
                }
            }
        })
    });

    let result = axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| PipelineError::Data(format!("server: {e}")));
    if let Some(p) = poller {
        p.abort();
    }
    result
}

/// Bind `addr` and serve until Ctrl-C.
pub fn serve(config: PipelineConfig, addr: &str) -> Result<(), PipelineError> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| PipelineError::Data(format!("runtime: {e}")))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| PipelineError::Usage(format!("cannot bind {addr}: {e}")))?;
        log::info!("serving on {}", listener.local_addr().map(|a| a.to_string()).unwrap_or_default());
        serve_on(config, listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })
}
