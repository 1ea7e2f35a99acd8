//! JSON over HTTP: run queries (optionally streaming confirmed results as
//! newline-delimited JSON), stop the running query early, and inspect index
//! and inference state.
//!
//! | route | |
//! |---|---|
//! | `POST /query` | body is a query spec plus `"stream": bool` |
//! | `POST /stop` | 404 when nothing runs |
//! | `GET /index-status` | the index catalog |
//! | `GET /layers` | width, depth and index state per layer |
//! | `GET /ledger` | inference counters |

use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::mpsc;
use tower_http::cors::CorsLayer;

use crate::error::{EverestError, Result};
use crate::iqa::ActivationCache;
use crate::nta::{QuerySpec, ResultEntry, RoundEvent};
use crate::source::{ActivationSource, LayerId};
use crate::storage::{IndexCatalog, IndexManager, IndexState};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub index_dir: PathBuf,
    pub budget_bytes: u64,
    pub iqa_budget_bytes: u64,
    pub batch_size: usize,
}

pub struct Session {
    source: Arc<dyn ActivationSource>,
    manager: Mutex<IndexManager>,
    cache: Mutex<ActivationCache>,
    /// Copy of the catalog as of the last finished query; readable while a
    /// query holds the manager.
    catalog: Mutex<IndexCatalog>,
    running: Mutex<Option<Arc<AtomicBool>>>,
}

impl Session {
    pub fn new(source: Arc<dyn ActivationSource>, config: &ServiceConfig) -> Result<Self> {
        let manager = IndexManager::open(&config.index_dir, config.budget_bytes, &*source, config.batch_size)?;
        Ok(Self {
            catalog: Mutex::new(manager.catalog().clone()),
            manager: Mutex::new(manager),
            cache: Mutex::new(ActivationCache::new(config.iqa_budget_bytes)),
            running: Mutex::new(None),
            source,
        })
    }
}

#[derive(Deserialize)]
struct QueryRequest {
    #[serde(flatten)]
    spec: QuerySpec,
    #[serde(default)]
    stream: bool,
}

/// One streamed line per round.
#[derive(Serialize)]
struct Partial<'a> {
    round: usize,
    partial: &'a [ResultEntry],
    threshold: Option<f64>,
    theta: Option<f64>,
}

/// Clears the running slot however the worker exits.
struct Running(Arc<Session>);

impl Drop for Running {
    fn drop(&mut self) {
        *self.0.running.lock().unwrap_or_else(|e| e.into_inner()) = None;
    }
}

fn status_of(e: &EverestError) -> StatusCode {
    match e {
        EverestError::InvalidQuery(_) | EverestError::LayerOutOfRange { .. } | EverestError::IndexOutOfRange { .. } => {
            StatusCode::BAD_REQUEST
        }
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn error(status: StatusCode, message: impl std::fmt::Display) -> Response {
    (status, Json(json!({ "error": message.to_string() }))).into_response()
}

pub fn router(session: Arc<Session>) -> Router {
    Router::new()
        .route("/query", post(query))
        .route("/stop", post(stop))
        .route("/index-status", get(index_status))
        .route("/layers", get(layers))
        .route("/ledger", get(ledger))
        .layer(CorsLayer::permissive())
        .with_state(session)
}

pub async fn serve(session: Arc<Session>, addr: SocketAddr) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(session)).await?;
    Ok(())
}

async fn query(State(session): State<Arc<Session>>, body: Bytes) -> Response {
    let req: QueryRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let spec = req.spec;
    let checked = session
        .source
        .layer_width(spec.layer)
        .and_then(|w| spec.validate(session.source.n_inputs(), w));
    if let Err(e) = checked {
        return error(status_of(&e), e);
    }
    let stop = Arc::new(AtomicBool::new(false));
    {
        let mut running = session.running.lock().unwrap_or_else(|e| e.into_inner());
        if running.is_some() {
            return error(StatusCode::CONFLICT, "a query is already running");
        }
        *running = Some(stop.clone());
    }
    let stream = req.stream;
    let (tx, mut rx) = mpsc::channel::<String>(16);
    let worker = tokio::task::spawn_blocking(move || {
        let _running = Running(session.clone());
        let mut manager = session.manager.lock().unwrap_or_else(|e| e.into_inner());
        let mut cache = session.cache.lock().unwrap_or_else(|e| e.into_inner());
        let mut observe = |e: &RoundEvent| {
            if stream {
                let line = serde_json::to_string(&Partial {
                    round: e.round,
                    partial: &e.confirmed,
                    threshold: e.threshold.is_finite().then_some(e.threshold),
                    theta: e.theta,
                })
                .expect("plain data");
                // a vanished client just stops receiving
                let _ = tx.blocking_send(line);
            }
        };
        let out = manager.query(
            &spec,
            &*session.source,
            Some(&mut cache),
            Some(&stop),
            Some(&mut observe),
        );
        *session.catalog.lock().unwrap_or_else(|e| e.into_inner()) = manager.catalog().clone();
        let out = out.map(|o| o.result);
        if stream {
            let line = match &out {
                Ok(r) => json!({ "final": r }),
                Err(e) => json!({ "error": e.to_string() }),
            };
            let _ = tx.blocking_send(line.to_string());
        }
        out
    });

    if !stream {
        return match worker.await {
            Ok(Ok(result)) => Json(result).into_response(),
            Ok(Err(e)) => error(status_of(&e), e),
            Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
        };
    }
    let lines = futures::stream::poll_fn(move |cx| {
        rx.poll_recv(cx)
            .map(|line| line.map(|l| Ok::<_, Infallible>(Bytes::from(l + "\n"))))
    });
    Response::builder()
        .header(header::CONTENT_TYPE, "application/x-ndjson")
        .body(Body::from_stream(lines))
        .expect("static headers")
}

async fn stop(State(session): State<Arc<Session>>) -> Response {
    match &*session.running.lock().unwrap_or_else(|e| e.into_inner()) {
        Some(flag) => {
            flag.store(true, Ordering::Relaxed);
            Json(json!({ "stopped": true })).into_response()
        }
        None => error(StatusCode::NOT_FOUND, "no running query"),
    }
}

async fn index_status(State(session): State<Arc<Session>>) -> Response {
    Json(session.catalog.lock().unwrap_or_else(|e| e.into_inner()).clone()).into_response()
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct LayerInfo {
    layer_id: LayerId,
    width: usize,
    depth: usize,
    state: IndexState,
}

async fn layers(State(session): State<Arc<Session>>) -> Response {
    let catalog = session.catalog.lock().unwrap_or_else(|e| e.into_inner()).clone();
    let src = &session.source;
    let info: Result<Vec<LayerInfo>> = (0..src.layer_count() as u32)
        .map(LayerId)
        .map(|l| {
            Ok(LayerInfo {
                layer_id: l,
                width: src.layer_width(l)?,
                depth: src.layer_depth(l),
                state: catalog.entry(l).map_or(IndexState::Absent, |e| e.state),
            })
        })
        .collect();
    match info {
        Ok(v) => Json(json!({ "nInputs": src.n_inputs(), "layers": v })).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

async fn ledger(State(session): State<Arc<Session>>) -> Response {
    Json(session.source.ledger().snapshot()).into_response()
}
