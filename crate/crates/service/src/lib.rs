//! HTTP session service for interactive amendment.
//!
//! A session owns one amendment chain over an uploaded parse graph. Every
//! response value comes from the library: the service only routes requests,
//! serializes state and keeps sessions apart.

mod error;
mod session;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{Mutex, RwLock};

use musicaog::io::{load_model, load_pg};
use musicaog::{EnergyModel, NodeId};

pub use error::ApiError;
pub use session::{Session, SessionSnapshot, SNAPSHOT_INTERVAL};

/// Models available to sessions, by id.
pub type ModelRegistry = BTreeMap<String, Arc<EnergyModel>>;

/// Every `*.json` model file in `dir`, keyed by file name.
pub fn load_models(dir: &Path) -> musicaog::Result<ModelRegistry> {
    let mut out = BTreeMap::new();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "json"));
    paths.sort();
    for p in paths {
        let (model, _) = load_model(&std::fs::read_to_string(&p)?)?;
        let id = p.file_name().expect("listed file").to_string_lossy().into_owned();
        out.insert(id, Arc::new(model));
    }
    Ok(out)
}

pub struct AppState {
    models: ModelRegistry,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
    snapshots: Option<PathBuf>,
}

impl AppState {
    /// A service over `models`; with a snapshot directory, sessions saved
    /// there are restored and live sessions are written back periodically.
    pub fn new(models: ModelRegistry, snapshots: Option<PathBuf>) -> musicaog::Result<Self> {
        let mut sessions = HashMap::new();
        let mut max_id = 0;
        if let Some(dir) = &snapshots {
            std::fs::create_dir_all(dir)?;
            for snap in session::read_snapshots(dir)? {
                let model = models.get(&snap.model).cloned().ok_or_else(|| {
                    musicaog::Error::InvalidArgument(format!("snapshot {} uses unknown model {}", snap.id, snap.model))
                })?;
                let s = Session::restore(snap, model)?;
                max_id = max_id.max(s.id.trim_start_matches('s').parse::<u64>().unwrap_or(0));
                sessions.insert(s.id.clone(), Arc::new(Mutex::new(s)));
            }
        }
        Ok(AppState {
            models,
            sessions: RwLock::new(sessions),
            next_id: AtomicU64::new(max_id + 1),
            snapshots,
        })
    }

    async fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session_not_found", format!("no session {id}")))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/models", get(list_models))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/temperatures", patch(set_temperatures))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/export", get(export))
        .with_state(state)
}

async fn list_models(State(st): State<Arc<AppState>>) -> Json<Value> {
    let models: Vec<Value> = st
        .models
        .iter()
        .map(|(id, m)| {
            json!({
                "id": id,
                "selected": m.selected,
                "parameter_count": m.parameter_count(),
            })
        })
        .collect();
    Json(json!({ "models": models }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    model: String,
    document: Value,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_t0")]
    t0: f64,
}

fn default_t0() -> f64 {
    1.0
}

async fn create_session(
    State(st): State<Arc<AppState>>,
    body: Result<Json<CreateSession>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let Json(req) = body.map_err(ApiError::from_rejection)?;
    let model = st
        .models
        .get(&req.model)
        .cloned()
        .ok_or_else(|| ApiError::not_found("model_not_found", format!("no model {}", req.model)))?;
    let text = match req.document {
        Value::String(s) => s,
        v => v.to_string(),
    };
    let pg = load_pg(&text).map_err(ApiError::bad_document)?;
    let id = format!("s{}", st.next_id.fetch_add(1, Ordering::SeqCst));
    let session = Session::create(id.clone(), req.model, model, &pg, req.seed, req.t0).map_err(ApiError::bad_document)?;
    let view = session.view();
    if let Some(dir) = &st.snapshots {
        session.snapshot().write(dir).map_err(ApiError::internal)?;
    }
    st.sessions.write().await.insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok(Json(json!({ "session_id": id, "graph": view["graph"] })))
}

async fn get_session(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<Value>, ApiError> {
    let s = st.session(&id).await?;
    let s = s.lock().await;
    Ok(Json(s.view()))
}

async fn set_temperatures(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<BTreeMap<String, f64>>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let s = st.session(&id).await?;
    let Json(raw) = body.map_err(ApiError::from_rejection)?;
    let mut temps = BTreeMap::new();
    for (k, t) in raw {
        let node: NodeId = k
            .parse()
            .map_err(|_| ApiError::unprocessable("unknown_node", format!("{k:?} is not a node id")))?;
        temps.insert(node, t);
    }
    let mut s = s.lock().await;
    s.set_temperatures(&musicaog::TemperatureMap(temps))
        .map_err(|e| ApiError::unprocessable("invalid_temperature", e.to_string()))?;
    if let Some(dir) = &st.snapshots {
        s.snapshot().write(dir).map_err(ApiError::internal)?;
    }
    Ok(Json(json!({ "temperatures": s.temperatures() })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRequest {
    n: u64,
}

async fn step(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<StepRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let s = st.session(&id).await?;
    let Json(req) = body.map_err(ApiError::from_rejection)?;
    if req.n == 0 {
        return Err(ApiError::unprocessable("invalid_steps", "n must be at least 1"));
    }
    let guard = s.lock_owned().await;
    let snapshots = st.snapshots.clone();
    tokio::task::spawn_blocking(move || {
        let mut s = guard;
        let before = s.steps();
        let delta = s.step(req.n)?;
        if let Some(dir) = snapshots {
            if s.steps() / SNAPSHOT_INTERVAL > before / SNAPSHOT_INTERVAL {
                s.snapshot().write(&dir).map_err(ApiError::internal)?;
            }
        }
        Ok(Json(delta))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
}

#[derive(Deserialize)]
struct ExportQuery {
    format: String,
}

async fn export(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let s = st.session(&id).await?;
    let s = s.lock().await;
    let (ctype, bytes) = match q.format.as_str() {
        "pg" => ("application/json", s.export_pg().into_bytes()),
        "midi" => ("audio/midi", s.export_midi().map_err(|e| ApiError::unprocessable("export_failed", e.to_string()))?),
        "trace" => ("text/csv", s.export_trace().map_err(ApiError::internal)?),
        other => {
            return Err(ApiError::bad_request(
                "unknown_format",
                format!("format must be pg, midi or trace, got {other:?}"),
            ))
        }
    };
    Ok(([(header::CONTENT_TYPE, ctype)], bytes).into_response())
}
