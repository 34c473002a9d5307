//! HTTP routes over persisted sessions.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use layoutpilot_agents::pipeline::{run_pipeline, CommandsError, Session, Stage};
use layoutpilot_agents::{Agents, ErrorKind, PipelineError};
use layoutpilot_core::fixtures::{OTA_NETLIST, OTA_PLACEMENT};
use layoutpilot_core::layout::{load_layout, Layout};
use layoutpilot_core::netlist::parse_netlist;
use layoutpilot_core::script::parse_script;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::render::render;
use crate::store::{Event, Store, StoreError};

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Busy,
    BadRequest(String),
    Unprocessable(Value),
    BadGateway(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, json!({ "error": m })),
            ApiError::Busy => (
                StatusCode::CONFLICT,
                json!({ "error": "a turn is already running for this session" }),
            ),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({ "error": m })),
            ApiError::Unprocessable(v) => (StatusCode::UNPROCESSABLE_ENTITY, v),
            ApiError::BadGateway(m) => (StatusCode::BAD_GATEWAY, json!({ "error": m })),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": m })),
        };
        (status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

fn pipeline_error(e: PipelineError) -> ApiError {
    let message = e.to_string();
    match e.kind {
        ErrorKind::EmptyRequest => ApiError::BadRequest(message),
        ErrorKind::RefineLimit { rounds } => ApiError::Unprocessable(json!({
            "error": message,
            "kind": "refine_limit",
            "rounds": rounds,
        })),
        ErrorKind::Prompt(_) => ApiError::Internal(message),
        // Everything else means the backend was missing or answered with
        // something the pipeline could not use.
        _ => ApiError::BadGateway(message),
    }
}

/// One live session plus the in-flight flag that serializes writers.
pub struct Slot {
    session: Mutex<Session>,
    busy: AtomicBool,
}

struct BusyGuard(Arc<Slot>);

impl BusyGuard {
    fn acquire(slot: &Arc<Slot>) -> Result<Self, ApiError> {
        slot.busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .map_err(|_| ApiError::Busy)?;
        Ok(BusyGuard(slot.clone()))
    }
}

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::Release);
    }
}

pub struct AppState {
    pub store: Store,
    pub agents: Agents,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
}

impl AppState {
    pub fn new(store: Store, agents: Agents) -> Arc<Self> {
        Arc::new(AppState {
            store,
            agents,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    /// The live session, loading it from disk after a restart.
    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        if uuid::Uuid::parse_str(id).is_err() {
            return Err(ApiError::NotFound(format!("no session {id}")));
        }
        let mut map = self.sessions.lock().expect("session map lock");
        if let Some(s) = map.get(id) {
            return Ok(s.clone());
        }
        if !self.store.exists(id) {
            return Err(ApiError::NotFound(format!("no session {id}")));
        }
        let session = self.store.load(id)?;
        let slot = Arc::new(Slot {
            session: Mutex::new(session),
            busy: AtomicBool::new(false),
        });
        map.insert(id.to_string(), slot.clone());
        Ok(slot)
    }

    fn snapshot_of(slot: &Slot) -> Session {
        slot.session.lock().expect("session lock").clone()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/turns", post(post_turn))
        .route("/sessions/{id}/commands", post(post_commands))
        .route("/sessions/{id}/layout", get(get_layout))
        .route("/sessions/{id}/transcript", get(get_transcript))
        .with_state(state)
}

async fn healthz(State(st): State<Arc<AppState>>) -> Json<Value> {
    let backend = st.agents.client.as_ref().map(|c| c.backend_name()).unwrap_or("none");
    Json(json!({ "status": "ok", "backend": backend }))
}

#[derive(Debug, Default, Deserialize)]
pub struct CreateSession {
    pub netlist: Option<String>,
    pub placement: Option<String>,
}

async fn create_session(
    State(st): State<Arc<AppState>>,
    body: Option<Json<CreateSession>>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let (netlist, placement) = match (req.netlist, req.placement) {
        (None, None) => (OTA_NETLIST.to_string(), OTA_PLACEMENT.to_string()),
        (Some(n), Some(p)) => (n, p),
        _ => return Err(ApiError::BadRequest("give both netlist and placement, or neither".into())),
    };
    let parsed = parse_netlist(&netlist).map_err(|e| ApiError::BadRequest(format!("netlist: {e}")))?;
    let layout = load_layout(Arc::new(parsed), &placement).map_err(|e| ApiError::BadRequest(format!("placement: {e}")))?;
    let id = uuid::Uuid::new_v4().to_string();
    let session = Session::new(layout);
    let first = session.latest().clone();
    let st2 = st.clone();
    let id2 = id.clone();
    let doc = session.documents[0].clone();
    tokio::task::spawn_blocking(move || -> Result<(), StoreError> {
        st2.store.create(&id2, &netlist, &placement)?;
        st2.store.write_snapshot(&id2, &first.label, &doc)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    let snapshot = session.latest().clone();
    st.sessions.lock().expect("session map lock").insert(
        id.clone(),
        Arc::new(Slot {
            session: Mutex::new(session),
            busy: AtomicBool::new(false),
        }),
    );
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "snapshot": snapshot }))))
}

#[derive(Debug, Deserialize)]
pub struct TurnRequest {
    pub text: String,
}

fn persist_snapshots(store: &Store, id: &str, before: usize, s: &Session) -> Result<(), StoreError> {
    for (rec, doc) in s.snapshots.iter().zip(&s.documents).skip(before) {
        store.write_snapshot(id, &rec.label, doc)?;
    }
    Ok(())
}

async fn post_turn(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<TurnRequest>,
) -> Result<Json<Value>, ApiError> {
    let slot = st.slot(&id)?;
    let guard = BusyGuard::acquire(&slot)?;
    tokio::task::spawn_blocking(move || {
        let _guard = guard;
        let mut work = AppState::snapshot_of(&slot);
        let before = work.snapshots.len();
        match run_pipeline(&mut work, &st.agents, &req.text) {
            Ok(out) => {
                st.store.append(
                    &id,
                    &Event::Turn {
                        outcome: Box::new(out.clone()),
                    },
                )?;
                persist_snapshots(&st.store, &id, before, &work)?;
                *slot.session.lock().expect("session lock") = work;
                Ok(Json(serde_json::to_value(out).expect("outcome serializes")))
            }
            Err(e) => {
                if matches!(e.kind, ErrorKind::RefineLimit { .. }) && work.stage == Stage::Idle {
                    st.store.append(&id, &Event::StageReset)?;
                    *slot.session.lock().expect("session lock") = work;
                }
                Err(pipeline_error(e))
            }
        }
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
}

#[derive(Debug, Deserialize)]
pub struct CommandsRequest {
    pub script: String,
}

async fn post_commands(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<CommandsRequest>,
) -> Result<Json<Value>, ApiError> {
    if let Err(e) = parse_script(&req.script) {
        return Err(ApiError::BadRequest(e.to_string()));
    }
    let slot = st.slot(&id)?;
    let guard = BusyGuard::acquire(&slot)?;
    tokio::task::spawn_blocking(move || {
        let _guard = guard;
        let mut work = AppState::snapshot_of(&slot);
        let before = work.snapshots.len();
        let out = match work.apply_commands(&req.script) {
            Ok(out) => out,
            Err(CommandsError::Rejected(report)) => {
                return Err(ApiError::Unprocessable(serde_json::to_value(report).expect("report serializes")))
            }
            Err(CommandsError::Parse(m)) => return Err(ApiError::BadRequest(m)),
            Err(e) => return Err(ApiError::Unprocessable(json!({ "error": e.to_string() }))),
        };
        if let Some(rec) = &out.snapshot {
            st.store.append(
                &id,
                &Event::Commands {
                    label: rec.label.clone(),
                    hash: rec.hash.clone(),
                    script: req.script.clone(),
                },
            )?;
            persist_snapshots(&st.store, &id, before, &work)?;
        }
        *slot.session.lock().expect("session lock") = work;
        Ok(Json(serde_json::to_value(out).expect("outcome serializes")))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
}

#[derive(Debug, Deserialize)]
pub struct LayoutQuery {
    pub label: Option<String>,
}

pub fn layout_view(session: &Session, label: Option<&str>) -> Result<Value, ApiError> {
    let rec = match label {
        None => session.latest().clone(),
        Some(l) => session
            .snapshots
            .iter()
            .find(|s| s.label == l)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no snapshot {l}")))?,
    };
    let doc = session.document(&rec.label).expect("labels have documents");
    let layout = Layout::from_snapshot(session.netlist.clone(), doc).map_err(|e| ApiError::Internal(e.to_string()))?;
    let snapshot: Value = serde_json::from_str(doc).map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(json!({
        "label": rec.label,
        "hash": rec.hash,
        "snapshot": snapshot,
        "render": render(&layout),
        "metrics": {
            "hpwl": layout.hpwl(),
            "bounding_area": layout.bounding_area(),
        },
    }))
}

async fn get_layout(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<LayoutQuery>,
) -> Result<Json<Value>, ApiError> {
    let slot = st.slot(&id)?;
    let session = AppState::snapshot_of(&slot);
    layout_view(&session, q.label.as_deref()).map(Json)
}

async fn get_transcript(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let slot = st.slot(&id)?;
    let s = AppState::snapshot_of(&slot);
    Ok(Json(json!({
        "id": id,
        "turns": s.turns,
        "stage": s.stage,
        "transcript": s.transcript,
        "snapshots": s.snapshots,
        "scripts": s.scripts,
    })))
}
