//! HTTP surface over the session store.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{Local, NaiveDate, NaiveDateTime};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use timebuffer_core::buffer::operational_schedule;
use timebuffer_core::cpm::{compute_schedule, DurationLens};
use timebuffer_core::kb::{Curation, TaskWarning};
use timebuffer_core::plan::{Minutes, Money};
use timebuffer_core::supervisor::{Command, Outcome, Phase, ProjectSpec, StatusReport};

use crate::store::{Store, StoreError};

/// Where `now` comes from. Frozen clocks are set through `PUT /clock`.
#[derive(Debug)]
pub enum Clock {
    System,
    Frozen(Mutex<NaiveDateTime>),
}

impl Clock {
    pub fn frozen(at: NaiveDateTime) -> Self {
        Clock::Frozen(Mutex::new(at))
    }

    pub fn now(&self) -> NaiveDateTime {
        match self {
            Clock::System => Local::now().naive_local(),
            Clock::Frozen(t) => *t.lock().expect("clock lock"),
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub clock: Arc<Clock>,
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    ClockNotFrozen,
    Store(StoreError),
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::Store(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, message) = match &self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, "BadRequest", m.clone()),
            ApiError::ClockNotFrozen => (
                StatusCode::CONFLICT,
                "ClockNotFrozen",
                "the clock can only be set in frozen-clock mode".to_string(),
            ),
            ApiError::Store(e) => {
                let status = match e {
                    StoreError::ProjectNotFound(_) => StatusCode::NOT_FOUND,
                    StoreError::Domain(_) => StatusCode::UNPROCESSABLE_ENTITY,
                    StoreError::Kb(_) | StoreError::CorruptProject { .. } | StoreError::Io(_) => {
                        StatusCode::INTERNAL_SERVER_ERROR
                    }
                };
                (status, e.code(), e.to_string())
            }
        };
        (status, Json(json!({ "code": code, "message": message }))).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(e.to_string()))
}

fn ok<T: Serialize>(value: T) -> ApiResult {
    Ok(Json(value).into_response())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({ "ok": true })) }))
        .route("/clock", get(get_clock).put(put_clock))
        .route("/projects", get(list_projects).post(create_project))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/schedule", get(schedule))
        .route("/projects/{id}/status", get(status))
        .route("/projects/{id}/buffer", get(buffer))
        .route("/projects/{id}/analysis", get(analysis))
        .route("/projects/{id}/evm", get(evm))
        .route("/projects/{id}/events", get(events))
        .route("/projects/{id}/finish", post(finish))
        .route("/projects/{id}/calendar/exceptions", post(add_exception))
        .route("/projects/{id}/tasks/{code}/confirm-start", post(confirm_start))
        .route("/projects/{id}/tasks/{code}/progress", post(progress))
        .route("/projects/{id}/tasks/{code}/transfer", post(transfer))
        .route("/projects/{id}/tasks/{code}/close", post(close))
        .route("/projects/{id}/tasks/{code}/cost", post(cost))
        .route("/kb", get(kb))
        .route("/kb/{tag}/warnings", get(kb_warnings))
        .route("/kb/{tag}/cp-history", get(kb_cp_history))
        .with_state(state)
}

pub async fn serve(state: AppState, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    axum::serve(listener, router(state)).await
}

async fn get_clock(State(st): State<AppState>) -> ApiResult {
    ok(json!({ "now": st.clock.now(), "frozen": matches!(*st.clock, Clock::Frozen(_)) }))
}

#[derive(Deserialize)]
struct SetClock {
    now: NaiveDateTime,
}

async fn put_clock(State(st): State<AppState>, body: Bytes) -> ApiResult {
    let req: SetClock = parse(&body)?;
    match &*st.clock {
        Clock::Frozen(t) => *t.lock().expect("clock lock") = req.now,
        Clock::System => return Err(ApiError::ClockNotFrozen),
    }
    ok(json!({ "now": req.now, "frozen": true }))
}

async fn list_projects(State(st): State<AppState>) -> ApiResult {
    let mut out = Vec::new();
    for id in st.store.ids() {
        let session = st.store.session(&id)?;
        let session = session.lock().expect("session lock");
        out.push(json!({ "id": id, "tag": session.spec().tag }));
    }
    ok(out)
}

async fn create_project(State(st): State<AppState>, body: Bytes) -> ApiResult {
    let spec: ProjectSpec = parse(&body)?;
    let created = st.store.create(spec)?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn get_project(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let session = st.store.session(&id)?;
    let session = session.lock().expect("session lock");
    ok(json!({
        "id": id,
        "spec": session.spec(),
        "events": session.log().len(),
        "committed": session.supervisor().is_committed(),
    }))
}

async fn schedule(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult {
    let session = st.store.session(&id)?;
    let session = session.lock().expect("session lock");
    let sup = session.supervisor();
    match q.get("lens").map(String::as_str).unwrap_or("optimistic") {
        "operational" => ok(operational_schedule(sup.network(), sup.plan())),
        other => {
            let lens: DurationLens = other.parse().map_err(ApiError::BadRequest)?;
            ok(compute_schedule(sup.network(), lens))
        }
    }
}

#[derive(Serialize)]
struct StatusView {
    #[serde(flatten)]
    status: StatusReport,
    /// Experience for tasks currently in progress.
    kb_warnings: Vec<TaskWarning>,
}

async fn status(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let session = st.store.session(&id)?;
    let mut session = session.lock().expect("session lock");
    let (_, status) = session.status(st.clock.now())?;
    let tag = session.spec().tag.clone();
    let kb_warnings = status
        .tasks
        .iter()
        .filter(|t| t.phase == Phase::InProgress)
        .filter_map(|t| st.store.warning(&tag, &t.code))
        .collect();
    ok(StatusView {
        status,
        kb_warnings,
    })
}

async fn buffer(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let session = st.store.session(&id)?;
    let session = session.lock().expect("session lock");
    let sup = session.supervisor();
    ok(json!({
        "buffer": sup.buffer(),
        "initial_buffer": sup.initial_buffer(),
        "ledger": sup.plan().ledger(),
    }))
}

async fn analysis(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let session = st.store.session(&id)?;
    let session = session.lock().expect("session lock");
    ok(session.snapshot(st.clock.now()).project_analysis())
}

async fn evm(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let session = st.store.session(&id)?;
    let session = session.lock().expect("session lock");
    let report = session
        .snapshot(st.clock.now())
        .cost_report()
        .map_err(StoreError::from)?;
    ok(report)
}

async fn events(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let session = st.store.session(&id)?;
    let session = session.lock().expect("session lock");
    ok(session.log())
}

#[derive(Deserialize, Default)]
struct FinishRequest {
    #[serde(default)]
    curation: Curation,
}

async fn finish(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: FinishRequest = if body.is_empty() { FinishRequest::default() } else { parse(&body)? };
    let (seq, experience) = st.store.finish(&id, req.curation)?;
    ok(json!({ "seq": seq, "merged": experience }))
}

#[derive(Deserialize)]
struct ExceptionRequest {
    date: NaiveDate,
}

async fn add_exception(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: ExceptionRequest = parse(&body)?;
    run(&st, &id, Command::AddException { date: req.date }, None)
}

/// Runs a task command at the current clock and wraps the outcome with its
/// log sequence number.
fn run(st: &AppState, id: &str, command: Command, warning: Option<TaskWarning>) -> ApiResult {
    let session = st.store.session(id)?;
    let mut session = session.lock().expect("session lock");
    let (seq, outcome) = session.execute(Some(st.clock.now()), command)?;
    let mut body = match outcome {
        Outcome::Dialog(step) => json!({ "step": step }),
        other => serde_json::to_value(other).expect("outcomes serialize"),
    };
    body["seq"] = json!(seq);
    if let Some(w) = warning {
        body["warning"] = json!(w);
    }
    ok(body)
}

#[derive(Deserialize)]
struct ConfirmStartRequest {
    confirmed: bool,
}

async fn confirm_start(
    State(st): State<AppState>,
    Path((id, code)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult {
    let req: ConfirmStartRequest = parse(&body)?;
    let tag = st.store.session(&id)?.lock().expect("session lock").spec().tag.clone();
    let warning = if req.confirmed { st.store.warning(&tag, &code) } else { None };
    run(
        &st,
        &id,
        Command::ConfirmStart {
            task: code,
            confirmed: req.confirmed,
        },
        warning,
    )
}

#[derive(Deserialize)]
struct ProgressRequest {
    actual_pct: f64,
}

async fn progress(State(st): State<AppState>, Path((id, code)): Path<(String, String)>, body: Bytes) -> ApiResult {
    let req: ProgressRequest = parse(&body)?;
    run(
        &st,
        &id,
        Command::ReportProgress {
            task: code,
            actual_pct: req.actual_pct,
        },
        None,
    )
}

#[derive(Deserialize)]
struct TransferRequest {
    #[serde(default)]
    amount: Minutes,
    #[serde(default)]
    reason: String,
    accepted: bool,
}

async fn transfer(State(st): State<AppState>, Path((id, code)): Path<(String, String)>, body: Bytes) -> ApiResult {
    let req: TransferRequest = parse(&body)?;
    run(
        &st,
        &id,
        Command::ConfirmTransfer {
            task: code,
            amount: req.amount,
            reason: req.reason,
            accepted: req.accepted,
        },
        None,
    )
}

#[derive(Deserialize)]
struct CloseRequest {
    actual_minutes: Minutes,
}

async fn close(State(st): State<AppState>, Path((id, code)): Path<(String, String)>, body: Bytes) -> ApiResult {
    let req: CloseRequest = parse(&body)?;
    run(
        &st,
        &id,
        Command::CloseTask {
            task: code,
            actual_minutes: req.actual_minutes,
        },
        None,
    )
}

fn first_sequence() -> u32 {
    1
}

#[derive(Deserialize)]
struct CostRequest {
    #[serde(default = "first_sequence")]
    sequence_index: u32,
    ac: Money,
}

async fn cost(State(st): State<AppState>, Path((id, code)): Path<(String, String)>, body: Bytes) -> ApiResult {
    let req: CostRequest = parse(&body)?;
    run(
        &st,
        &id,
        Command::RecordActualCost {
            task: code,
            sequence_index: req.sequence_index,
            ac: req.ac,
        },
        None,
    )
}

async fn kb(State(st): State<AppState>) -> ApiResult {
    ok(st.store.kb())
}

async fn kb_warnings(
    State(st): State<AppState>,
    Path(tag): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult {
    let kb = st.store.kb();
    let warnings: Vec<Value> = kb
        .transfer_frames()
        .iter()
        .filter(|f| f.project_tag == tag)
        .filter(|f| q.get("task").is_none_or(|t| *t == f.task_identifier))
        .filter_map(|f| kb.lookup_task_warnings(&f.task_identifier, &tag))
        .map(|w| json!({ "text": w.to_string(), "warning": w }))
        .collect();
    ok(warnings)
}

async fn kb_cp_history(State(st): State<AppState>, Path(tag): Path<String>) -> ApiResult {
    let kb = st.store.kb();
    ok(kb.list_cp_history(&tag))
}

