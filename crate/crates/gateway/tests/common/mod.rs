#![allow(dead_code)]

use std::path::{Path, PathBuf};

use timebuffer_core::supervisor::{write_log_entry, Command, DialogStep, Outcome, ProjectSpec};
use timebuffer_gateway::store::Session;

pub const REASON_ID22: &str = "wrong understanding of customer requirements";
pub const REASONS_60: [(&str, &str); 3] = [
    ("id31", "the remake of the interface between classes"),
    ("id37", "the synchronization errors"),
    ("id39", "reorganization in classes"),
];

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn case_study_spec() -> ProjectSpec {
    let text = std::fs::read_to_string(fixtures().join("case_study/project.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn dialog(outcome: Outcome) -> DialogStep {
    match outcome {
        Outcome::Dialog(step) => step,
        other => panic!("expected a dialog step, got {other:?}"),
    }
}

/// Drives the case-study project through supervision: id21 closed at 300
/// minutes, id22 extended by 30 minutes, id31/id37/id39 by 60 minutes each,
/// every other task confirmed on time, then eleven planning-and-tracking
/// sessions costed at 112,500.
pub fn drive_case_study(session: &mut Session) {
    let cal = session.spec().calendar.clone();
    let origin = cal.origin();
    let at = |minutes| cal.advance(origin, minutes).unwrap();

    session.status(origin).unwrap();
    session
        .execute(Some(origin), Command::ConfirmStart { task: "id3".into(), confirmed: true })
        .unwrap();

    session
        .execute(Some(at(300)), Command::CloseTask { task: "id21".into(), actual_minutes: 300 })
        .unwrap();

    // id22 runs 13:00-13:45; at 13:36 the plan expects 80%, 40% is done.
    let (_, outcome) = session
        .execute(Some(at(336)), Command::ReportProgress { task: "id22".into(), actual_pct: 40.0 })
        .unwrap();
    match dialog(outcome) {
        DialogStep::ProposeTransfer { amount, planned_pct, .. } => {
            assert_eq!(planned_pct, 80.0);
            assert_eq!(amount, 18);
        }
        other => panic!("expected a proposal, got {other:?}"),
    }
    session
        .execute(
            Some(at(336)),
            Command::ConfirmTransfer {
                task: "id22".into(),
                amount: 30,
                reason: REASON_ID22.into(),
                accepted: true,
            },
        )
        .unwrap();

    let mut pending: Vec<(&str, &str)> = REASONS_60.to_vec();
    let mut now = at(336);
    for _ in 0..10_000 {
        now = cal.advance(cal.roll_forward(now), 30).unwrap();
        let (_, report) = session.status(now).unwrap();
        if report.project_complete {
            break;
        }
        for prompt in report.prompts {
            let DialogStep::ConfirmInProgress { task, planned_pct } = prompt else {
                continue;
            };
            if let Some(pos) = pending.iter().position(|(code, _)| *code == task) {
                if planned_pct < 50.0 {
                    continue;
                }
                let (_, reason) = pending.remove(pos);
                let (_, outcome) = session
                    .execute(
                        Some(now),
                        Command::ReportProgress {
                            task: task.clone(),
                            actual_pct: planned_pct / 2.0,
                        },
                    )
                    .unwrap();
                assert!(matches!(dialog(outcome), DialogStep::ProposeTransfer { .. }));
                session
                    .execute(
                        Some(now),
                        Command::ConfirmTransfer {
                            task,
                            amount: 60,
                            reason: reason.into(),
                            accepted: true,
                        },
                    )
                    .unwrap();
            } else {
                session
                    .execute(Some(now), Command::ConfirmStart { task, confirmed: true })
                    .unwrap();
            }
        }
    }
    assert!(pending.is_empty(), "transfers not applied: {pending:?}");
    assert!(session.status(now).unwrap().1.project_complete);

    for seq in 1..=11 {
        session
            .execute(
                Some(now),
                Command::RecordActualCost {
                    task: "id3".into(),
                    sequence_index: seq,
                    ac: 112_500,
                },
            )
            .unwrap();
    }
}

pub fn log_text(session: &Session) -> String {
    let mut out = Vec::new();
    for entry in session.log() {
        write_log_entry(&mut out, entry).unwrap();
    }
    String::from_utf8(out).unwrap()
}

pub mod api {
    use std::sync::Arc;

    use axum::body::Body;
    use axum::http::{Method, Request, StatusCode};
    use axum::Router;
    use chrono::NaiveDateTime;
    use http_body_util::BodyExt;
    use serde_json::Value;
    use timebuffer_gateway::http::{router, AppState, Clock};
    use timebuffer_gateway::store::Store;
    use tower::ServiceExt;

    pub fn app(store: Store, frozen_at: Option<NaiveDateTime>) -> Router {
        router(AppState {
            store: Arc::new(store),
            clock: Arc::new(frozen_at.map(Clock::frozen).unwrap_or(Clock::System)),
        })
    }

    pub async fn call_raw(app: &Router, method: Method, uri: &str, body: Vec<u8>) -> (StatusCode, Value) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(Body::from(body))
            .unwrap();
        let resp = app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, value)
    }

    pub async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
        call_raw(app, Method::GET, uri, Vec::new()).await
    }

    pub async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
        call_raw(app, Method::POST, uri, body.to_string().into_bytes()).await
    }

    pub async fn put(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
        call_raw(app, Method::PUT, uri, body.to_string().into_bytes()).await
    }
}

pub fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("timebuffer-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
