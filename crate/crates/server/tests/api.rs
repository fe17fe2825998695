use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use genread_core::bundle::{build_bundle, BuildOptions, BuildProviders};
use genread_core::config::Config;
use genread_core::experiment::{FileEventStore, ManualClock, MemoryEventStore, GROUP_COUNT};
use genread_core::gaze::{write_gaze_csv, GazePoint};
use genread_core::providers::mock::{MockEmbeddingProvider, MockImageProvider, MockTextProvider};
use genread_core::{Bundle, PreferenceSpec};
use genread_server::{router, AppState, ServerError};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn bundle(seed: u64) -> Bundle {
    let mut config = Config::default();
    config.content.story_words = 120;
    let opts = BuildOptions {
        preferences: PreferenceSpec { animal: Some(["otter", "fox", "owl", "hare"][seed as usize % 4].into()), ..Default::default() },
        config,
        seed,
        mock: true,
        created_at: "1970-01-01T00:00:00Z".into(),
    };
    let (text, image, embed) = (MockTextProvider::new(seed), MockImageProvider::new(), MockEmbeddingProvider::new(32, 77));
    build_bundle(&BuildProviders { text: &text, image: &image, embed: &embed }, &opts).unwrap()
}

fn bundles(n: u64) -> Vec<Bundle> {
    (0..n).map(bundle).collect()
}

struct Harness {
    app: Router,
    clock: Arc<ManualClock>,
    bundles: Vec<Bundle>,
}

fn harness() -> Harness {
    let bundles = bundles(4);
    let clock = Arc::new(ManualClock::new(1_000_000));
    let state = AppState::new(bundles.clone(), None, 30, Arc::new(MemoryEventStore::new()), clock.clone()).unwrap();
    Harness { app: router(Arc::new(state)), clock, bundles }
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<String>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header(header::CONTENT_TYPE, "application/json");
    }
    let resp = app.clone().oneshot(req.body(body.map_or_else(Body::empty, Body::from)).unwrap()).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn json_call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body.map(|b| b.to_string())).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn event(app: &Router, id: &str, ev: Value) -> (StatusCode, Value) {
    json_call(app, Method::POST, &format!("/sessions/{id}/events"), Some(ev)).await
}

#[tokio::test]
async fn health_is_ok() {
    let h = harness();
    let (status, body) = json_call(&h.app, Method::GET, "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({ "status": "ok" }));
}

#[test]
fn startup_needs_exactly_four_bundles() {
    let clock = Arc::new(ManualClock::new(0));
    for n in [3, 5] {
        let r = AppState::new(bundles(n), None, 30, Arc::new(MemoryEventStore::new()), clock.clone());
        assert!(matches!(r, Err(ServerError::WrongBundleCount(k)) if k == n as usize));
    }
    let mut four = bundles(3);
    four.push(four[0].clone());
    let r = AppState::new(four, None, 30, Arc::new(MemoryEventStore::new()), clock);
    assert!(r.is_err());
}

#[tokio::test]
async fn create_returns_six_groups() {
    let h = harness();
    let (status, body) = json_call(&h.app, Method::POST, "/sessions", None).await;
    assert_eq!(status, StatusCode::OK);
    let groups = body["groups"].as_array().unwrap();
    assert_eq!(groups.len(), GROUP_COUNT);
    let fixed = h.bundles[0].id();
    assert!(groups.iter().all(|g| g["fixed_story_id"] == fixed));
    assert_eq!(body["state"]["phase"], json!({ "name": "consent" }));
    assert_eq!(body["server_time_ms"], 1_000_000);
}

#[tokio::test]
async fn full_session_over_http() {
    let h = harness();
    let app = &h.app;
    let (_, body) = json_call(app, Method::POST, "/sessions", None).await;
    let id = body["state"]["session_id"].as_str().unwrap().to_string();

    assert_eq!(event(app, &id, json!({ "type": "consent_given" })).await.0, StatusCode::OK);
    assert_eq!(event(app, &id, json!({ "type": "pre_survey_submitted", "answers": { "Q1": "a" } })).await.0, StatusCode::OK);
    assert_eq!(event(app, &id, json!({ "type": "calibration_completed" })).await.0, StatusCode::OK);
    let (status, body) = event(app, &id, json!({ "type": "group_selected", "group_id": 2 })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["state"]["phase"], json!({ "name": "reading", "slot": 1 }));

    let mut limits = Vec::new();
    for slot in 1..=4u8 {
        let (_, st) = json_call(app, Method::GET, &format!("/sessions/{id}/state"), None).await;
        let cur = &st["state"]["slots"][usize::from(slot) - 1];
        let (story, cond) = (cur["story_id"].as_str().unwrap(), cur["condition"].as_str().unwrap());
        assert_eq!(cond, format!("C{slot}"));
        limits.push(cur["time_limit_seconds"].as_f64().unwrap());
        let (status, payload) = json_call(app, Method::GET, &format!("/bundles/{story}/condition/{cond}"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(payload["time_limit_seconds"], cur["time_limit_seconds"]);
        match slot {
            2 => {
                let imgs = payload["sentence_images"].as_array().unwrap();
                assert_eq!(imgs.len(), payload["sentences"].as_array().unwrap().len());
                let art = imgs[0]["artifact_id"].as_str().unwrap();
                let (status, bytes) = call(app, Method::GET, &format!("/bundles/{story}/images/{art}"), None).await;
                assert_eq!(status, StatusCode::OK);
                assert!(bytes.starts_with(b"P6"));
            }
            3 => assert!(payload["summary"].is_string() && payload.get("summary_images").is_none()),
            4 => assert_eq!(payload["summary_images"].as_array().unwrap().len(), 5),
            _ => assert!(payload.get("sentence_images").is_none() && payload.get("summary").is_none()),
        }

        // Too-early post-test is refused; the server clock decides.
        let (status, err) = event(app, &id, json!({ "type": "post_test_submitted", "answers": vec![0u8; 10] })).await;
        assert_eq!(status, StatusCode::CONFLICT);
        assert_eq!(err["error"], "illegal_transition");

        h.clock.set(st["state"]["deadline_ms"].as_u64().unwrap());
        let (_, problems) = json_call(app, Method::GET, &format!("/sessions/{id}/distraction"), None).await;
        let problems = problems.as_array().unwrap();
        assert_eq!(problems.len(), 30);
        assert!(problems[0].get("answer").is_none());
        let (l, r) = (problems[0]["left"].as_i64().unwrap(), problems[0]["right"].as_i64().unwrap());
        let answer = match problems[0]["op"].as_str().unwrap() {
            "+" => l + r,
            "-" => l - r,
            _ => l * r,
        };
        let (status, _) = event(app, &id, json!({ "type": "distraction_answered", "problem": 0, "answer": answer })).await;
        assert_eq!(status, StatusCode::OK);

        h.clock.advance(60_000);
        let (_, qs) = json_call(app, Method::GET, &format!("/bundles/{story}/questions"), None).await;
        assert_eq!(qs.as_array().unwrap().len(), 10);
        assert!(qs[0].get("correct_option").is_none());
        let (status, body) = event(app, &id, json!({ "type": "post_test_submitted", "answers": vec![0u8; 10] })).await;
        assert_eq!(status, StatusCode::OK, "{body}");
    }
    let (status, body) =
        event(app, &id, json!({ "type": "post_survey_submitted", "answers": { "Q3": "image-generation" } })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["state"]["phase"], json!({ "name": "done" }));

    let (status, log) = json_call(app, Method::GET, &format!("/sessions/{id}/log"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(log["completed"], true);
    assert_eq!(log["group_number"], 2);
    for (s, limit) in log["slots"].as_array().unwrap().iter().zip(limits) {
        assert_eq!(s["distraction_score"], 1);
        assert_eq!(s["reading_duration_seconds"].as_f64(), Some(limit));
    }
}

#[tokio::test]
async fn errors_have_statuses() {
    let h = harness();
    let app = &h.app;
    let (status, body) = json_call(app, Method::GET, "/sessions/nope/state", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_session");
    let (_, body) = json_call(app, Method::POST, "/sessions", None).await;
    let id = body["state"]["session_id"].as_str().unwrap().to_string();
    let (status, _) = event(app, &id, json!({ "type": "no_such_event" })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let b = h.bundles[0].id();
    assert_eq!(json_call(app, Method::GET, &format!("/bundles/{b}/condition/C9"), None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(json_call(app, Method::GET, "/bundles/x/condition/C1", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(json_call(app, Method::GET, &format!("/bundles/{b}/images/zzz"), None).await.0, StatusCode::NOT_FOUND);
    let (status, _) = json_call(app, Method::GET, &format!("/sessions/{id}/distraction"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn gaze_upload_is_validated_and_persisted() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(FileEventStore::open(dir.path()).unwrap());
    let clock = Arc::new(ManualClock::new(5));
    let app = router(Arc::new(AppState::new(bundles(4), None, 30, store, clock).unwrap()));
    let (_, body) = json_call(&app, Method::POST, "/sessions", None).await;
    let id = body["state"]["session_id"].as_str().unwrap().to_string();

    let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/gaze"), Some("t_ms,x_px,y_px,valid\n1,x,2,1\n".into())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(String::from_utf8_lossy(&body).contains("line 2"));

    let csv = write_gaze_csv(&[GazePoint::new(10, 1.0, 2.0), GazePoint::invalid(21), GazePoint::new(32, 3.0, 4.0)]);
    let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/gaze"), Some(csv.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let receipt: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!((receipt["samples"].as_u64(), receipt["valid_samples"].as_u64()), (Some(3), Some(2)));
    assert_eq!(std::fs::read_to_string(dir.path().join(&id).join("gaze.csv")).unwrap(), csv);
}
