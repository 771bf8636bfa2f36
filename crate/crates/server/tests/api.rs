use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use prefelicit_server::{router, SessionStore};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn catalog(n: usize) -> Value {
    Value::Array((0..n).map(|i| json!({ "id": format!("m{i}"), "label": format!("Movie {i}") })).collect())
}

fn small_config(k: usize) -> Value {
    json!({ "k": k, "mc": { "R": 30, "seed": 7 }, "sampler": { "pool_size": 4, "finetune_epochs": 2, "replay": 5 }, "model": { "epochs": 5 } })
}

async fn create(app: &Router, n: usize, k: usize) -> String {
    let (status, body) = call(app, "POST", "/sessions", Some(json!({ "items": catalog(n), "config": small_config(k) }))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["session_id"].as_str().unwrap().to_owned()
}

fn app() -> Router {
    router(Arc::new(SessionStore::in_memory()), None)
}

#[tokio::test]
async fn create_validates_the_catalog_and_config() {
    let app = app();
    let (s, body) = call(&app, "POST", "/sessions", Some(json!({ "items": [] }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "validation");
    let (s, _) = call(&app, "POST", "/sessions", Some(json!({ "items": catalog(3), "config": { "k": 5 } }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", "/sessions", Some(json!({ "items": [{ "id": "a" }, { "id": "a" }] }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", "/sessions", Some(json!({ "items": catalog(3), "colour": "red" }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let req = Request::builder().method("POST").uri("/sessions").body(Body::from("{not json")).unwrap();
    assert_eq!(app.clone().oneshot(req).await.unwrap().status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_sessions_and_routes_are_not_found() {
    let app = app();
    let (s, body) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "not_found");
    assert_eq!(call(&app, "POST", "/sessions/nope/query", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "POST", "/sessions/nope/answer", Some(json!({ "query_id": "q", "winner": "m0" }))).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/elsewhere", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn query_answer_cycle_updates_the_menu() {
    let app = app();
    let id = create(&app, 5, 2).await;
    let (s, state) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(state["status"], "active");
    assert_eq!(state["remaining_pairs"], 10);
    assert_eq!(state["menu"].as_array().unwrap().len(), 2);

    let (s, q) = call(&app, "POST", &format!("/sessions/{id}/query"), None).await;
    assert_eq!(s, StatusCode::OK);
    let a = q["pair"][0]["id"].as_str().unwrap().to_owned();
    let b = q["pair"][1]["id"].as_str().unwrap().to_owned();
    assert_ne!(a, b);
    let (s, _) = call(&app, "POST", &format!("/sessions/{id}/query"), None).await;
    assert_eq!(s, StatusCode::CONFLICT, "second query while one is outstanding");

    let qid = q["query_id"].as_str().unwrap();
    let (s, body) = call(&app, "POST", &format!("/sessions/{id}/answer"), Some(json!({ "query_id": "other", "winner": a }))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(body["error"], "conflict");
    let outsider = (0..5).map(|i| format!("m{i}")).find(|m| *m != a && *m != b).unwrap();
    let (s, _) = call(&app, "POST", &format!("/sessions/{id}/answer"), Some(json!({ "query_id": qid, "winner": outsider }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, ans) = call(&app, "POST", &format!("/sessions/{id}/answer"), Some(json!({ "query_id": qid, "winner": a }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ans["queries_so_far"], 1);
    assert_eq!(ans["menu"].as_array().unwrap().len(), 2);
    let eu = ans["expected_utility"].as_f64().unwrap();
    assert!((0.0..=2.0).contains(&eu), "{eu}");

    let (_, state) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(state["history"][0]["winner"]["id"], a.as_str());
    assert_eq!(state["history"][0]["loser"]["id"], b.as_str());
    assert_eq!(state["remaining_pairs"], 9);
    assert!(state["outstanding"].is_null());
    let (s, _) = call(&app, "POST", &format!("/sessions/{id}/answer"), Some(json!({ "query_id": qid, "winner": a }))).await;
    assert_eq!(s, StatusCode::CONFLICT, "answer replayed after it was consumed");
}

#[tokio::test]
async fn two_item_session_recommends_the_winner_then_completes() {
    let app = app();
    let (s, body) = call(&app, "POST", "/sessions", Some(json!({ "items": [{ "id": 1, "label": "one" }, { "id": 2, "label": "two" }], "config": small_config(1) }))).await;
    assert_eq!(s, StatusCode::CREATED);
    let id = body["session_id"].as_str().unwrap();
    let (_, q) = call(&app, "POST", &format!("/sessions/{id}/query"), None).await;
    let (_, ans) = call(&app, "POST", &format!("/sessions/{id}/answer"), Some(json!({ "query_id": q["query_id"], "winner": 2 }))).await;
    assert_eq!(ans["menu"], json!(["2"]));
    let (s, done) = call(&app, "POST", &format!("/sessions/{id}/query"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(done, json!({ "status": "complete" }));
    let (_, state) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(state["status"], "complete");
}

#[tokio::test]
async fn reads_never_change_state() {
    let app = app();
    let id = create(&app, 4, 1).await;
    let (_, first) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    let (_, second) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(first, second);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn racing_queries_issue_exactly_one_ticket() {
    let app = app();
    let id = create(&app, 6, 1).await;
    let tasks: Vec<_> = (0..6)
        .map(|_| {
            let app = app.clone();
            let uri = format!("/sessions/{id}/query");
            tokio::spawn(async move { call(&app, "POST", &uri, None).await.0 })
        })
        .collect();
    let mut ok = 0;
    for t in tasks {
        match t.await.unwrap() {
            StatusCode::OK => ok += 1,
            StatusCode::CONFLICT => {}
            other => panic!("unexpected status {other}"),
        }
    }
    assert_eq!(ok, 1);
}

#[tokio::test]
async fn sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(Arc::new(SessionStore::open(dir.path()).unwrap()), None);
    let id = create(&app, 5, 2).await;
    for _ in 0..3 {
        let (_, q) = call(&app, "POST", &format!("/sessions/{id}/query"), None).await;
        call(&app, "POST", &format!("/sessions/{id}/answer"), Some(json!({ "query_id": q["query_id"], "winner": q["pair"][1]["id"] }))).await;
    }
    let (_, before) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    drop(app);

    let reopened = router(Arc::new(SessionStore::open(dir.path()).unwrap()), None);
    let (s, after) = call(&reopened, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(before["history"], after["history"]);
    assert_eq!(before["menu"], after["menu"]);
    assert_eq!(before["expected_utility"], after["expected_utility"]);
    assert_eq!(after["remaining_pairs"], 7);
}

#[tokio::test]
async fn static_assets_are_served_beside_the_api() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>hi</h1>").unwrap();
    let app = router(Arc::new(SessionStore::in_memory()), Some(dir.path().to_path_buf()));
    let res = app.clone().oneshot(Request::builder().uri("/index.html").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(call(&app, "GET", "/sessions/x", None).await.0, StatusCode::NOT_FOUND);
}
