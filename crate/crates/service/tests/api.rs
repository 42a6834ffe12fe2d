use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use casebrief_service::api::{router, AppState, API_VERSION, API_VERSION_HEADER};
use casebrief_service::config::Config;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const TOY: &str = include_str!("../../core/data/toy_corpus.jsonl");

fn app(store: &std::path::Path) -> Router {
    router(Arc::new(AppState::new(&Config::new(store)).unwrap()))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, _, v) = call_raw(app, method, uri, body.map(|b| b.to_string())).await;
    (status, v)
}

async fn call_raw(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<String>,
) -> (StatusCode, axum::http::HeaderMap, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, headers, v)
}

/// A brief whose six sections hold ten sentences in total.
fn ten_sentence_doc(id: &str) -> Value {
    json!({
        "doc_id": id,
        "title": "Ten v. Sentences",
        "body": "Facts:\nThe tenant paid rent. The landlord kept the deposit. The tenant moved out.\n\n\
                 Procedural History:\nThe tenant sued in small claims court. The court ruled for the landlord.\n\n\
                 Issue:\nMay a landlord keep a deposit without an itemized list?\n\n\
                 Rule:\nA landlord must itemize deductions within thirty days.\n\n\
                 Holding:\nThe landlord must return the deposit.\n\n\
                 Reasoning:\nNo list was ever sent. The statute is mandatory.\n"
    })
}

async fn post_doc(app: &Router, doc: Value) -> Value {
    let (status, v) = call(app, Method::POST, "/documents", Some(doc)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v
}

async fn new_session(app: &Router, doc_id: &str, level: i64) -> String {
    let (status, v) =
        call(app, Method::POST, "/sessions", Some(json!({"user_id": "u1", "level": level, "doc_id": doc_id}))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session"]["session_id"].as_str().unwrap().to_string()
}

fn unit(doc: &Value, i: usize) -> Value {
    doc["units"][i].clone()
}

#[tokio::test]
async fn invalid_level_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    post_doc(&app, ten_sentence_doc("d1")).await;
    for level in [0, 6, 7, -1] {
        let (status, v) =
            call(&app, Method::POST, "/sessions", Some(json!({"user_id": "u", "level": level, "doc_id": "d1"}))).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        assert_eq!(v["error"]["code"], "Validation");
    }
    let (status, v) =
        call(&app, Method::POST, "/sessions", Some(json!({"user_id": "u", "level": 3, "doc_id": "nope"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "NotFound");
}

#[tokio::test]
async fn gated_operation_is_forbidden() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let doc = post_doc(&app, ten_sentence_doc("d1")).await;
    let sid = new_session(&app, "d1", 2).await;
    let uri = format!("/sessions/{sid}/annotations");
    let (status, v) = call(&app, Method::POST, &uri, Some(json!({"span": unit(&doc, 0), "label": "Facts"}))).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(v["error"]["code"], "LevelGate");
    assert_eq!(v["error"]["details"]["operation"], "submit_annotation");
    assert_eq!(v["error"]["details"]["level"], 2);
    let (_, s) = call(&app, Method::GET, &format!("/sessions/{sid}"), None).await;
    assert_eq!(s["session"]["annotations"], json!([]));
}

#[tokio::test]
async fn expert_highlights_cover_every_sentence() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let doc = post_doc(&app, ten_sentence_doc("d1")).await;
    assert_eq!(doc["units"].as_array().unwrap().len(), 10);
    let sid = new_session(&app, "d1", 5).await;
    let (status, v) = call(&app, Method::GET, &format!("/sessions/{sid}/highlights"), None).await;
    assert_eq!(status, StatusCode::OK);
    let hl = v["highlights"].as_array().unwrap();
    assert_eq!(hl.len(), 10);
    for (h, u) in hl.iter().zip(doc["units"].as_array().unwrap()) {
        assert_eq!(&h["span"], u);
        let c = h["confidence"].as_f64().unwrap();
        assert!((1.0 / 6.0 - 1e-9..=1.0).contains(&c));
    }
}

#[tokio::test]
async fn every_response_carries_the_version_header() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    for (method, uri) in [(Method::GET, "/health"), (Method::GET, "/documents/missing"), (Method::GET, "/nowhere")] {
        let (_, headers, _) = call_raw(&app, method, uri, None).await;
        assert_eq!(headers.get(API_VERSION_HEADER).unwrap(), API_VERSION);
    }
    let (status, headers, v) = call_raw(&app, Method::POST, "/sessions", Some("{not json".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "Validation");
    assert_eq!(headers.get(API_VERSION_HEADER).unwrap(), API_VERSION);
}

#[tokio::test]
async fn documents_reject_duplicates_and_bad_ids() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    post_doc(&app, ten_sentence_doc("d1")).await;
    let (status, v) = call(&app, Method::POST, "/documents", Some(ten_sentence_doc("d1"))).await;
    assert_eq!(status, StatusCode::CONFLICT, "{v}");
    let (status, _) = call(&app, Method::POST, "/documents", Some(ten_sentence_doc("../etc"))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) =
        call(&app, Method::POST, "/documents", Some(json!({"doc_id": "x", "title": "t", "body": "   "}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, v) = call(&app, Method::GET, "/documents/d1", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["document"]["sentences"].as_array().unwrap().len(), 10);
}

#[tokio::test]
async fn tutoring_flow_across_levels() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let doc = post_doc(&app, ten_sentence_doc("d1")).await;

    let sid = new_session(&app, "d1", 3).await;
    let (status, v) = call(
        &app,
        Method::POST,
        &format!("/sessions/{sid}/annotations"),
        Some(json!({"span": unit(&doc, 0), "label": "Facts"})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert!(v["warning"]["decision"].is_string(), "{v}");
    let (status, v) = call(&app, Method::POST, &format!("/sessions/{sid}/suggestions"), Some(json!({"span": unit(&doc, 1)}))).await;
    assert_eq!(status, StatusCode::FORBIDDEN, "{v}");

    let (status, v) = call(&app, Method::PATCH, &format!("/sessions/{sid}"), Some(json!({"level": 4}))).await;
    assert_eq!(status, StatusCode::OK);
    assert!(v["operations"].as_array().unwrap().contains(&json!("suggest_category")));
    let (status, v) = call(&app, Method::POST, &format!("/sessions/{sid}/suggestions"), Some(json!({"span": unit(&doc, 1)}))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    let aid = v["annotation_id"].as_u64().unwrap();
    let resolve = format!("/sessions/{sid}/suggestions/{aid}/resolve");
    let (status, v) = call(&app, Method::POST, &resolve, Some(json!({"action": "correct", "label": "Facts"}))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["annotation"]["status"], "confirmed");
    assert_eq!(v["annotation"]["label"], "Facts");
    let (status, v) = call(&app, Method::POST, &resolve, Some(json!({"action": "confirm"}))).await;
    assert_eq!(status, StatusCode::CONFLICT, "{v}");
    let (status, _) = call(&app, Method::POST, &format!("/sessions/{sid}/suggestions/abc/resolve"), Some(json!({"action": "confirm"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, brief) = call(&app, Method::GET, &format!("/sessions/{sid}/brief"), None).await;
    assert_eq!(status, StatusCode::OK);
    let sections = brief["sections"].as_array().unwrap();
    let labels: Vec<&str> = sections.iter().map(|s| s["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["Facts", "Issue", "Holding", "ProceduralHistory", "Reasoning", "Rule"]);
    assert_eq!(sections[0]["extracts"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn categorization_reveals_expert_label() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let doc = post_doc(&app, ten_sentence_doc("d1")).await;
    let spans = doc["units"].as_array().unwrap();
    let example = json!({
        "doc_id": "d1",
        "items": [
            {"span": spans[0], "label": "Facts", "explanation": "What happened."},
            {"span": spans[5], "label": "Issue", "explanation": "The question."}
        ]
    });
    let (status, v) = call(&app, Method::PUT, "/documents/d1/worked-example", Some(example)).await;
    assert_eq!(status, StatusCode::OK, "{v}");

    let novice = new_session(&app, "d1", 1).await;
    let (status, v) = call(&app, Method::GET, &format!("/sessions/{novice}/worked-example"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["items"].as_array().unwrap().len(), 2);

    let sid = new_session(&app, "d1", 2).await;
    let (_, v) = call(&app, Method::GET, &format!("/sessions/{sid}/categorizations"), None).await;
    assert_eq!(v["elements"].as_array().unwrap().len(), 2);
    let uri = format!("/sessions/{sid}/categorizations");
    let (status, v) = call(&app, Method::POST, &uri, Some(json!({"element_id": 1, "label": "Rule"}))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert_eq!(v["kind"], "expert_reveal");
    assert_eq!(v["expert_label"], "Issue");
    let (status, _) = call(&app, Method::POST, &uri, Some(json!({"element_id": 9, "label": "Rule"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn sessions_are_isolated_and_serialized() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let doc = post_doc(&app, ten_sentence_doc("d1")).await;
    let a = new_session(&app, "d1", 3).await;
    let b = new_session(&app, "d1", 3).await;
    let mut tasks = Vec::new();
    for i in 0..20 {
        let app = app.clone();
        let uri = format!("/sessions/{a}/annotations");
        let span = unit(&doc, i % 10);
        tasks.push(tokio::spawn(async move {
            call(&app, Method::POST, &uri, Some(json!({"span": span, "label": "Rule"}))).await.0
        }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::CREATED);
    }
    let (_, va) = call(&app, Method::GET, &format!("/sessions/{a}"), None).await;
    let mut ids: Vec<u64> =
        va["session"]["annotations"].as_array().unwrap().iter().map(|x| x["id"].as_u64().unwrap()).collect();
    ids.sort();
    assert_eq!(ids, (1..=20).collect::<Vec<u64>>());
    let (_, vb) = call(&app, Method::GET, &format!("/sessions/{b}"), None).await;
    assert_eq!(vb["session"]["annotations"], json!([]));
}

#[tokio::test]
async fn state_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (sid, model) = {
        let app = app(dir.path());
        let doc = post_doc(&app, ten_sentence_doc("d1")).await;
        let sid = new_session(&app, "d1", 3).await;
        call(&app, Method::POST, &format!("/sessions/{sid}/annotations"), Some(json!({"span": unit(&doc, 2), "label": "Facts"})))
            .await;
        let (_, models) = call(&app, Method::GET, "/models", None).await;
        (sid, models["active"].clone())
    };
    let app = app(dir.path());
    let (status, v) = call(&app, Method::GET, &format!("/sessions/{sid}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["session"]["annotations"].as_array().unwrap().len(), 1);
    let (_, models) = call(&app, Method::GET, "/models", None).await;
    assert_eq!(models["active"], model);
}

#[tokio::test]
async fn eval_run_completes_in_background() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    for line in TOY.lines() {
        post_doc(&app, serde_json::from_str(line).unwrap()).await;
    }
    let (status, v) = call(&app, Method::POST, "/eval/runs", Some(json!({"taus": [0.05, 0.2], "split_seed": 42}))).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{v}");
    let run_id = v["run_id"].as_str().unwrap().to_string();
    let mut last = Value::Null;
    for _ in 0..200 {
        let (status, v) = call(&app, Method::GET, &format!("/eval/runs/{run_id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if v["status"] == "succeeded" || v["status"] == "failed" {
            last = v;
            break;
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    assert_eq!(last["status"], "succeeded", "{last}");
    let record = &last["record"];
    assert_eq!(record["split_seed"], 42);
    assert_eq!(record["warnings"]["thresholds"].as_array().unwrap().len(), 2);

    let (status, _) = call(&app, Method::POST, "/eval/runs", Some(json!({"taus": [1.5]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, Method::POST, "/eval/runs", Some(json!({"model_id": "ghost"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
