use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use everest::service::{router, ServiceConfig, Session};
use everest::source::{SyntheticModel, SyntheticModelSpec};
use serde_json::Value;
use tower::ServiceExt;

fn app(n_inputs: usize, dir: &tempfile::TempDir) -> Router {
    let model = SyntheticModel::new(SyntheticModelSpec::new(21, vec![8, 16], 8, n_inputs)).unwrap();
    let config = ServiceConfig {
        index_dir: dir.path().to_path_buf(),
        budget_bytes: (n_inputs * 24 * 4) as u64,
        iqa_budget_bytes: 0,
        batch_size: 16,
    };
    router(Arc::new(Session::new(Arc::new(model), &config).unwrap()))
}

fn req(method: &str, uri: &str, body: &str) -> Request<Body> {
    Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

async fn call(app: &Router, method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
    let res = app.clone().oneshot(req(method, uri, body)).await.unwrap();
    let status = res.status();
    let bytes = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn stop_without_a_query_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let (status, _) = call(&app(200, &dir), "POST", "/stop", "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn query_builds_the_layer_and_ledger_grows() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(300, &dir);
    let (_, before) = call(&app, "GET", "/ledger", "").await;
    let (status, body) = call(
        &app,
        "POST",
        "/query",
        r#"{"layer": 1, "target": 4, "neurons": [1, 2], "k": 5}"#,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["entries"].as_array().unwrap().len(), 5);
    assert_eq!(body["entries"][0]["inputId"], 4);

    let (_, status_body) = call(&app, "GET", "/index-status", "").await;
    assert_eq!(status_body["layers"][1]["state"], "built");
    assert_eq!(status_body["layers"][0]["state"], "absent");

    let (_, after) = call(&app, "GET", "/ledger", "").await;
    assert!(after["inputsRun"].as_u64() > before["inputsRun"].as_u64());
    let (_, again) = call(&app, "GET", "/ledger", "").await;
    assert_eq!(again, after);

    let (_, layers) = call(&app, "GET", "/layers", "").await;
    assert_eq!(layers["layers"][1]["width"], 16);
    assert_eq!(layers["layers"][1]["state"], "built");
}

#[tokio::test]
async fn bad_specs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(100, &dir);
    for body in [
        r#"{"layer": 9, "neurons": [0], "k": 3}"#,
        r#"{"layer": 0, "neurons": [], "k": 3}"#,
        r#"{"layer": 0, "neurons": [0], "k": 0}"#,
        r#"{"layer": 0, "neurons": [0], "k": 3, "theta": 1.5}"#,
        r#"{"layer": 0, "target": 100, "neurons": [0], "k": 3}"#,
        r#"{"layer": 0, "neurons": [0], "k": 3, "dist": "cosine"}"#,
        "not json",
    ] {
        let (status, err) = call(&app, "POST", "/query", body).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert!(err["error"].is_string());
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn streaming_busy_and_stop() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(4000, &dir);
    // the first query on a layer is answered while its index is built
    let (status, _) = call(
        &app,
        "POST",
        "/query",
        r#"{"layer": 0, "target": 1, "neurons": [3], "k": 2}"#,
    )
    .await;
    assert_eq!(status, StatusCode::OK);

    // every input is a candidate, so the query needs one round per partition;
    // leaving the body unread stalls it once the channel fills
    let res = app
        .clone()
        .oneshot(req(
            "POST",
            "/query",
            r#"{"layer": 0, "target": 1, "neurons": [3], "k": 4000, "stream": true}"#,
        ))
        .await
        .unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(res.headers()["content-type"], "application/x-ndjson");

    let (busy, _) = call(&app, "POST", "/query", r#"{"layer": 0, "neurons": [3], "k": 2}"#).await;
    assert_eq!(busy, StatusCode::CONFLICT);
    let (stopped, _) = call(&app, "POST", "/stop", "").await;
    assert_eq!(stopped, StatusCode::OK);

    let text = String::from_utf8(to_bytes(res.into_body(), usize::MAX).await.unwrap().to_vec()).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let (last, partials) = lines.split_last().unwrap();
    assert!(partials
        .iter()
        .all(|p| p["partial"].is_array() && p.get("round").is_some()));
    let fin = &last["final"];
    assert_eq!(fin["stats"]["stoppedEarly"], true);
    // cut off before k results existed, so there is no guarantee to report
    assert!(fin["stats"]["thetaAchieved"].is_null());
    assert!(fin["entries"].as_array().unwrap().len() < 4000);
    // partial results are a prefix of the final ranking
    let streamed: Vec<&Value> = partials.iter().flat_map(|p| p["partial"].as_array().unwrap()).collect();
    let entries = fin["entries"].as_array().unwrap();
    assert!(streamed.len() <= entries.len());
    for (s, e) in streamed.iter().zip(entries) {
        assert_eq!(s["inputId"], e["inputId"]);
    }

    let (idle, _) = call(&app, "POST", "/stop", "").await;
    assert_eq!(idle, StatusCode::NOT_FOUND);
}
