// The HTTP service, driven in-process: one streamed query, then index
// status and the inference ledger. `everest serve` runs the same router on
// a socket.

use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::Request;
use everest::service::{router, ServiceConfig, Session};
use everest::source::{SyntheticModel, SyntheticModelSpec};
use tower::ServiceExt;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = SyntheticModel::new(SyntheticModelSpec::new(3, vec![16, 32], 8, 1000))?;
    let dir = tempfile::tempdir()?;
    let config = ServiceConfig {
        index_dir: dir.path().to_path_buf(),
        budget_bytes: 1000 * 48 * 4 / 5,
        iqa_budget_bytes: 1 << 16,
        batch_size: 16,
    };
    let app = router(Arc::new(Session::new(Arc::new(model), &config)?));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let call = |method: &str, uri: &str, body: &str| {
            Request::builder()
                .method(method)
                .uri(uri)
                .header("content-type", "application/json")
                .body(Body::from(body.to_string()))
                .unwrap()
        };
        for _ in 0..2 {
            let body = r#"{"layer": 1, "target": 5, "neurons": [2, 7, 11], "k": 3, "stream": true}"#;
            let res = app.clone().oneshot(call("POST", "/query", body)).await?;
            let text = String::from_utf8(to_bytes(res.into_body(), usize::MAX).await?.to_vec())?;
            for line in text.lines() {
                println!("{line}");
            }
        }
        for uri in ["/index-status", "/ledger"] {
            let res = app.clone().oneshot(call("GET", uri, "")).await?;
            println!(
                "{uri} -> {}",
                String::from_utf8(to_bytes(res.into_body(), usize::MAX).await?.to_vec())?
            );
        }
        Ok::<_, Box<dyn std::error::Error>>(())
    })
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
