//! Exercises the HTTP API in-process: upload, fit, check. The same router is
//! what `vismodel serve` binds to a socket.
//!
//! `cargo run --release --example http_api`

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use vismodel::service::{router, SessionState};

async fn call(state: &Arc<SessionState>, method: &str, uri: &str, body: String) -> Value {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    println!("{method} {uri} -> {status}");
    v
}

#[tokio::main]
async fn main() {
    let state = Arc::new(SessionState::new(0));
    let csv = include_str!("../data/absences.csv").to_string();
    let d = call(&state, "POST", "/datasets?name=absences", csv).await;
    let id = d["id"].as_str().unwrap();
    println!("  dataset {id}: {} rows, {} columns", d["n_rows"], d["schema"].as_array().unwrap().len());

    let mut model_ids = Vec::new();
    for loc in ["absences ~ g_edu", "absences ~ g_edu + study_time"] {
        let body = json!({"dataset": id, "family": "negative_binomial", "location": loc});
        let m = call(&state, "POST", "/fit", body.to_string()).await;
        println!("  {} converged={} :: {}", m["model_id"], m["converged"], m["description"]);
        model_ids.push(m["model_id"].clone());
    }

    let body = json!({
        "dataset": id,
        "chart": {"x": "study_time", "y": "absences"},
        "models": model_ids,
        "n_draws": 20,
        "seed": 1
    });
    let check = call(&state, "POST", "/check", body.to_string()).await;
    let layout = &check["layout"];
    println!(
        "  {} layout, {} panels, {} records, shared y scale {}",
        layout["kind"],
        layout["panels"].as_array().unwrap().len(),
        layout["table"]["n_records"],
        layout["panels"][0]["scales"]["y"]
    );

    let bad = json!({"dataset": id, "family": "poisson", "location": "absences ~ nope"});
    let err = call(&state, "POST", "/fit", bad.to_string()).await;
    println!("  {err}");
}
