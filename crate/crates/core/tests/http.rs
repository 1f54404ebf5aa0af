//! HTTP API driven in-process through the router.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value as Json};
use tower::ServiceExt;

use vismodel::service::{router, SessionState};

const ABSENCES: &str = include_str!("../data/absences.csv");

struct Client {
    state: Arc<SessionState>,
}

impl Client {
    fn new() -> Self {
        Client {
            state: Arc::new(SessionState::new(7)),
        }
    }

    async fn send(&self, req: Request<Body>) -> (StatusCode, Vec<u8>) {
        let resp = router(self.state.clone()).oneshot(req).await.unwrap();
        let status = resp.status();
        let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, body)
    }

    async fn get(&self, uri: &str) -> (StatusCode, Json) {
        let (s, b) = self.send(Request::get(uri).body(Body::empty()).unwrap()).await;
        (s, serde_json::from_slice(&b).unwrap_or(Json::Null))
    }

    async fn post_raw(&self, uri: &str, content_type: &str, body: String) -> (StatusCode, Vec<u8>) {
        let req = Request::post(uri)
            .header("content-type", content_type)
            .body(Body::from(body))
            .unwrap();
        self.send(req).await
    }

    async fn post(&self, uri: &str, body: Json) -> (StatusCode, Json) {
        let (s, b) = self.post_raw(uri, "application/json", body.to_string()).await;
        (s, serde_json::from_slice(&b).unwrap_or(Json::Null))
    }

    async fn upload(&self) -> String {
        let (s, b) = self
            .post_raw("/datasets?name=absences", "text/csv", ABSENCES.to_string())
            .await;
        assert_eq!(s, StatusCode::OK, "{}", String::from_utf8_lossy(&b));
        let v: Json = serde_json::from_slice(&b).unwrap();
        v["id"].as_str().unwrap().to_string()
    }

    async fn fit(&self, dataset: &str, location: &str, label: &str) -> String {
        let (s, v) = self
            .post(
                "/fit",
                json!({"dataset": dataset, "family": "negative_binomial", "location": location, "label": label}),
            )
            .await;
        assert_eq!(s, StatusCode::OK, "{v}");
        assert_eq!(v["converged"], true, "{v}");
        v["model_id"].as_str().unwrap().to_string()
    }
}

#[tokio::test]
async fn upload_reports_schema() {
    let c = Client::new();
    let id = c.upload().await;
    let (s, v) = c.get(&format!("/datasets/{id}")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["n_rows"], 517);
    let schema = v["schema"].as_array().unwrap();
    let edu = schema.iter().find(|c| c["name"] == "g_edu").unwrap();
    assert_eq!(edu["kind"], "discrete");
    assert_eq!(edu["levels"], json!(["higher", "none", "primary", "secondary"]));
    let study = schema.iter().find(|c| c["name"] == "study_time").unwrap();
    assert_eq!(study["kind"], "continuous");
    assert!(study["range"].is_array());
}

#[tokio::test]
async fn pipeline_creates_a_new_dataset() {
    let c = Client::new();
    let id = c.upload().await;
    let (s, v) = c
        .post(
            &format!("/datasets/{id}/pipeline"),
            json!({
                "transforms": [{"column": "study_time", "kind": "log"}],
                "filters": [{"column": "g_edu", "op": "ne", "criterion": "none"}]
            }),
        )
        .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_ne!(v["id"], id.as_str());
    // Filters run first even though they were listed second.
    assert_eq!(v["pipeline"][0]["step"], "filter");
    assert_eq!(v["pipeline"][1]["step"], "transform");
    assert!(v["n_rows"].as_u64().unwrap() < 517);

    let (s, v) = c
        .post(
            &format!("/datasets/{id}/pipeline"),
            json!({"transforms": [{"column": "absences", "kind": "log"}]}),
        )
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert_eq!(v["code"], "domain_error");
}

#[tokio::test]
async fn fit_returns_description_without_coefficients() {
    let c = Client::new();
    let id = c.upload().await;
    let (s, v) = c
        .post(
            "/fit",
            json!({"dataset": id, "family": "normal", "location": "absences ~ 1", "scale": "~ study_time"}),
        )
        .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(
        v["description"],
        json!([
            "absences is normally distributed",
            "its mean is constant",
            "its variance depends on study_time"
        ])
    );
    for hidden in ["beta", "coefficients", "log_lik", "covariance"] {
        assert!(v.get(hidden).is_none(), "{hidden} leaked: {v}");
    }
}

#[tokio::test]
async fn fit_errors_map_to_statuses() {
    let c = Client::new();
    let id = c.upload().await;
    let (s, v) = c
        .post("/fit", json!({"dataset": id, "family": "normal", "location": "absences ~~ x"}))
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "parse_error");

    let (s, v) = c
        .post("/fit", json!({"dataset": id, "family": "normal", "location": "absences ~ nope"}))
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "unknown_variable");

    let (s, v) = c
        .post("/fit", json!({"dataset": id, "family": "log_normal", "location": "absences ~ 1"}))
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");

    let (s, v) = c
        .post("/fit", json!({"dataset": "d999", "family": "normal", "location": "absences ~ 1"}))
        .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "not_found");
}

#[tokio::test]
async fn draws_and_residuals() {
    let c = Client::new();
    let id = c.upload().await;
    let m = c.fit(&id, "absences ~ g_edu", "edu").await;

    let (s, v) = c.get(&format!("/models/{m}/draws?n=5&seed=3")).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["records"].as_array().unwrap().len(), 517 * 6);
    let (_, again) = c.get(&format!("/models/{m}/draws?n=5&seed=3")).await;
    assert_eq!(v, again);

    let (s, v) = c.get(&format!("/models/{m}/residuals")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["residuals"].as_array().unwrap().len(), 517);

    let (s, _) = c.get("/models/m404/residuals").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn check_with_zero_and_two_models() {
    let c = Client::new();
    let id = c.upload().await;
    let chart = json!({"x": "study_time", "y": "absences"});

    let (s, plain) = c.post("/check", json!({"dataset": id, "chart": chart})).await;
    assert_eq!(s, StatusCode::OK, "{plain}");
    assert_eq!(plain["layout"]["panels"].as_array().unwrap().len(), 1);
    assert_eq!(plain["predictions"]["records"].as_array().unwrap().len(), 517);

    let m1 = c.fit(&id, "absences ~ g_edu", "edu").await;
    let m2 = c.fit(&id, "absences ~ g_edu + study_time", "edu+study").await;
    let body = json!({"dataset": id, "chart": chart, "models": [m1, m2], "n_draws": 50, "seed": 11});
    let (s, v) = c.post("/check", body.clone()).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let panels = v["layout"]["panels"].as_array().unwrap();
    assert_eq!(panels.len(), 3);
    assert!(panels.iter().all(|p| p["scales"] == panels[0]["scales"]));
    assert_eq!(v["layout"]["table"]["n_records"], 517 * 101);
    assert_eq!(v["predictions"]["records"].as_array().unwrap().len(), 517 * 101);

    // Identical requests give byte-identical bodies.
    let (_, a) = c.post_raw("/check", "application/json", body.to_string()).await;
    let (_, b) = c.post_raw("/check", "application/json", body.to_string()).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn check_rejects_models_from_another_dataset() {
    let c = Client::new();
    let id = c.upload().await;
    let (_, v) = c
        .post(
            &format!("/datasets/{id}/pipeline"),
            json!({"filters": [{"column": "age", "op": "lt", "criterion": 18}]}),
        )
        .await;
    let young = v["id"].as_str().unwrap().to_string();
    let m = c.fit(&young, "absences ~ 1", "young").await;
    let (s, v) = c
        .post("/check", json!({"dataset": id, "chart": {"y": "absences"}, "models": [m]}))
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert_eq!(v["code"], "domain_error");
}

#[tokio::test]
async fn malformed_requests() {
    let c = Client::new();
    let (s, v) = c.post_raw("/datasets", "text/csv", String::new()).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{}", String::from_utf8_lossy(&v));
    let (s, _) = c.post_raw("/datasets", "text/csv", "a,b\n".into()).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = c.get("/datasets/d77").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = c.get("/health").await;
    assert_eq!(s, StatusCode::OK);
}
