//! The `vismodel` binary end to end.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value as Json;

const BIN: &str = env!("CARGO_BIN_EXE_vismodel");

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stderr_json(out: &Output) -> Json {
    serde_json::from_slice(&out.stderr)
        .unwrap_or_else(|_| panic!("stderr is not JSON: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn fit_writes_model_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cars.json");
    let out = run(&[
        "fit", "--data", &data("cars.csv"), "--family", "normal",
        "--location", "mpg ~ cyl", "--scale", "~ cyl", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m: Json = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(m["converged"], true);
    assert_eq!(m["n_obs"], 32);
    let k = m["beta"].as_array().unwrap().len();
    assert_eq!(k, 6, "3 location + 3 scale coefficients");
    assert_eq!(m["covariance"].as_array().unwrap().len(), k);
    assert_eq!(m["coefficients"].as_array().unwrap().len(), k);
    assert_eq!(m["description"][2], "its variance depends on cyl");
}

#[test]
fn fit_prints_to_stdout_without_out() {
    let out = run(&["fit", "--data", &data("cars.csv"), "--family", "poisson", "--location", "cyl ~ wt"]);
    assert_eq!(out.status.code(), Some(0));
    let m: Json = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m["spec"]["family"], "poisson");
}

#[test]
fn engine_errors_exit_2_with_api_error() {
    let out = run(&["fit", "--data", &data("cars.csv"), "--family", "normal", "--location", "mpg ~ nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["code"], "unknown_variable");

    let out = run(&["fit", "--data", &data("cars.csv"), "--family", "poisson", "--location", "mpg ~ cyl", "--scale", "~ 1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["code"], "unsupported");

    let out = run(&["fit", "--data", "/no/such/file.csv", "--family", "normal", "--location", "y ~ 1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["code"], "not_found");

    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "check", "--data", &data("cars.csv"), "--chart", "{\"x\": \"hp\"}",
        "--draws", "0", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["code"], "domain_error");
}

#[test]
fn check_applies_pipeline_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "check", "--data", &data("cars.csv"),
        "--pipeline", r#"{"transforms": [{"column": "hp", "kind": "log"}], "filters": [{"column": "am", "op": "eq", "criterion": 1}]}"#,
        "--chart", r#"{"x": "hp", "y": "mpg", "column": "cyl"}"#,
        "--models", r#"[{"label": "hp", "family": "normal", "location": "mpg ~ hp"}]"#,
        "--draws", "4", "--seed", "9", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("hp: converged=true"));

    let layout: Json = serde_json::from_str(&std::fs::read_to_string(dir.path().join("layout.json")).unwrap()).unwrap();
    assert_eq!(layout["panels"].as_array().unwrap().len(), 2);
    assert_eq!(layout["facets"]["column"]["field"], "cyl");

    let csv = std::fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("source,draw,row,"));
    let n = lines.count();
    assert_eq!(n % 5, 0, "observed block plus four equal draw blocks");
    assert_eq!(layout["table"]["n_records"], n);
}

#[test]
fn serve_answers_health() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(BIN)
        .args(["serve", "--port", &port.to_string(), "--data-dir", &data("")])
        .env("RUST_LOG", "warn")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let body = loop {
        if let Ok(mut s) = TcpStream::connect(("127.0.0.1", port)) {
            s.write_all(b"GET /datasets/absences HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
            let mut buf = String::new();
            s.read_to_string(&mut buf).unwrap();
            break buf;
        }
        assert!(Instant::now() < deadline, "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    };
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(body.starts_with("HTTP/1.1 200"), "{body}");
    assert!(body.contains("\"n_rows\":517"), "{body}");
}
