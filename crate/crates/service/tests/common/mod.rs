//! Fixture catalogs and transport helpers shared by the service tests.
#![allow(dead_code)]

use std::path::Path;
use std::process::Output;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use nightpulse_core::catalog::YearMonth;
use nightpulse_core::raster::RasterGrid;
use nightpulse_core::synth::{build_catalog, three_blob_stack};
use nightpulse_service::api::{router, AppState};
use nightpulse_service::config::ApiConfig;
use nightpulse_service::ops::Engine;
use tempfile::TempDir;
use tower::ServiceExt;

pub struct Fixture {
    pub dir: TempDir,
    pub app: Router,
}

pub fn blob_frames() -> Vec<(YearMonth, RasterGrid)> {
    three_blob_stack(7).stack.frames().iter().map(|f| (f.time, f.grid.clone())).collect()
}

pub fn fixture_with(frames: &[(YearMonth, RasterGrid)], tweak: impl FnOnce(&mut ApiConfig)) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    build_catalog(dir.path(), frames).unwrap();
    let mut cfg = ApiConfig { data_dir: dir.path().to_path_buf(), ..ApiConfig::default() };
    tweak(&mut cfg);
    let app = router(AppState::new(Engine::open(&cfg).unwrap(), cfg));
    Fixture { dir, app }
}

pub fn fixture(frames: &[(YearMonth, RasterGrid)]) -> Fixture {
    fixture_with(frames, |_| {})
}

pub async fn call(app: &Router, method: &str, uri: &str, body: &str) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

pub async fn call_json(app: &Router, method: &str, uri: &str, body: &str) -> (StatusCode, serde_json::Value) {
    let (s, b) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(serde_json::Value::Null))
}

pub fn cli(data_dir: &Path, args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_nightpulse"))
        .arg("--data-dir")
        .arg(data_dir)
        .args(args)
        .env_remove("NIGHTPULSE_DATA_DIR")
        .output()
        .unwrap()
}

pub fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "cli failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}
