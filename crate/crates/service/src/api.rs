//! HTTP routes over an [`Engine`].

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use nightpulse_core::catalog::{RegionSelection, YearMonth};
use nightpulse_core::export::ExportFormat;
use nightpulse_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::ApiConfig;
use crate::ops::{
    ClusterRequest, CompareRequest, ContourRequest, Engine, GeocodeQuery, PipetteQuery, SceneRequest, SegmentRequest,
    SprawlRequest,
};
use crate::tiles::{render_tile, TileId};

/// Largest accepted overlay upload.
pub const OVERLAY_LIMIT: usize = 20 * 1024 * 1024;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, kind, message: message.into() }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            e if e.is_precondition() => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.kind(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.kind, "message": self.message}))).into_response()
    }
}

type ApiResult<T = Response> = Result<T, ApiError>;

#[derive(Debug, Clone, Serialize)]
pub struct OverlayLayer {
    pub layer_id: String,
    pub name: String,
    #[serde(skip)]
    pub source: Value,
}

#[derive(Debug, Default)]
struct Overlays {
    next: AtomicU64,
    layers: RwLock<BTreeMap<u64, OverlayLayer>>,
}

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Engine>,
    config: Arc<ApiConfig>,
    overlays: Arc<Overlays>,
}

impl AppState {
    pub fn new(engine: Engine, config: ApiConfig) -> Self {
        AppState { engine: Arc::new(engine), config: Arc::new(config), overlays: Arc::default() }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scenes", get(scenes))
        .route("/analytics/trend", post(trend))
        .route("/analytics/compare", post(compare))
        .route("/analytics/extrema", post(extrema))
        .route("/analytics/segment", post(segment))
        .route("/analytics/pipette", get(pipette))
        .route("/contours", post(contours))
        .route("/cluster", post(cluster))
        .route("/sprawl", post(sprawl))
        .route("/geocode", get(geocode))
        .route("/overlays", post(upload_overlay).get(list_overlays))
        .route("/overlays/{id}", get(get_overlay).delete(delete_overlay))
        .route("/tiles/{year}/{month}/{z}/{x}/{y}", get(tile))
        .route("/export/{id}", get(export))
        .layer(DefaultBodyLimit::max(OVERLAY_LIMIT))
        .with_state(state)
}

fn json_body(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

fn parse<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "InvalidRequest", e.to_string()))
}

/// Runs `f` on the blocking pool.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?
        .map_err(ApiError::from)
}

/// Like [`blocking`] but bounded by the configured job timeout.
async fn job<T: Send + 'static>(st: &AppState, f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> ApiResult<T> {
    match tokio::time::timeout(st.config.job_timeout, blocking(f)).await {
        Ok(r) => r,
        Err(_) => Err(ApiError::new(
            StatusCode::GATEWAY_TIMEOUT,
            "Timeout",
            format!("job exceeded {} ms", st.config.job_timeout.as_millis()),
        )),
    }
}

macro_rules! post_op {
    ($name:ident, $req:ty, $method:ident, $runner:ident) => {
        async fn $name(State(st): State<AppState>, raw: Bytes) -> ApiResult {
            let req: $req = parse(&raw)?;
            let engine = st.engine.clone();
            Ok(json_body($runner(&st, move || engine.$method(&req)).await?))
        }
    };
}

async fn plain<T: Send + 'static>(_: &AppState, f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> ApiResult<T> {
    blocking(f).await
}

post_op!(trend, RegionSelection, trend, plain);
post_op!(compare, CompareRequest, compare, plain);
post_op!(extrema, SceneRequest, extrema, plain);
post_op!(segment, SegmentRequest, segment, plain);
post_op!(contours, ContourRequest, contours, plain);
post_op!(cluster, ClusterRequest, cluster, job);
post_op!(sprawl, SprawlRequest, sprawl, job);

async fn scenes(State(st): State<AppState>) -> ApiResult {
    Ok(json_body(st.engine.scenes()?))
}

fn query_error(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, "InvalidRequest", e.to_string())
}

async fn pipette(
    State(st): State<AppState>,
    q: Result<Query<PipetteQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult {
    let Query(q) = q.map_err(query_error)?;
    let engine = st.engine.clone();
    Ok(json_body(blocking(move || engine.pipette(&q)).await?))
}

async fn geocode(
    State(st): State<AppState>,
    q: Result<Query<GeocodeQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult {
    let Query(q) = q.map_err(query_error)?;
    Ok(json_body(st.engine.geocode(&q)?))
}

#[derive(Deserialize)]
struct OverlayParams {
    name: Option<String>,
}

fn is_geojson(v: &Value) -> bool {
    const TYPES: [&str; 9] = [
        "FeatureCollection",
        "Feature",
        "Point",
        "MultiPoint",
        "LineString",
        "MultiLineString",
        "Polygon",
        "MultiPolygon",
        "GeometryCollection",
    ];
    match v.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => v.get("features").is_some_and(Value::is_array),
        Some("Feature") => v.get("geometry").is_some(),
        Some("GeometryCollection") => v.get("geometries").is_some_and(Value::is_array),
        Some(t) => TYPES.contains(&t) && v.get("coordinates").is_some_and(Value::is_array),
        None => false,
    }
}

async fn upload_overlay(State(st): State<AppState>, Query(p): Query<OverlayParams>, raw: Bytes) -> ApiResult {
    let source: Value = serde_json::from_slice(&raw)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "InvalidGeoJson", e.to_string()))?;
    if !is_geojson(&source) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "InvalidGeoJson", "not a GeoJSON object"));
    }
    let n = st.overlays.next.fetch_add(1, Ordering::Relaxed) + 1;
    let layer = OverlayLayer {
        layer_id: format!("overlay-{n}"),
        name: p.name.unwrap_or_else(|| format!("Overlay {n}")),
        source,
    };
    let out = serde_json::to_vec(&layer).expect("layer serializes");
    st.overlays.layers.write().expect("overlay lock poisoned").insert(n, layer);
    Ok((StatusCode::CREATED, json_body(out)).into_response())
}

async fn list_overlays(State(st): State<AppState>) -> ApiResult {
    let layers: Vec<OverlayLayer> =
        st.overlays.layers.read().expect("overlay lock poisoned").values().cloned().collect();
    Ok(json_body(serde_json::to_vec(&json!({ "overlays": layers })).expect("list serializes")))
}

fn overlay_key(id: &str) -> ApiResult<u64> {
    id.strip_prefix("overlay-")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("overlay {id}")))
}

async fn get_overlay(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let key = overlay_key(&id)?;
    let layers = st.overlays.layers.read().expect("overlay lock poisoned");
    let layer =
        layers.get(&key).ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("overlay {id}")))?;
    Ok(json_body(serde_json::to_vec(&layer.source).expect("overlay serializes")))
}

async fn delete_overlay(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let key = overlay_key(&id)?;
    match st.overlays.layers.write().expect("overlay lock poisoned").remove(&key) {
        Some(_) => Ok(StatusCode::NO_CONTENT.into_response()),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("overlay {id}"))),
    }
}

#[derive(Deserialize)]
struct RangeParams {
    lo: Option<f64>,
    hi: Option<f64>,
}

async fn tile(
    State(st): State<AppState>,
    Path((year, month, z, x, y)): Path<(i32, u8, u32, u32, String)>,
    range: Result<Query<RangeParams>, axum::extract::rejection::QueryRejection>,
) -> ApiResult {
    let Query(range) = range.map_err(query_error)?;
    let y: u32 = y
        .strip_suffix(".png")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("tile {y}")))?;
    let tile = TileId::new(z, x, y)?;
    let time = YearMonth::new(year, month)?;
    let lo = range.lo.unwrap_or(st.config.range.0);
    let hi = range.hi.unwrap_or(st.config.range.1);
    let cmap = st.config.colormap;
    let engine = st.engine.clone();
    let png = blocking(move || {
        let grid = engine.scene_grid(time)?;
        render_tile(&grid, tile, lo, hi, cmap)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

#[derive(Deserialize)]
struct ExportParams {
    format: String,
}

async fn export(
    State(st): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<ExportParams>, axum::extract::rejection::QueryRejection>,
) -> ApiResult {
    let Query(q) = q.map_err(query_error)?;
    let format: ExportFormat = q.format.parse()?;
    let bytes = st.engine.export(&id, format)?;
    let disposition = format!("attachment; filename=\"{id}.{}\"", format.extension());
    Ok(([(header::CONTENT_TYPE, format.media_type().to_string()), (header::CONTENT_DISPOSITION, disposition)], bytes)
        .into_response())
}

/// Binds `config.bind` and serves until the process ends.
pub async fn serve(state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(state.config.bind).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
