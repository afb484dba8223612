//! Request types and the JSON bodies shared by the HTTP API and the CLI.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nightpulse_core::analytics::{compare, extrema, pipette, segment_count, trend};
use nightpulse_core::catalog::{Catalog, RegionSelection, YearMonth};
use nightpulse_core::contour::marching_squares;
use nightpulse_core::export::{clusters_geojson, contours_geojson, ExportFormat, Product};
use nightpulse_core::geocode::Geocoder;
use nightpulse_core::morphology::{sprawl_change, StructuringElement};
use nightpulse_core::raster::{BBox, RasterGrid};
use nightpulse_core::stcluster::{nightpulse_dbscan, FeatureParams};
use nightpulse_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::ApiConfig;
use crate::store::ProductStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Period {
    pub from: YearMonth,
    pub to: YearMonth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareRequest {
    pub bbox: BBox,
    pub period_a: Period,
    pub period_b: Period,
}

/// One scene windowed to a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneRequest {
    pub bbox: BBox,
    pub time: YearMonth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourRequest {
    pub bbox: BBox,
    pub time: YearMonth,
    /// Defaults to four levels evenly spaced inside the value range.
    #[serde(default)]
    pub levels: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentRequest {
    pub bbox: BBox,
    pub time: YearMonth,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterRequest {
    #[serde(flatten)]
    pub region: RegionSelection,
    pub params: FeatureParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SprawlRequest {
    pub bbox: BBox,
    pub t1: YearMonth,
    pub t2: YearMonth,
    pub threshold: f64,
    #[serde(default)]
    pub se: StructuringElement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipetteQuery {
    pub lon: f64,
    pub lat: f64,
    pub year: i32,
    pub month: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeocodeQuery {
    pub lon: f64,
    pub lat: f64,
    pub zoom: u32,
}

#[derive(Serialize)]
struct WithId<'a, T: Serialize> {
    product_id: &'a str,
    #[serde(flatten)]
    result: &'a T,
}

fn body(v: &impl Serialize) -> Result<Vec<u8>> {
    serde_json::to_vec(v).map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// Read-only view of a catalog snapshot plus the product store.
#[derive(Debug)]
pub struct Engine {
    catalog: Catalog,
    geocoder: Geocoder,
    store: ProductStore,
    grids: Mutex<HashMap<YearMonth, Arc<RasterGrid>>>,
}

impl Engine {
    pub fn new(catalog: Catalog, geocoder: Geocoder) -> Self {
        let store = ProductStore::new(catalog.root());
        Engine { catalog, geocoder, store, grids: Mutex::new(HashMap::new()) }
    }

    /// Opens the catalog under `cfg.data_dir` with the bundled boundaries.
    pub fn open(cfg: &ApiConfig) -> Result<Self> {
        Ok(Engine::new(Catalog::open(&cfg.data_dir)?, Geocoder::bundled(cfg.zoom)))
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn store(&self) -> &ProductStore {
        &self.store
    }

    /// Full-resolution grid of one scene, cached.
    pub fn scene_grid(&self, time: YearMonth) -> Result<Arc<RasterGrid>> {
        if let Some(g) = self.grids.lock().expect("grid cache poisoned").get(&time) {
            return Ok(g.clone());
        }
        let scene = self.catalog.scene(time).ok_or_else(|| Error::NotFound(format!("scene {time}")))?;
        let grid = Arc::new(self.catalog.load(scene)?);
        self.grids.lock().expect("grid cache poisoned").insert(time, grid.clone());
        Ok(grid)
    }

    fn windowed(&self, bbox: BBox, time: YearMonth) -> Result<RasterGrid> {
        if self.catalog.scene(time).is_none() {
            return Err(Error::NotFound(format!("scene {time}")));
        }
        let stack = self.catalog.select(&RegionSelection::new(bbox, time, time)?)?;
        Ok(stack.frames()[0].grid.clone())
    }

    pub fn scenes(&self) -> Result<Vec<u8>> {
        let stats = self.catalog.stats();
        body(&json!({
            "scene_count": stats.scene_count,
            "total_bytes": stats.total_bytes,
            "scenes": self.catalog.scenes(),
        }))
    }

    pub fn trend(&self, region: &RegionSelection) -> Result<Vec<u8>> {
        let series = trend(&self.catalog.select(region)?)?;
        let id = self.store.put(&Product::Trend(series.clone()))?;
        body(&WithId { product_id: &id, result: &series })
    }

    pub fn compare(&self, req: &CompareRequest) -> Result<Vec<u8>> {
        let a = self.catalog.select(&RegionSelection::new(req.bbox, req.period_a.from, req.period_a.to)?)?;
        let b = self.catalog.select(&RegionSelection::new(req.bbox, req.period_b.from, req.period_b.to)?)?;
        let result = compare(&a, &b)?;
        let id = self.store.put(&Product::Compare(result.clone()))?;
        body(&WithId { product_id: &id, result: &result })
    }

    pub fn extrema(&self, req: &SceneRequest) -> Result<Vec<u8>> {
        body(&extrema(&self.windowed(req.bbox, req.time)?)?)
    }

    pub fn segment(&self, req: &SegmentRequest) -> Result<Vec<u8>> {
        body(&segment_count(&self.windowed(req.bbox, req.time)?, req.lo, req.hi)?)
    }

    pub fn pipette(&self, q: &PipetteQuery) -> Result<Vec<u8>> {
        let grid = self.scene_grid(YearMonth::new(q.year, q.month)?)?;
        body(&pipette(&grid, q.lon, q.lat)?)
    }

    pub fn contours(&self, req: &ContourRequest) -> Result<Vec<u8>> {
        let grid = self.windowed(req.bbox, req.time)?;
        let levels = match &req.levels {
            Some(l) => l.clone(),
            None => {
                let lo = f64::from(grid.min_valid().ok_or(Error::AllNodata)?);
                let hi = f64::from(grid.max_valid().ok_or(Error::AllNodata)?);
                (1..=4).map(|k| lo + (hi - lo) * f64::from(k) / 5.0).collect()
            }
        };
        let set = marching_squares(&grid, &levels)?;
        let mut geo = contours_geojson(&set);
        let id = self.store.put(&Product::Contours(set))?;
        geo["product_id"] = Value::String(id);
        body(&geo)
    }

    pub fn cluster(&self, req: &ClusterRequest) -> Result<Vec<u8>> {
        let result = nightpulse_dbscan(&self.catalog.select(&req.region)?, &req.params)?;
        let geojson = clusters_geojson(&result);
        let out = json!({
            "observation_count": result.observations.len(),
            "cluster_count": result.labels.cluster_count,
            "noise_count": result.labels.noise_count(),
            "summaries": result.summaries,
            "geojson": geojson,
        });
        let id = self.store.put(&Product::Clusters(result))?;
        body(&WithId { product_id: &id, result: &out })
    }

    pub fn sprawl(&self, req: &SprawlRequest) -> Result<Vec<u8>> {
        let a = self.windowed(req.bbox, req.t1)?;
        let b = self.windowed(req.bbox, req.t2)?;
        let report = sprawl_change(&a, &b, req.threshold, &req.se)?;
        let id = self.store.put(&Product::Change(report.clone()))?;
        body(&WithId { product_id: &id, result: &report })
    }

    pub fn geocode(&self, q: &GeocodeQuery) -> Result<Vec<u8>> {
        body(&self.geocoder.reverse_geocode(q.lon, q.lat, q.zoom)?)
    }

    pub fn export(&self, id: &str, format: ExportFormat) -> Result<Vec<u8>> {
        self.store.get(id, format)
    }
}
