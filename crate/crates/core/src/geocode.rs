//! Offline reverse geocoding against administrative boundary polygons.
//!
//! Containment uses the even-odd rule over all rings of a polygon, and a
//! point on any ring edge counts as inside. When several boundaries of one
//! level claim a point, one that strictly contains it wins; two strict
//! containers are a data error, and edge-only matches resolve to the first
//! boundary in file order.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Demo boundary set compiled into the library.
pub const BUNDLED_BOUNDARIES: &str = include_str!("../data/boundaries.geojson");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdminLevel {
    Country,
    State,
    City,
}

impl AdminLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            AdminLevel::Country => "country",
            AdminLevel::State => "state",
            AdminLevel::City => "city",
        }
    }
}

impl FromStr for AdminLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "country" => Ok(AdminLevel::Country),
            "state" => Ok(AdminLevel::State),
            "city" => Ok(AdminLevel::City),
            other => Err(Error::InvalidGeoJson(format!("unknown admin_level {other:?}"))),
        }
    }
}

/// Zoom thresholds: below `state_from` is country, below `city_from` is
/// state, anything higher is city.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoomLevelMap {
    pub state_from: u32,
    pub city_from: u32,
}

impl Default for ZoomLevelMap {
    fn default() -> Self {
        ZoomLevelMap { state_from: 5, city_from: 9 }
    }
}

impl ZoomLevelMap {
    pub fn new(state_from: u32, city_from: u32) -> Result<Self> {
        if state_from > city_from {
            return Err(Error::InvalidParameter(format!("zoom thresholds out of order: {state_from} > {city_from}")));
        }
        Ok(ZoomLevelMap { state_from, city_from })
    }

    pub fn level(&self, zoom: u32) -> AdminLevel {
        if zoom < self.state_from {
            AdminLevel::Country
        } else if zoom < self.city_from {
            AdminLevel::State
        } else {
            AdminLevel::City
        }
    }
}

/// Closed ring of `[lon, lat]` positions, first equal to last.
pub type Ring = Vec<[f64; 2]>;

/// Outer ring (counterclockwise) followed by holes (clockwise).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub rings: Vec<Ring>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Containment {
    Outside,
    OnEdge,
    Inside,
}

impl Polygon {
    /// Validates closure and simplicity, then orients the rings.
    pub fn new(mut rings: Vec<Ring>) -> Result<Self> {
        if rings.is_empty() {
            return Err(Error::InvalidGeoJson("polygon without rings".into()));
        }
        for (k, ring) in rings.iter_mut().enumerate() {
            validate_ring(ring)?;
            let ccw = signed_area(ring) > 0.0;
            if ccw != (k == 0) {
                ring.reverse();
            }
        }
        Ok(Polygon { rings })
    }

    pub fn contains(&self, lon: f64, lat: f64) -> Containment {
        let mut inside = false;
        for ring in &self.rings {
            for w in ring.windows(2) {
                let (a, b) = (w[0], w[1]);
                if on_segment(a, b, [lon, lat]) {
                    return Containment::OnEdge;
                }
                if (a[1] > lat) != (b[1] > lat) {
                    let x = a[0] + (lat - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                    if lon < x {
                        inside = !inside;
                    }
                }
            }
        }
        if inside {
            Containment::Inside
        } else {
            Containment::Outside
        }
    }
}

fn signed_area(ring: &[[f64; 2]]) -> f64 {
    ring.windows(2).map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1]).sum::<f64>() / 2.0
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    cross(a, b, p) == 0.0
        && p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

fn segments_touch(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (d1, d2) = (cross(c, d, a), cross(c, d, b));
    let (d3, d4) = (cross(a, b, c), cross(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    on_segment(c, d, a) || on_segment(c, d, b) || on_segment(a, b, c) || on_segment(a, b, d)
}

fn validate_ring(ring: &[[f64; 2]]) -> Result<()> {
    if ring.len() < 4 {
        return Err(Error::InvalidGeoJson("ring needs at least four positions".into()));
    }
    if ring.first() != ring.last() {
        return Err(Error::InvalidGeoJson("ring is not closed".into()));
    }
    if let Some(p) = ring.iter().find(|p| !(p[0].abs() <= 180.0 && p[1].abs() <= 90.0)) {
        return Err(Error::InvalidGeoJson(format!("position {p:?} out of range")));
    }
    let n = ring.len() - 1;
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if !adjacent && segments_touch(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                return Err(Error::InvalidGeoJson(format!("ring self-intersects at edges {i} and {j}")));
            }
        }
    }
    if signed_area(ring) == 0.0 {
        return Err(Error::InvalidGeoJson("degenerate ring".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdminBoundary {
    pub name: String,
    pub admin_level: AdminLevel,
    /// Parts of a (multi)polygon.
    pub polygons: Vec<Polygon>,
}

impl AdminBoundary {
    pub fn contains(&self, lon: f64, lat: f64) -> Containment {
        let mut best = Containment::Outside;
        for p in &self.polygons {
            match p.contains(lon, lat) {
                Containment::Inside => return Containment::Inside,
                Containment::OnEdge => best = Containment::OnEdge,
                Containment::Outside => {}
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GeocodeHit {
    pub name: String,
    pub level: AdminLevel,
}

/// Immutable boundary set.
#[derive(Debug, Clone)]
pub struct Geocoder {
    boundaries: Vec<AdminBoundary>,
    zoom: ZoomLevelMap,
}

fn positions(v: &Value) -> Result<Ring> {
    let arr = v.as_array().ok_or_else(|| Error::InvalidGeoJson("ring is not an array".into()))?;
    arr.iter()
        .map(|p| match p.as_array().map(|c| c.as_slice()) {
            Some([x, y, ..]) => match (x.as_f64(), y.as_f64()) {
                (Some(x), Some(y)) => Ok([x, y]),
                _ => Err(Error::InvalidGeoJson("non-numeric coordinate".into())),
            },
            _ => Err(Error::InvalidGeoJson("position needs two coordinates".into())),
        })
        .collect()
}

fn polygon(v: &Value) -> Result<Polygon> {
    let rings = v.as_array().ok_or_else(|| Error::InvalidGeoJson("polygon is not an array".into()))?;
    Polygon::new(rings.iter().map(positions).collect::<Result<_>>()?)
}

impl Geocoder {
    pub fn new(boundaries: Vec<AdminBoundary>, zoom: ZoomLevelMap) -> Self {
        Geocoder { boundaries, zoom }
    }

    /// Reads a FeatureCollection whose features carry `name` and
    /// `admin_level` properties and Polygon or MultiPolygon geometry.
    pub fn from_geojson(text: &str, zoom: ZoomLevelMap) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| Error::InvalidGeoJson(e.to_string()))?;
        if doc["type"] != "FeatureCollection" {
            return Err(Error::InvalidGeoJson("expected a FeatureCollection".into()));
        }
        let features = doc["features"].as_array().ok_or_else(|| Error::InvalidGeoJson("missing features".into()))?;
        let mut boundaries = Vec::with_capacity(features.len());
        for f in features {
            let props = &f["properties"];
            let name =
                props["name"].as_str().ok_or_else(|| Error::InvalidGeoJson("feature without name".into()))?.to_string();
            let admin_level = props["admin_level"]
                .as_str()
                .ok_or_else(|| Error::InvalidGeoJson(format!("{name}: missing admin_level")))?
                .parse()?;
            let geom = &f["geometry"];
            let coords = &geom["coordinates"];
            let polygons = match geom["type"].as_str() {
                Some("Polygon") => vec![polygon(coords)?],
                Some("MultiPolygon") => coords
                    .as_array()
                    .ok_or_else(|| Error::InvalidGeoJson(format!("{name}: bad MultiPolygon")))?
                    .iter()
                    .map(polygon)
                    .collect::<Result<_>>()?,
                other => return Err(Error::InvalidGeoJson(format!("{name}: unsupported geometry {other:?}"))),
            };
            boundaries.push(AdminBoundary { name, admin_level, polygons });
        }
        Ok(Geocoder { boundaries, zoom })
    }

    /// The demo boundary set shipped with the crate.
    pub fn bundled(zoom: ZoomLevelMap) -> Self {
        Self::from_geojson(BUNDLED_BOUNDARIES, zoom).expect("bundled boundaries are valid")
    }

    pub fn boundaries(&self) -> &[AdminBoundary] {
        &self.boundaries
    }

    pub fn zoom_map(&self) -> ZoomLevelMap {
        self.zoom
    }

    /// Name of the boundary at the zoom-mapped level containing the point.
    pub fn reverse_geocode(&self, lon: f64, lat: f64, zoom: u32) -> Result<GeocodeHit> {
        self.lookup(lon, lat, self.zoom.level(zoom))
    }

    pub fn lookup(&self, lon: f64, lat: f64, level: AdminLevel) -> Result<GeocodeHit> {
        if !(lon.abs() <= 180.0 && lat.abs() <= 90.0) {
            return Err(Error::InvalidParameter(format!("coordinates ({lon}, {lat}) out of range")));
        }
        let mut strict = Vec::new();
        let mut edge = None;
        for b in self.boundaries.iter().filter(|b| b.admin_level == level) {
            match b.contains(lon, lat) {
                Containment::Inside => strict.push(b),
                Containment::OnEdge => {
                    edge.get_or_insert(b);
                }
                Containment::Outside => {}
            }
        }
        let hit = match strict.as_slice() {
            [one] => *one,
            [] => edge.ok_or_else(|| Error::NotFound(format!("no {} boundary at ({lon}, {lat})", level.as_str())))?,
            many => {
                let names: Vec<_> = many.iter().map(|b| b.name.as_str()).collect();
                return Err(Error::AmbiguousBoundaries(names.join(", ")));
            }
        };
        Ok(GeocodeHit { name: hit.name.clone(), level })
    }
}
