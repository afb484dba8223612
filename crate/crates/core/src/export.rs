//! Rendering derived products to GeoJSON, CSV and GeoTIFF.
//!
//! | product   | geojson | csv | geotiff |
//! |-----------|---------|-----|---------|
//! | trend     |         | ✓   |         |
//! | compare   |         | ✓   | ✓ (diff grid) |
//! | contours  | ✓       |     |         |
//! | clusters  | ✓       | ✓   |         |
//! | change    | ✓       | ✓   |         |
//! | raster    |         |     | ✓       |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analytics::{CompareResult, TrendSeries};
use crate::contour::{Contour, ContourSet};
use crate::error::{Error, Result};
use crate::morphology::{ChangePattern, ChangeReport};
use crate::raster::geotiff::encode_geotiff;
use crate::raster::{BBox, RasterGrid};
use crate::stcluster::ClusterResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    GeoJson,
    Csv,
    GeoTiff,
}

impl ExportFormat {
    pub const ALL: [ExportFormat; 3] = [ExportFormat::GeoJson, ExportFormat::Csv, ExportFormat::GeoTiff];

    pub fn as_str(self) -> &'static str {
        match self {
            ExportFormat::GeoJson => "geojson",
            ExportFormat::Csv => "csv",
            ExportFormat::GeoTiff => "geotiff",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::GeoJson => "geojson",
            ExportFormat::Csv => "csv",
            ExportFormat::GeoTiff => "tif",
        }
    }

    pub fn media_type(self) -> &'static str {
        match self {
            ExportFormat::GeoJson => "application/geo+json",
            ExportFormat::Csv => "text/csv",
            ExportFormat::GeoTiff => "image/tiff",
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "geojson" | "json" => Ok(ExportFormat::GeoJson),
            "csv" => Ok(ExportFormat::Csv),
            "geotiff" | "tiff" | "tif" => Ok(ExportFormat::GeoTiff),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Any derived result that can be exported.
#[derive(Debug, Clone, PartialEq)]
pub enum Product {
    Trend(TrendSeries),
    Compare(CompareResult),
    Contours(ContourSet),
    Clusters(ClusterResult),
    Change(ChangeReport),
    Raster(RasterGrid),
}

impl Product {
    pub fn kind(&self) -> &'static str {
        match self {
            Product::Trend(_) => "trend",
            Product::Compare(_) => "compare",
            Product::Contours(_) => "contours",
            Product::Clusters(_) => "clusters",
            Product::Change(_) => "change",
            Product::Raster(_) => "raster",
        }
    }

    pub fn formats(&self) -> &'static [ExportFormat] {
        use ExportFormat::*;
        match self {
            Product::Trend(_) => &[Csv],
            Product::Compare(_) => &[Csv, GeoTiff],
            Product::Contours(_) => &[GeoJson],
            Product::Clusters(_) | Product::Change(_) => &[GeoJson, Csv],
            Product::Raster(_) => &[GeoTiff],
        }
    }

    fn unsupported(&self, format: ExportFormat) -> Error {
        Error::UnsupportedFormat(format!("{} products cannot be exported as {format}", self.kind()))
    }

    /// Encoded bytes of the product in `format`.
    pub fn render(&self, format: ExportFormat) -> Result<Vec<u8>> {
        match (self, format) {
            (Product::Trend(t), ExportFormat::Csv) => trend_csv(t),
            (Product::Compare(c), ExportFormat::Csv) => compare_csv(c),
            (Product::Compare(c), ExportFormat::GeoTiff) => encode_geotiff(&c.diff_grid),
            (Product::Contours(c), ExportFormat::GeoJson) => json_bytes(&contours_geojson(c)),
            (Product::Clusters(c), ExportFormat::GeoJson) => json_bytes(&clusters_geojson(c)),
            (Product::Clusters(c), ExportFormat::Csv) => clusters_csv(c),
            (Product::Change(c), ExportFormat::GeoJson) => json_bytes(&change_geojson(c)),
            (Product::Change(c), ExportFormat::Csv) => change_csv(c),
            (Product::Raster(g), ExportFormat::GeoTiff) => encode_geotiff(g),
            _ => Err(self.unsupported(format)),
        }
    }
}

/// Writes `product` as `format` to `path`.
pub fn export(product: &Product, format: ExportFormat, path: impl AsRef<Path>) -> Result<PathBuf> {
    let bytes = product.render(format)?;
    std::fs::write(path.as_ref(), bytes)?;
    Ok(path.as_ref().to_path_buf())
}

fn json_bytes(v: &Value) -> Result<Vec<u8>> {
    serde_json::to_vec(v).map_err(|e| Error::Io(std::io::Error::other(e)))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn trend_csv(t: &TrendSeries) -> Result<Vec<u8>> {
    csv_bytes(
        &["year", "month", "mean", "sum", "pixel_count"],
        t.points.iter().map(|p| {
            vec![p.year.to_string(), p.month.to_string(), opt(p.mean), p.sum.to_string(), p.pixel_count.to_string()]
        }),
    )
}

fn compare_csv(c: &CompareResult) -> Result<Vec<u8>> {
    csv_bytes(
        &["mean_a", "mean_b", "abs_diff", "pct_change"],
        [vec![c.mean_a.to_string(), c.mean_b.to_string(), c.abs_diff.to_string(), opt(c.pct_change)]],
    )
}

/// Lon/lat positions of a contour's vertices.
pub fn contour_coordinates(set: &ContourSet, contour: &Contour) -> Vec<[f64; 2]> {
    contour
        .vertices
        .iter()
        .map(|p| {
            let (lon, lat) = set.transform.frac_to_geo(p.x, p.y);
            [lon, lat]
        })
        .collect()
}

/// One LineString feature per contour with `level` and `closed` properties.
pub fn contours_geojson(set: &ContourSet) -> Value {
    let features: Vec<Value> = set
        .contours
        .iter()
        .map(|c| {
            json!({
                "type": "Feature",
                "properties": {"level": c.level, "closed": c.closed},
                "geometry": {"type": "LineString", "coordinates": contour_coordinates(set, c)},
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

/// A contour read back from GeoJSON, in lon/lat.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoContour {
    pub level: f64,
    pub closed: bool,
    pub coordinates: Vec<[f64; 2]>,
}

/// Parses a contour FeatureCollection written by [`contours_geojson`].
pub fn import_contours_geojson(text: &str) -> Result<Vec<GeoContour>> {
    let bad = |m: &str| Error::InvalidGeoJson(m.to_string());
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::InvalidGeoJson(e.to_string()))?;
    let features = doc["features"].as_array().ok_or_else(|| bad("missing features"))?;
    features
        .iter()
        .map(|f| {
            let level = f["properties"]["level"].as_f64().ok_or_else(|| bad("missing level"))?;
            let closed = f["properties"]["closed"].as_bool().unwrap_or(false);
            if f["geometry"]["type"] != "LineString" {
                return Err(bad("expected LineString geometry"));
            }
            let coordinates = f["geometry"]["coordinates"]
                .as_array()
                .ok_or_else(|| bad("missing coordinates"))?
                .iter()
                .map(|p| match (p[0].as_f64(), p[1].as_f64()) {
                    (Some(x), Some(y)) => Ok([x, y]),
                    _ => Err(bad("bad position")),
                })
                .collect::<Result<_>>()?;
            Ok(GeoContour { level, closed, coordinates })
        })
        .collect()
}

/// Clustered observations as Point features; noise is omitted.
pub fn clusters_geojson(r: &ClusterResult) -> Value {
    let features: Vec<Value> = r
        .observations
        .iter()
        .zip(&r.labels.labels)
        .filter_map(|(o, l)| {
            let cluster = l.cluster()?;
            let (lon, lat) = r.transform.pixel_center(o.x, o.y);
            Some(json!({
                "type": "Feature",
                "properties": {
                    "cluster": cluster,
                    "t": o.t,
                    "time": r.times[o.t].to_string(),
                    "intensity": o.intensity,
                },
                "geometry": {"type": "Point", "coordinates": [lon, lat]},
            }))
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

fn clusters_csv(r: &ClusterResult) -> Result<Vec<u8>> {
    csv_bytes(
        &["cluster", "size", "mean_intensity", "time_start", "time_end", "min_lon", "min_lat", "max_lon", "max_lat"],
        r.summaries.iter().map(|s| {
            let b: [f64; 4] = s.bbox.into();
            let mut row = vec![
                s.cluster.to_string(),
                s.size.to_string(),
                s.mean_intensity.to_string(),
                s.time_start.to_string(),
                s.time_end.to_string(),
            ];
            row.extend(b.iter().map(|v| v.to_string()));
            row
        }),
    )
}

fn bbox_polygon(b: &BBox) -> Value {
    json!([[
        [b.min_lon, b.min_lat],
        [b.max_lon, b.min_lat],
        [b.max_lon, b.max_lat],
        [b.min_lon, b.max_lat],
        [b.min_lon, b.min_lat],
    ]])
}

/// Change regions as bounding-box polygons tagged with their pattern.
pub fn change_geojson(r: &ChangeReport) -> Value {
    let features: Vec<Value> = ChangePattern::ALL
        .iter()
        .flat_map(|&p| r.regions(p).iter().map(move |m| (p, m)))
        .map(|(p, m)| {
            json!({
                "type": "Feature",
                "properties": {
                    "pattern": p.as_str(),
                    "region_id": m.region_id,
                    "area_pixels": m.area_pixels,
                    "centroid_lon": m.centroid_lon,
                    "centroid_lat": m.centroid_lat,
                },
                "geometry": {"type": "Polygon", "coordinates": bbox_polygon(&m.bbox)},
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

fn change_csv(r: &ChangeReport) -> Result<Vec<u8>> {
    let rows = ChangePattern::ALL.iter().flat_map(|&p| {
        r.regions(p).iter().map(move |m| {
            vec![
                p.as_str().to_string(),
                m.region_id.to_string(),
                m.area_pixels.to_string(),
                m.centroid_lon.to_string(),
                m.centroid_lat.to_string(),
            ]
        })
    });
    csv_bytes(&["pattern", "region_id", "area_pixels", "centroid_lon", "centroid_lat"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::TrendPoint;
    use crate::contour::marching_squares;
    use crate::morphology::{sprawl_change, StructuringElement};
    use crate::raster::GeoTransform;

    fn grid() -> RasterGrid {
        let t = GeoTransform::new(10.0, 50.0, 0.25, 0.25, 3, 3).unwrap();
        RasterGrid::new(t, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], -1.0).unwrap()
    }

    #[test]
    fn format_parsing() {
        assert_eq!("GeoJSON".parse::<ExportFormat>().unwrap(), ExportFormat::GeoJson);
        assert_eq!("tif".parse::<ExportFormat>().unwrap(), ExportFormat::GeoTiff);
        assert!(matches!("shp".parse::<ExportFormat>(), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn trend_csv_schema() {
        let t = TrendSeries {
            points: vec![
                TrendPoint { year: 2015, month: 1, mean: Some(1.5), sum: 6.0, pixel_count: 4 },
                TrendPoint { year: 2015, month: 2, mean: None, sum: 0.0, pixel_count: 0 },
            ],
        };
        let out = String::from_utf8(Product::Trend(t).render(ExportFormat::Csv).unwrap()).unwrap();
        assert_eq!(out, "year,month,mean,sum,pixel_count\r\n2015,1,1.5,6,4\r\n2015,2,,0,0\r\n");
    }

    #[test]
    fn unsupported_pairs() {
        let p = Product::Trend(TrendSeries { points: vec![] });
        assert!(matches!(p.render(ExportFormat::GeoTiff), Err(Error::UnsupportedFormat(_))));
        let p = Product::Raster(grid());
        assert!(matches!(p.render(ExportFormat::Csv), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn contour_geojson_round_trip() {
        let set = marching_squares(&grid(), &[0.5]).unwrap();
        let text = String::from_utf8(Product::Contours(set.clone()).render(ExportFormat::GeoJson).unwrap()).unwrap();
        let back = import_contours_geojson(&text).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].level, 0.5);
        assert!(back[0].closed);
        assert_eq!(back[0].coordinates, contour_coordinates(&set, &set.contours[0]));
        assert_eq!(back[0].coordinates[0], [10.375, 49.75]);
    }

    #[test]
    fn change_csv_schema() {
        let t = GeoTransform::new(0.0, 0.0, 1.0, 1.0, 7, 7).unwrap();
        let a = RasterGrid::from_fn(t, -1.0, |c, r| if c.abs_diff(3) <= 1 && r.abs_diff(3) <= 1 { 9.0 } else { 0.0 })
            .unwrap();
        let b = RasterGrid::from_fn(t, -1.0, |_, _| 0.0).unwrap();
        let r = sprawl_change(&a, &b, 5.0, &StructuringElement::default()).unwrap();
        let out = String::from_utf8(Product::Change(r).render(ExportFormat::Csv).unwrap()).unwrap();
        let mut lines = out.lines();
        assert_eq!(lines.next(), Some("pattern,region_id,area_pixels,centroid_lon,centroid_lat"));
        assert_eq!(lines.next(), Some("shrink,1,9,3.5,-3.5"));
    }

    #[test]
    fn geotiff_export_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = export(&Product::Raster(grid()), ExportFormat::GeoTiff, dir.path().join("g.tif")).unwrap();
        let back = crate::raster::geotiff::read_geotiff(path).unwrap();
        assert_eq!(back, grid());
    }
}
