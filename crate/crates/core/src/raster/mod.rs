//! Georeferenced rasters, windowing and threshold masks.
//!
//! A [`RasterGrid`] is a row-major field of radiance samples in
//! nW·cm⁻²·sr⁻¹ with a nodata sentinel. Pixel membership in a geographic
//! box is decided by pixel-center containment, and every threshold
//! comparison is inclusive (`value >= T`).

pub mod geotiff;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned bounding box in degrees: `(min_lon, min_lat, max_lon, max_lat)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", from = "[f64; 4]")]
pub struct BBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.min_lon, b.min_lat, b.max_lon, b.max_lat]
    }
}

impl From<[f64; 4]> for BBox {
    fn from(a: [f64; 4]) -> Self {
        BBox { min_lon: a[0], min_lat: a[1], max_lon: a[2], max_lat: a[3] }
    }
}

impl BBox {
    /// Builds a box, rejecting inverted, empty or non-finite corners.
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self> {
        let b = BBox { min_lon, min_lat, max_lon, max_lat };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.min_lon, self.min_lat, self.max_lon, self.max_lat].iter().all(|v| v.is_finite());
        if !finite || self.min_lon >= self.max_lon || self.min_lat >= self.max_lat {
            return Err(Error::InvalidParameter(format!(
                "bbox must satisfy min < max on both axes, got {:?}",
                <[f64; 4]>::from(*self)
            )));
        }
        Ok(())
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        lon >= self.min_lon && lon <= self.max_lon && lat >= self.min_lat && lat <= self.max_lat
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.min_lon <= other.max_lon
            && other.min_lon <= self.max_lon
            && self.min_lat <= other.max_lat
            && other.min_lat <= self.max_lat
    }

    /// Closed intersection; `None` when the boxes are disjoint.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let b = BBox {
            min_lon: self.min_lon.max(other.min_lon),
            min_lat: self.min_lat.max(other.min_lat),
            max_lon: self.max_lon.min(other.max_lon),
            max_lat: self.max_lat.min(other.max_lat),
        };
        (b.min_lon <= b.max_lon && b.min_lat <= b.max_lat).then_some(b)
    }
}

/// Affine, axis-aligned mapping between pixel indices and lon/lat.
///
/// `origin_lon`/`origin_lat` locate the outer top-left corner of pixel
/// `(0, 0)`; rows advance southward by `pixel_height`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub origin_lon: f64,
    pub origin_lat: f64,
    pub pixel_width: f64,
    pub pixel_height: f64,
    pub cols: usize,
    pub rows: usize,
}

const EXTENT_SLACK: f64 = 1e-6;

impl GeoTransform {
    pub fn new(
        origin_lon: f64,
        origin_lat: f64,
        pixel_width: f64,
        pixel_height: f64,
        cols: usize,
        rows: usize,
    ) -> Result<Self> {
        let t = GeoTransform { origin_lon, origin_lat, pixel_width, pixel_height, cols, rows };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cols == 0 || self.rows == 0 {
            return Err(Error::UnsupportedLayout("raster has zero rows or columns".into()));
        }
        if !(self.pixel_width.is_finite() && self.pixel_width > 0.0)
            || !(self.pixel_height.is_finite() && self.pixel_height > 0.0)
        {
            return Err(Error::UnsupportedLayout(format!(
                "pixel size must be positive, got {} x {}",
                self.pixel_width, self.pixel_height
            )));
        }
        let e = self.extent();
        if !(e.min_lon >= -180.0 - EXTENT_SLACK
            && e.max_lon <= 180.0 + EXTENT_SLACK
            && e.min_lat >= -90.0 - EXTENT_SLACK
            && e.max_lat <= 90.0 + EXTENT_SLACK)
        {
            return Err(Error::UnsupportedLayout(format!(
                "extent {:?} leaves the lon/lat domain",
                <[f64; 4]>::from(e)
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center_lon(&self, col: usize) -> f64 {
        self.origin_lon + (col as f64 + 0.5) * self.pixel_width
    }

    pub fn center_lat(&self, row: usize) -> f64 {
        self.origin_lat - (row as f64 + 0.5) * self.pixel_height
    }

    /// Lon/lat of a pixel center.
    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        (self.center_lon(col), self.center_lat(row))
    }

    /// Maps fractional pixel coordinates, with `(0, 0)` at the center of the
    /// top-left pixel, to lon/lat.
    pub fn frac_to_geo(&self, x: f64, y: f64) -> (f64, f64) {
        (self.origin_lon + (x + 0.5) * self.pixel_width, self.origin_lat - (y + 0.5) * self.pixel_height)
    }

    /// Inverse of [`frac_to_geo`](Self::frac_to_geo).
    pub fn geo_to_frac(&self, lon: f64, lat: f64) -> (f64, f64) {
        ((lon - self.origin_lon) / self.pixel_width - 0.5, (self.origin_lat - lat) / self.pixel_height - 0.5)
    }

    /// Outer extent, pixel edges included.
    pub fn extent(&self) -> BBox {
        BBox {
            min_lon: self.origin_lon,
            min_lat: self.origin_lat - self.rows as f64 * self.pixel_height,
            max_lon: self.origin_lon + self.cols as f64 * self.pixel_width,
            max_lat: self.origin_lat,
        }
    }

    /// The pixel whose cell contains the point. Points on a shared cell edge
    /// go to the east/south cell, except on the far extent edges, which
    /// belong to the last column/row.
    pub fn cell_containing(&self, lon: f64, lat: f64) -> Option<(usize, usize)> {
        if !self.extent().contains(lon, lat) {
            return None;
        }
        let fx = ((lon - self.origin_lon) / self.pixel_width).floor();
        let fy = ((self.origin_lat - lat) / self.pixel_height).floor();
        let col = (fx.max(0.0) as usize).min(self.cols - 1);
        let row = (fy.max(0.0) as usize).min(self.rows - 1);
        Some((col, row))
    }

    /// Half-open column and row index ranges whose pixel centers fall inside
    /// `bbox`; `None` if no center does.
    pub fn center_window(&self, bbox: &BBox) -> Option<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let cols = contiguous(self.cols, |c| {
            let lon = self.center_lon(c);
            lon >= bbox.min_lon && lon <= bbox.max_lon
        })?;
        let rows = contiguous(self.rows, |r| {
            let lat = self.center_lat(r);
            lat >= bbox.min_lat && lat <= bbox.max_lat
        })?;
        Some((cols, rows))
    }

    /// Transform of the sub-grid starting at `(col0, row0)`.
    pub fn sub(&self, col0: usize, row0: usize, cols: usize, rows: usize) -> GeoTransform {
        GeoTransform {
            origin_lon: self.origin_lon + col0 as f64 * self.pixel_width,
            origin_lat: self.origin_lat - row0 as f64 * self.pixel_height,
            pixel_width: self.pixel_width,
            pixel_height: self.pixel_height,
            cols,
            rows,
        }
    }
}

// Centers are monotone along each axis, so the matching indices form one run.
fn contiguous(n: usize, inside: impl Fn(usize) -> bool) -> Option<std::ops::Range<usize>> {
    let start = (0..n).find(|&i| inside(i))?;
    let end = (start..n).find(|&i| !inside(i)).unwrap_or(n);
    Some(start..end)
}

/// A georeferenced single-band radiance field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RasterGrid {
    transform: GeoTransform,
    values: Vec<f32>,
    nodata: f32,
}

impl RasterGrid {
    /// Builds a grid. Samples equal to `nodata` (or NaN) are missing; every
    /// other sample must be a finite, nonnegative radiance.
    pub fn new(transform: GeoTransform, values: Vec<f32>, nodata: f32) -> Result<Self> {
        transform.validate()?;
        if values.len() != transform.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for a {}x{} grid",
                values.len(),
                transform.cols,
                transform.rows
            )));
        }
        let grid = RasterGrid { transform, values, nodata };
        if let Some(bad) = grid.values.iter().find(|&&v| !grid.is_nodata(v) && !(v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("invalid radiance sample {bad}")));
        }
        Ok(grid)
    }

    /// Builds a derived field such as a difference grid, where valid samples
    /// may be negative but must be finite.
    pub fn new_signed(transform: GeoTransform, values: Vec<f32>, nodata: f32) -> Result<Self> {
        transform.validate()?;
        if values.len() != transform.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for a {}x{} grid",
                values.len(),
                transform.cols,
                transform.rows
            )));
        }
        let grid = RasterGrid { transform, values, nodata };
        if let Some(bad) = grid.values.iter().find(|&&v| !grid.is_nodata(v) && !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid sample {bad}")));
        }
        Ok(grid)
    }

    /// Grid filled from a `(col, row) -> value` function.
    pub fn from_fn(transform: GeoTransform, nodata: f32, mut f: impl FnMut(usize, usize) -> f32) -> Result<Self> {
        let mut values = Vec::with_capacity(transform.len());
        for row in 0..transform.rows {
            for col in 0..transform.cols {
                values.push(f(col, row));
            }
        }
        Self::new(transform, values, nodata)
    }

    pub fn transform(&self) -> &GeoTransform {
        &self.transform
    }

    pub fn rows(&self) -> usize {
        self.transform.rows
    }

    pub fn cols(&self) -> usize {
        self.transform.cols
    }

    pub fn nodata(&self) -> f32 {
        self.nodata
    }

    /// Raw row-major samples, nodata sentinels included.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn is_nodata(&self, v: f32) -> bool {
        v.is_nan() || v == self.nodata
    }

    /// Valid radiance at `(col, row)`, `None` for nodata.
    pub fn get(&self, col: usize, row: usize) -> Option<f32> {
        let v = self.values[row * self.cols() + col];
        (!self.is_nodata(v)).then_some(v)
    }

    /// Iterator over `(col, row, value)` for valid pixels in row-major order.
    pub fn valid_pixels(&self) -> impl Iterator<Item = (usize, usize, f32)> + '_ {
        let cols = self.cols();
        self.values.iter().enumerate().filter(|(_, &v)| !self.is_nodata(v)).map(move |(i, &v)| (i % cols, i / cols, v))
    }

    pub fn valid_count(&self) -> usize {
        self.valid_pixels().count()
    }

    /// Largest valid sample, `None` if everything is nodata.
    pub fn max_valid(&self) -> Option<f32> {
        self.valid_pixels().map(|(_, _, v)| v).reduce(f32::max)
    }

    pub fn min_valid(&self) -> Option<f32> {
        self.valid_pixels().map(|(_, _, v)| v).reduce(f32::min)
    }

    pub fn not_nodata_mask(&self) -> BinaryGrid {
        BinaryGrid { transform: self.transform, bits: self.values.iter().map(|&v| !self.is_nodata(v)).collect() }
    }
}

/// Sub-grid of every pixel whose center lies inside `bbox`.
pub fn window(grid: &RasterGrid, bbox: &BBox) -> Result<RasterGrid> {
    let t = grid.transform();
    let (cols, rows) = t.center_window(bbox).ok_or(Error::EmptyIntersection)?;
    let sub = t.sub(cols.start, rows.start, cols.len(), rows.len());
    let mut values = Vec::with_capacity(sub.len());
    for row in rows {
        let base = row * t.cols;
        values.extend_from_slice(&grid.values[base + cols.start..base + cols.end]);
    }
    Ok(RasterGrid { transform: sub, values, nodata: grid.nodata })
}

/// `true` where the sample is valid and `>= threshold`.
pub fn binarize(grid: &RasterGrid, threshold: f64) -> BinaryGrid {
    BinaryGrid {
        transform: grid.transform,
        bits: grid.values.iter().map(|&v| !grid.is_nodata(v) && f64::from(v) >= threshold).collect(),
    }
}

/// `true` where the sample is valid and within `[lo, hi]`.
pub fn range_mask(grid: &RasterGrid, lo: f64, hi: f64) -> Result<BinaryGrid> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::InvalidRange { lo, hi });
    }
    Ok(BinaryGrid {
        transform: grid.transform,
        bits: grid
            .values
            .iter()
            .map(|&v| {
                let v64 = f64::from(v);
                !grid.is_nodata(v) && v64 >= lo && v64 <= hi
            })
            .collect(),
    })
}

/// Row-major boolean mask sharing a raster's frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryGrid {
    transform: GeoTransform,
    bits: Vec<bool>,
}

// GeoTransform holds f64s; masks compared for equality never carry NaN frames.
impl Eq for GeoTransform {}
impl std::hash::Hash for GeoTransform {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.origin_lon.to_bits().hash(state);
        self.origin_lat.to_bits().hash(state);
        self.pixel_width.to_bits().hash(state);
        self.pixel_height.to_bits().hash(state);
        self.cols.hash(state);
        self.rows.hash(state);
    }
}

impl BinaryGrid {
    pub fn new(transform: GeoTransform, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != transform.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} bits for a {}x{} grid",
                bits.len(),
                transform.cols,
                transform.rows
            )));
        }
        Ok(BinaryGrid { transform, bits })
    }

    pub fn from_fn(transform: GeoTransform, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(transform.len());
        for row in 0..transform.rows {
            for col in 0..transform.cols {
                bits.push(f(col, row));
            }
        }
        BinaryGrid { transform, bits }
    }

    pub fn filled(transform: GeoTransform, value: bool) -> Self {
        BinaryGrid { transform, bits: vec![value; transform.len()] }
    }

    pub fn transform(&self) -> &GeoTransform {
        &self.transform
    }

    pub fn rows(&self) -> usize {
        self.transform.rows
    }

    pub fn cols(&self) -> usize {
        self.transform.cols
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.cols() + col]
    }

    /// Like [`get`](Self::get) but `false` outside the grid.
    pub fn get_or_false(&self, col: isize, row: isize) -> bool {
        if col < 0 || row < 0 || col as usize >= self.cols() || row as usize >= self.rows() {
            false
        } else {
            self.get(col as usize, row as usize)
        }
    }

    pub fn set(&mut self, col: usize, row: usize, value: bool) {
        let cols = self.cols();
        self.bits[row * cols + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn not(&self) -> BinaryGrid {
        BinaryGrid { transform: self.transform, bits: self.bits.iter().map(|b| !b).collect() }
    }

    fn zip_with(&self, other: &BinaryGrid, f: impl Fn(bool, bool) -> bool) -> Result<BinaryGrid> {
        if self.cols() != other.cols() || self.rows() != other.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.cols(),
                self.rows(),
                other.cols(),
                other.rows()
            )));
        }
        Ok(BinaryGrid {
            transform: self.transform,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn and(&self, other: &BinaryGrid) -> Result<BinaryGrid> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &BinaryGrid) -> Result<BinaryGrid> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn xor(&self, other: &BinaryGrid) -> Result<BinaryGrid> {
        self.zip_with(other, |a, b| a != b)
    }

    /// `self \ other`.
    pub fn minus(&self, other: &BinaryGrid) -> Result<BinaryGrid> {
        self.zip_with(other, |a, b| a && !b)
    }

    /// Pixelwise `self ⊆ other`. Grids of different shape are never subsets.
    pub fn is_subset_of(&self, other: &BinaryGrid) -> bool {
        self.cols() == other.cols()
            && self.rows() == other.rows()
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}
