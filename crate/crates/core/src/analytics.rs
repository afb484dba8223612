//! Trend, period comparison, extrema, pipette and threshold counts.

use serde::Serialize;

use crate::catalog::{SceneStack, YearMonth};
use crate::error::{Error, Result};
use crate::raster::{range_mask, RasterGrid};

/// Nodata sentinel of derived difference grids.
pub const DIFF_NODATA: f32 = f32::MIN;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendPoint {
    pub year: i32,
    pub month: u8,
    /// `None` when the frame has no valid pixels.
    pub mean: Option<f64>,
    pub sum: f64,
    pub pixel_count: usize,
}

impl TrendPoint {
    pub fn time(&self) -> YearMonth {
        YearMonth { year: self.year, month: self.month }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendSeries {
    pub points: Vec<TrendPoint>,
}

/// One point per frame with the spatial mean and sum over valid pixels.
pub fn trend(stack: &SceneStack) -> Result<TrendSeries> {
    if stack.is_empty() {
        return Err(Error::EmptySelection);
    }
    let points = stack
        .frames()
        .iter()
        .map(|f| {
            let (sum, n) = f.grid.valid_pixels().fold((0.0, 0usize), |(s, n), (_, _, v)| (s + f64::from(v), n + 1));
            TrendPoint {
                year: f.time.year,
                month: f.time.month,
                mean: (n > 0).then(|| sum / n as f64),
                sum,
                pixel_count: n,
            }
        })
        .collect();
    Ok(TrendSeries { points })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareResult {
    pub mean_a: f64,
    pub mean_b: f64,
    pub abs_diff: f64,
    /// Percent change from A to B; `None` when `mean_a` is zero.
    pub pct_change: Option<f64>,
    #[serde(skip)]
    pub diff_grid: RasterGrid,
}

struct PeriodStats {
    mean: f64,
    pixel_sum: Vec<f64>,
    pixel_n: Vec<usize>,
}

fn period_stats(stack: &SceneStack) -> Result<PeriodStats> {
    if stack.is_empty() {
        return Err(Error::EmptySelection);
    }
    let len = stack.transform().len();
    let mut pixel_sum = vec![0.0; len];
    let mut pixel_n = vec![0usize; len];
    for f in stack.frames() {
        let cols = f.grid.cols();
        for (c, r, v) in f.grid.valid_pixels() {
            pixel_sum[r * cols + c] += f64::from(v);
            pixel_n[r * cols + c] += 1;
        }
    }
    let n: usize = pixel_n.iter().sum();
    if n == 0 {
        return Err(Error::AllNodata);
    }
    let mean = pixel_sum.iter().sum::<f64>() / n as f64;
    Ok(PeriodStats { mean, pixel_sum, pixel_n })
}

/// Compares two periods over the same window.
///
/// Each period mean pools every valid (pixel, frame) sample. The difference
/// grid holds `mean_b - mean_a` of the per-pixel temporal means and is nodata
/// where either period never observed the pixel.
pub fn compare(a: &SceneStack, b: &SceneStack) -> Result<CompareResult> {
    if a.transform() != b.transform() {
        return Err(Error::ShapeMismatch("periods cover different windows".into()));
    }
    let sa = period_stats(a)?;
    let sb = period_stats(b)?;
    let diff = (0..sa.pixel_n.len())
        .map(|i| {
            if sa.pixel_n[i] == 0 || sb.pixel_n[i] == 0 {
                DIFF_NODATA
            } else {
                let ta = sa.pixel_sum[i] / sa.pixel_n[i] as f64;
                let tb = sb.pixel_sum[i] / sb.pixel_n[i] as f64;
                (tb - ta) as f32
            }
        })
        .collect();
    let diff_grid = RasterGrid::new_signed(*a.transform(), diff, DIFF_NODATA)?;
    Ok(CompareResult {
        mean_a: sa.mean,
        mean_b: sb.mean,
        abs_diff: (sb.mean - sa.mean).abs(),
        pct_change: (sa.mean != 0.0).then(|| (sb.mean - sa.mean) / sa.mean * 100.0),
        diff_grid,
    })
}

/// Pixel location of an extreme value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Location {
    pub col: usize,
    pub row: usize,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extreme {
    pub value: f32,
    pub locations: Vec<Location>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extrema {
    pub min: Extreme,
    pub max: Extreme,
}

/// Minimum and maximum with every tied location in row-major order.
pub fn extrema(grid: &RasterGrid) -> Result<Extrema> {
    let lo = grid.min_valid().ok_or(Error::AllNodata)?;
    let hi = grid.max_valid().ok_or(Error::AllNodata)?;
    let t = grid.transform();
    let at = |target: f32| Extreme {
        value: target,
        locations: grid
            .valid_pixels()
            .filter(|&(_, _, v)| v == target)
            .map(|(col, row, _)| {
                let (lon, lat) = t.pixel_center(col, row);
                Location { col, row, lon, lat }
            })
            .collect(),
    };
    Ok(Extrema { min: at(lo), max: at(hi) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipetteReading {
    pub col: usize,
    pub row: usize,
    pub value: f32,
}

/// Value of the pixel whose cell contains `(lon, lat)`.
pub fn pipette(grid: &RasterGrid, lon: f64, lat: f64) -> Result<PipetteReading> {
    let (col, row) = grid.transform().cell_containing(lon, lat).ok_or(Error::OutOfExtent { lon, lat })?;
    let value = grid.get(col, row).ok_or(Error::NoData)?;
    Ok(PipetteReading { col, row, value })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentCount {
    pub count: usize,
    /// `count` over the number of valid pixels; 0 when there are none.
    pub fraction: f64,
}

/// Pixels with a valid value in `[lo, hi]`.
pub fn segment_count(grid: &RasterGrid, lo: f64, hi: f64) -> Result<SegmentCount> {
    let count = range_mask(grid, lo, hi)?.count();
    let valid = grid.valid_count();
    let fraction = if valid == 0 { 0.0 } else { count as f64 / valid as f64 };
    Ok(SegmentCount { count, fraction })
}
