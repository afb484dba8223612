//! Seeded synthetic scenes for tests, demos and the guide.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{Catalog, SceneStack, YearMonth};
use crate::error::Result;
use crate::raster::geotiff::write_geotiff;
use crate::raster::{GeoTransform, RasterGrid};

/// Nodata sentinel used by every synthetic grid.
pub const NODATA: f32 = -1.0;

/// Transform of a `cols × rows` grid at 0.01° anchored near New York.
pub fn demo_transform(cols: usize, rows: usize) -> GeoTransform {
    GeoTransform::new(-74.30, 40.95, 0.01, 0.01, cols, rows).expect("demo transform is valid")
}

/// Consecutive months starting at `start`.
pub fn months(start: YearMonth, n: usize) -> Vec<YearMonth> {
    let mut out = Vec::with_capacity(n);
    let (mut y, mut m) = (start.year, start.month);
    for _ in 0..n {
        out.push(YearMonth { year: y, month: m });
        m += 1;
        if m > 12 {
            m = 1;
            y += 1;
        }
    }
    out
}

/// A disk of bright pixels present over an inclusive frame range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub t0: usize,
    pub t1: usize,
}

impl Blob {
    pub fn contains(&self, x: usize, y: usize, t: usize) -> bool {
        let (dx, dy) = (x as f64 - self.cx, y as f64 - self.cy);
        (self.t0..=self.t1).contains(&t) && dx * dx + dy * dy <= self.radius * self.radius
    }
}

/// A stack with planted blobs and the ground truth that produced it.
#[derive(Debug, Clone)]
pub struct BlobScenario {
    pub stack: SceneStack,
    pub blobs: Vec<Blob>,
}

impl BlobScenario {
    /// Index of the blob covering `(x, y, t)`, if any.
    pub fn truth(&self, x: usize, y: usize, t: usize) -> Option<usize> {
        self.blobs.iter().position(|b| b.contains(x, y, t))
    }
}

/// 64×64×12 stack with three well-separated space–time blobs of radiance
/// 40–60 over a 0–4 background.
pub fn three_blob_stack(seed: u64) -> BlobScenario {
    let blobs = vec![
        Blob { cx: 14.0, cy: 14.0, radius: 3.0, t0: 0, t1: 3 },
        Blob { cx: 48.0, cy: 18.0, radius: 3.0, t0: 4, t1: 7 },
        Blob { cx: 30.0, cy: 48.0, radius: 3.0, t0: 8, t1: 11 },
    ];
    blob_stack(64, 64, 12, &blobs, seed)
}

/// Stack of `frames` grids with `blobs` painted over random background.
pub fn blob_stack(cols: usize, rows: usize, frames: usize, blobs: &[Blob], seed: u64) -> BlobScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = demo_transform(cols, rows);
    let times = months(YearMonth { year: 2015, month: 1 }, frames);
    let grids = times
        .iter()
        .enumerate()
        .map(|(k, &ym)| {
            let g = RasterGrid::from_fn(t, NODATA, |x, y| {
                if blobs.iter().any(|b| b.contains(x, y, k)) {
                    rng.gen_range(40.0..60.0)
                } else {
                    rng.gen_range(0.0..4.0)
                }
            })
            .expect("synthetic values are valid");
            (ym, g)
        })
        .collect();
    BlobScenario { stack: SceneStack::new(grids).expect("synthetic frames share a grid"), blobs: blobs.to_vec() }
}

/// Random radiance on a `cols × rows` grid, multiples of 10 in `[10, 200]`
/// so that scaling by 0.8 or 1.5 stays exact in `f32`.
pub fn base_pattern(cols: usize, rows: usize, seed: u64) -> RasterGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RasterGrid::from_fn(demo_transform(cols, rows), NODATA, |_, _| 10.0 * rng.gen_range(1..=20) as f32)
        .expect("synthetic values are valid")
}

/// Multiplies every valid sample by `factor`.
pub fn scale(grid: &RasterGrid, factor: f32) -> RasterGrid {
    let values = grid.values().iter().map(|&v| if grid.is_nodata(v) { v } else { v * factor }).collect();
    RasterGrid::new(*grid.transform(), values, grid.nodata()).expect("scaled values are valid")
}

/// Monthly frames for 2016–2021 on an 8×8 grid. Each month of 2016–2019
/// repeats a per-month base pattern, 2020 is 0.8 × that pattern and 2021
/// is 1.5 × it.
pub fn compare_frames(seed: u64) -> Vec<(YearMonth, RasterGrid)> {
    let bases: Vec<RasterGrid> = (0..12).map(|m| base_pattern(8, 8, seed + m)).collect();
    let mut frames = Vec::new();
    for year in 2016..=2021 {
        for month in 1..=12u8 {
            let base = &bases[month as usize - 1];
            let grid = match year {
                2020 => scale(base, 0.8),
                2021 => scale(base, 1.5),
                _ => base.clone(),
            };
            frames.push((YearMonth { year, month }, grid));
        }
    }
    frames
}

/// Twelve monthly 2015 frames on a `cols × rows` grid with a seasonal cycle.
pub fn monthly_frames(cols: usize, rows: usize, seed: u64) -> Vec<(YearMonth, RasterGrid)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = demo_transform(cols, rows);
    months(YearMonth { year: 2015, month: 1 }, 12)
        .into_iter()
        .enumerate()
        .map(|(k, ym)| {
            let season = 1.0 + 0.25 * (k as f32 / 12.0 * std::f32::consts::TAU).cos();
            let g = RasterGrid::from_fn(t, NODATA, |x, y| {
                let d = ((x as f32 - cols as f32 / 2.0).powi(2) + (y as f32 - rows as f32 / 2.0).powi(2)).sqrt();
                (80.0 / (1.0 + d / 2.0) * season + rng.gen_range(0.0..2.0)).max(0.0)
            })
            .expect("synthetic values are valid");
            (ym, g)
        })
        .collect()
}

/// Writes each frame as a GeoTIFF under `root/incoming` and ingests it.
pub fn build_catalog(root: impl AsRef<Path>, frames: &[(YearMonth, RasterGrid)]) -> Result<Catalog> {
    let root = root.as_ref();
    let staging = root.join("incoming");
    std::fs::create_dir_all(&staging)?;
    let mut catalog = Catalog::open(root)?;
    for (ym, grid) in frames {
        let path = staging.join(format!("{ym}.tif"));
        write_geotiff(grid, &path)?;
        catalog.ingest(&path, *ym)?;
    }
    std::fs::remove_dir_all(&staging)?;
    Ok(catalog)
}
