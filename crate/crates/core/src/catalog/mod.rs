//! Time-indexed scene store and space–time selection.
//!
//! Scenes live under `{root}/data/{year}/{month:02}/scene.tif` and are
//! listed in `{root}/index.jsonl`, one JSON record per line. Writers are
//! serialized by `{root}/index.lock`; readers never take the lock and only
//! ever see fully renamed files.

pub mod index;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::geotiff::read_geotiff;
use crate::raster::{window, BBox, GeoTransform, RasterGrid};

/// Calendar month of a composite. Month 0 denotes an annual composite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YearMonth {
    pub year: i32,
    pub month: u8,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Result<Self> {
        if month > 12 {
            return Err(Error::InvalidParameter(format!("month {month} out of range 0..=12")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn is_annual(&self) -> bool {
        self.month == 0
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("expected YYYY-MM, got {s:?}"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        YearMonth::new(year, month)
    }
}

impl TryFrom<String> for YearMonth {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<YearMonth> for String {
    fn from(v: YearMonth) -> Self {
        v.to_string()
    }
}

/// One ingested composite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scene {
    pub scene_id: String,
    pub time: YearMonth,
    /// Path relative to the catalog root.
    pub grid_path: PathBuf,
    pub extent: BBox,
    pub byte_size: u64,
}

/// Bounding box plus inclusive month interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSelection {
    pub bbox: BBox,
    #[serde(rename = "from")]
    pub time_start: YearMonth,
    #[serde(rename = "to")]
    pub time_end: YearMonth,
}

impl RegionSelection {
    pub fn new(bbox: BBox, time_start: YearMonth, time_end: YearMonth) -> Result<Self> {
        let r = RegionSelection { bbox, time_start, time_end };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        self.bbox.validate()?;
        if self.time_start > self.time_end {
            return Err(Error::InvalidParameter(format!(
                "time interval {}..{} is inverted",
                self.time_start, self.time_end
            )));
        }
        Ok(())
    }

    pub fn contains_time(&self, t: YearMonth) -> bool {
        t >= self.time_start && t <= self.time_end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// 0-based chronological index within the stack.
    pub t: usize,
    pub time: YearMonth,
    pub grid: RasterGrid,
}

/// Chronological frames sharing one exact transform.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneStack {
    transform: GeoTransform,
    frames: Vec<Frame>,
}

impl SceneStack {
    pub fn new(frames: Vec<(YearMonth, RasterGrid)>) -> Result<Self> {
        let first = frames.first().ok_or(Error::EmptySelection)?;
        let transform = *first.1.transform();
        for pair in frames.windows(2) {
            if pair[0].0 >= pair[1].0 {
                return Err(Error::InvalidParameter(format!(
                    "frames not strictly increasing in time: {} then {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        if let Some((ym, _)) = frames.iter().find(|(_, g)| *g.transform() != transform) {
            return Err(Error::ShapeMismatch(format!(
                "scene {ym} does not share the stack's grid; resampling is not supported"
            )));
        }
        let frames = frames.into_iter().enumerate().map(|(t, (time, grid))| Frame { t, time, grid }).collect();
        Ok(SceneStack { transform, frames })
    }

    pub fn transform(&self) -> &GeoTransform {
        &self.transform
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Applies `f` to every grid, keeping times.
    pub fn map_grids(&self, mut f: impl FnMut(&RasterGrid) -> Result<RasterGrid>) -> Result<Self> {
        let frames = self.frames.iter().map(|fr| Ok((fr.time, f(&fr.grid)?))).collect::<Result<Vec<_>>>()?;
        SceneStack::new(frames)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CatalogStats {
    pub scene_count: usize,
    pub total_bytes: u64,
}

/// A catalog rooted at a data directory.
#[derive(Debug, Clone)]
pub struct Catalog {
    root: PathBuf,
    scenes: Vec<Scene>,
}

impl Catalog {
    /// Opens (creating if needed) the catalog at `root`.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        let scenes = index::read_index(&root)?;
        Ok(Catalog { root, scenes })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Scenes in `(year, month)` order.
    pub fn scenes(&self) -> &[Scene] {
        &self.scenes
    }

    pub fn scene(&self, time: YearMonth) -> Option<&Scene> {
        self.scenes.iter().find(|s| s.time == time)
    }

    pub fn stats(&self) -> CatalogStats {
        CatalogStats { scene_count: self.scenes.len(), total_bytes: self.scenes.iter().map(|s| s.byte_size).sum() }
    }

    pub fn reload(&mut self) -> Result<()> {
        self.scenes = index::read_index(&self.root)?;
        Ok(())
    }

    pub fn scene_path(&self, scene: &Scene) -> PathBuf {
        self.root.join(&scene.grid_path)
    }

    pub fn load(&self, scene: &Scene) -> Result<RasterGrid> {
        read_geotiff(self.scene_path(scene))
    }

    /// Validates and copies a GeoTIFF into the catalog, replacing any scene
    /// with the same `(year, month)`.
    pub fn ingest(&mut self, path: impl AsRef<Path>, time: YearMonth) -> Result<Scene> {
        let path = path.as_ref();
        let grid = read_geotiff(path)?;
        let bytes = fs::read(path)?;

        let _lock = index::IndexLock::acquire(&self.root)?;
        let rel = PathBuf::from("data")
            .join(format!("{:04}", time.year))
            .join(format!("{:02}", time.month))
            .join("scene.tif");
        let dest = self.root.join(&rel);
        let dir = dest.parent().expect("scene path has a parent");
        fs::create_dir_all(dir)?;
        let tmp = dir.join("scene.tif.tmp");
        fs::write(&tmp, &bytes)?;
        fs::rename(&tmp, &dest)?;

        let scene = Scene {
            scene_id: format!("{time}-{:016x}", fnv1a(&bytes)),
            time,
            grid_path: rel,
            extent: grid.transform().extent(),
            byte_size: bytes.len() as u64,
        };
        // Merge against the on-disk state, which may be newer than ours.
        let mut scenes = index::read_index(&self.root)?;
        scenes.retain(|s| s.time != time);
        scenes.push(scene.clone());
        scenes.sort_by_key(|s| s.time);
        index::write_index(&self.root, &scenes)?;
        // Reload so the in-memory listing carries the rounded index form.
        self.scenes = index::read_index(&self.root)?;
        Ok(self.scene(time).cloned().unwrap_or(scene))
    }

    /// Windowed, chronological stack for a region. Annual composites are
    /// never selected.
    pub fn select(&self, region: &RegionSelection) -> Result<SceneStack> {
        region.validate()?;
        // Index extents are rounded to 4 decimals.
        let pad = 1e-4;
        let coarse = BBox {
            min_lon: region.bbox.min_lon - pad,
            min_lat: region.bbox.min_lat - pad,
            max_lon: region.bbox.max_lon + pad,
            max_lat: region.bbox.max_lat + pad,
        };
        let mut frames = Vec::new();
        for scene in &self.scenes {
            if scene.time.is_annual() || !region.contains_time(scene.time) || !scene.extent.intersects(&coarse) {
                continue;
            }
            let grid = self.load(scene)?;
            match window(&grid, &region.bbox) {
                Ok(w) => frames.push((scene.time, w)),
                Err(Error::EmptyIntersection) => continue,
                Err(e) => return Err(e),
            }
        }
        if frames.is_empty() {
            return Err(Error::EmptySelection);
        }
        SceneStack::new(frames)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::geotiff::write_geotiff;

    fn ym(y: i32, m: u8) -> YearMonth {
        YearMonth::new(y, m).unwrap()
    }

    fn fixture(dir: &Path, name: &str, value: f32) -> PathBuf {
        let t = GeoTransform::new(10.0, 52.0, 0.25, 0.25, 8, 4).unwrap();
        let g = RasterGrid::from_fn(t, -1.0, |c, r| value + (c + r) as f32).unwrap();
        let p = dir.join(name);
        write_geotiff(&g, &p).unwrap();
        p
    }

    #[test]
    fn year_month_parsing() {
        assert_eq!("2015-01".parse::<YearMonth>().unwrap(), ym(2015, 1));
        assert_eq!("2015-0".parse::<YearMonth>().unwrap(), ym(2015, 0));
        assert!("2015-13".parse::<YearMonth>().is_err());
        assert!("2015".parse::<YearMonth>().is_err());
        assert_eq!(ym(2017, 9).to_string(), "2017-09");
        assert!(ym(2016, 12) < ym(2017, 1));
    }

    #[test]
    fn ingest_twelve_months_and_reingest() {
        let src = tempfile::tempdir().unwrap();
        let root = tempfile::tempdir().unwrap();
        let mut cat = Catalog::open(root.path()).unwrap();
        for m in 1..=12 {
            let p = fixture(src.path(), &format!("m{m}.tif"), m as f32);
            cat.ingest(&p, ym(2015, m)).unwrap();
        }
        assert_eq!(cat.scenes().len(), 12);
        assert!(root.path().join("data/2015/03/scene.tif").exists());

        let old = cat.scene(ym(2015, 3)).unwrap().clone();
        let p = fixture(src.path(), "again.tif", 99.0);
        let new = cat.ingest(&p, ym(2015, 3)).unwrap();
        assert_eq!(cat.scenes().len(), 12);
        assert_ne!(old.scene_id, new.scene_id);
        assert_eq!(cat.load(&new).unwrap().get(0, 0), Some(99.0));
        assert!(!root.path().join(index::LOCK_FILE).exists());
    }

    #[test]
    fn index_survives_reopen() {
        let src = tempfile::tempdir().unwrap();
        let root = tempfile::tempdir().unwrap();
        let mut cat = Catalog::open(root.path()).unwrap();
        for m in [3, 1, 2] {
            cat.ingest(fixture(src.path(), &format!("{m}.tif"), 1.0), ym(2016, m)).unwrap();
        }
        let reopened = Catalog::open(root.path()).unwrap();
        assert_eq!(reopened.scenes(), cat.scenes());
        let months: Vec<u8> = reopened.scenes().iter().map(|s| s.time.month).collect();
        assert_eq!(months, [1, 2, 3]);
        let text = fs::read_to_string(root.path().join(index::INDEX_FILE)).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("\"bbox\":[10.0,51.0,12.0,52.0]"), "{text}");
    }

    #[test]
    fn locked_catalog_rejects_writer() {
        let src = tempfile::tempdir().unwrap();
        let root = tempfile::tempdir().unwrap();
        let mut cat = Catalog::open(root.path()).unwrap();
        let _held = index::IndexLock::acquire(root.path()).unwrap();
        let err = cat.ingest(fixture(src.path(), "a.tif", 1.0), ym(2015, 1)).unwrap_err();
        assert!(matches!(err, Error::IndexWriteFailure(_)));
    }

    #[test]
    fn select_orders_and_windows() {
        let src = tempfile::tempdir().unwrap();
        let root = tempfile::tempdir().unwrap();
        let mut cat = Catalog::open(root.path()).unwrap();
        for (y, m) in [(2016, 2), (2015, 12), (2016, 1)] {
            cat.ingest(fixture(src.path(), &format!("{y}{m}.tif"), 1.0), ym(y, m)).unwrap();
        }
        let all = RegionSelection::new(BBox::new(10.0, 51.0, 12.0, 52.0).unwrap(), ym(2015, 1), ym(2016, 12)).unwrap();
        let stack = cat.select(&all).unwrap();
        let times: Vec<_> = stack.frames().iter().map(|f| f.time).collect();
        assert_eq!(times, [ym(2015, 12), ym(2016, 1), ym(2016, 2)]);
        assert_eq!(stack.frames()[2].t, 2);

        let one = RegionSelection::new(BBox::new(10.0, 51.5, 10.5, 52.0).unwrap(), ym(2016, 1), ym(2016, 1)).unwrap();
        let stack = cat.select(&one).unwrap();
        assert_eq!(stack.len(), 1);
        assert_eq!((stack.transform().cols, stack.transform().rows), (2, 2));
        assert_eq!(cat.select(&one).unwrap(), stack);

        let outside =
            RegionSelection::new(BBox::new(-10.0, 0.0, -5.0, 5.0).unwrap(), ym(2015, 1), ym(2016, 12)).unwrap();
        assert!(matches!(cat.select(&outside), Err(Error::EmptySelection)));
    }

    #[test]
    fn stack_rejects_mismatched_grids() {
        let a = RasterGrid::new(GeoTransform::new(0.0, 0.0, 1.0, 1.0, 2, 2).unwrap(), vec![0.0; 4], -1.0).unwrap();
        let b = RasterGrid::new(GeoTransform::new(0.0, 0.0, 0.5, 0.5, 4, 4).unwrap(), vec![0.0; 16], -1.0).unwrap();
        assert!(matches!(
            SceneStack::new(vec![(ym(2015, 1), a.clone()), (ym(2015, 2), b)]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(SceneStack::new(vec![(ym(2015, 2), a.clone()), (ym(2015, 1), a)]).is_err());
    }
}
