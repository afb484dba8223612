//! Binary morphology, connected components and two-epoch sprawl change.
//!
//! Everything outside the grid is background. Erosion and dilation are
//! clipped to the grid; opening and closing are evaluated on a canvas
//! padded by the element radius so the intermediate result is not clipped,
//! which keeps `opening ⊆ b ⊆ closing` exact up to the grid border.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{binarize, BBox, BinaryGrid, GeoTransform, RasterGrid};

/// Odd-sized boolean kernel with its origin at the center.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StructuringElement {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Default for StructuringElement {
    fn default() -> Self {
        Self::square(3).expect("3 is odd")
    }
}

impl StructuringElement {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width.is_multiple_of(2) || height.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "structuring element must have odd size, got {width}x{height}"
            )));
        }
        if bits.len() != width * height {
            return Err(Error::InvalidParameter("structuring element bit count".into()));
        }
        let se = StructuringElement { width, height, bits };
        if !se.get(0, 0) {
            return Err(Error::InvalidParameter("structuring element origin must be set".into()));
        }
        Ok(se)
    }

    /// All-true `size × size` box.
    pub fn square(size: usize) -> Result<Self> {
        Self::new(size, size, vec![true; size * size])
    }

    /// Parses rows such as `["010", "111", "010"]`.
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let mut bits = Vec::with_capacity(width * height);
        for r in rows {
            let r = r.as_ref();
            if r.len() != width {
                return Err(Error::InvalidParameter("ragged structuring element rows".into()));
            }
            for ch in r.chars() {
                bits.push(match ch {
                    '1' | '#' | 'x' => true,
                    '0' | '.' => false,
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "unexpected structuring element character {other:?}"
                        )))
                    }
                });
            }
        }
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn rx(&self) -> isize {
        (self.width / 2) as isize
    }

    fn ry(&self) -> isize {
        (self.height / 2) as isize
    }

    /// Bit at offset `(dx, dy)` from the origin.
    pub fn get(&self, dx: isize, dy: isize) -> bool {
        let (cx, cy) = (dx + self.rx(), dy + self.ry());
        cx >= 0
            && cy >= 0
            && (cx as usize) < self.width
            && (cy as usize) < self.height
            && self.bits[cy as usize * self.width + cx as usize]
    }

    /// Point reflection through the origin.
    pub fn reflect(&self) -> Self {
        let mut bits = self.bits.clone();
        bits.reverse();
        StructuringElement { width: self.width, height: self.height, bits }
    }

    fn offsets(&self) -> Vec<(isize, isize)> {
        let mut v = Vec::new();
        for dy in -self.ry()..=self.ry() {
            for dx in -self.rx()..=self.rx() {
                if self.get(dx, dy) {
                    v.push((dx, dy));
                }
            }
        }
        v
    }

    /// Rows of `0`/`1`, the inverse of [`from_rows`](Self::from_rows).
    pub fn to_rows(&self) -> Vec<String> {
        self.bits.chunks(self.width).map(|r| r.iter().map(|&b| if b { '1' } else { '0' }).collect()).collect()
    }
}

impl Serialize for StructuringElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for StructuringElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<String>::deserialize(d)?;
        Self::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Minkowski erosion: a pixel survives when every element offset lands on
/// foreground.
pub fn erode(b: &BinaryGrid, se: &StructuringElement) -> BinaryGrid {
    let offs = se.offsets();
    BinaryGrid::from_fn(*b.transform(), |c, r| {
        offs.iter().all(|&(dx, dy)| b.get_or_false(c as isize + dx, r as isize + dy))
    })
}

/// Minkowski dilation: `{p : p - q ∈ b for some q ∈ se}`.
pub fn dilate(b: &BinaryGrid, se: &StructuringElement) -> BinaryGrid {
    let offs = se.offsets();
    BinaryGrid::from_fn(*b.transform(), |c, r| {
        offs.iter().any(|&(dx, dy)| b.get_or_false(c as isize - dx, r as isize - dy))
    })
}

fn pad(b: &BinaryGrid, px: usize, py: usize) -> BinaryGrid {
    let t = b.transform();
    let padded = GeoTransform {
        origin_lon: t.origin_lon - px as f64 * t.pixel_width,
        origin_lat: t.origin_lat + py as f64 * t.pixel_height,
        cols: t.cols + 2 * px,
        rows: t.rows + 2 * py,
        ..*t
    };
    BinaryGrid::from_fn(padded, |c, r| b.get_or_false(c as isize - px as isize, r as isize - py as isize))
}

fn crop(b: &BinaryGrid, px: usize, py: usize, like: &BinaryGrid) -> BinaryGrid {
    BinaryGrid::from_fn(*like.transform(), |c, r| b.get(c + px, r + py))
}

fn padded_pair(
    b: &BinaryGrid,
    se: &StructuringElement,
    first: fn(&BinaryGrid, &StructuringElement) -> BinaryGrid,
    second: fn(&BinaryGrid, &StructuringElement) -> BinaryGrid,
) -> BinaryGrid {
    let (px, py) = (se.width / 2, se.height / 2);
    let canvas = pad(b, px, py);
    crop(&second(&first(&canvas, se), se), px, py, b)
}

/// `dilate(erode(b))`.
pub fn opening(b: &BinaryGrid, se: &StructuringElement) -> BinaryGrid {
    padded_pair(b, se, erode, dilate)
}

/// `erode(dilate(b))`.
pub fn closing(b: &BinaryGrid, se: &StructuringElement) -> BinaryGrid {
    padded_pair(b, se, dilate, erode)
}

/// 8-connected component labels. Ids run from 1 in row-major order of each
/// component's first pixel; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGrid {
    pub labels: Vec<u32>,
    pub cols: usize,
    pub rows: usize,
    pub count: u32,
}

pub fn label(b: &BinaryGrid) -> LabeledGrid {
    let (cols, rows) = (b.cols(), b.rows());
    let mut labels = vec![0u32; cols * rows];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..labels.len() {
        if !b.bits()[start] || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (c, r) = ((i % cols) as isize, (i / cols) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nc, nr) = (c + dx, r + dy);
                    if b.get_or_false(nc, nr) {
                        let j = nr as usize * cols + nc as usize;
                        if labels[j] == 0 {
                            labels[j] = count;
                            stack.push(j);
                        }
                    }
                }
            }
        }
    }
    LabeledGrid { labels, cols, rows, count }
}

/// Area, centroid and extent of one connected region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionMeasure {
    pub region_id: u32,
    pub area_pixels: usize,
    /// Mean of member pixel centers.
    pub centroid_lon: f64,
    pub centroid_lat: f64,
    /// Outer pixel edges of the region.
    pub bbox: BBox,
    /// Inclusive pixel bounds `(col_min, row_min, col_max, row_max)`.
    pub pixel_bbox: [usize; 4],
    /// Other change classes containing exactly the same pixels.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub also_in: Vec<ChangePattern>,
    #[serde(skip)]
    pixels: Vec<usize>,
}

/// One measure per 8-connected component, in label order.
pub fn measure_regions(b: &BinaryGrid) -> Vec<RegionMeasure> {
    let lab = label(b);
    let t = b.transform();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); lab.count as usize];
    for (i, &l) in lab.labels.iter().enumerate() {
        if l > 0 {
            members[l as usize - 1].push(i);
        }
    }
    members
        .into_iter()
        .enumerate()
        .map(|(k, pixels)| {
            let n = pixels.len() as f64;
            let (mut sx, mut sy) = (0.0, 0.0);
            let mut pb = [usize::MAX, usize::MAX, 0, 0];
            for &i in &pixels {
                let (c, r) = (i % lab.cols, i / lab.cols);
                sx += c as f64;
                sy += r as f64;
                pb = [pb[0].min(c), pb[1].min(r), pb[2].max(c), pb[3].max(r)];
            }
            let (centroid_lon, centroid_lat) = t.frac_to_geo(sx / n, sy / n);
            let bbox = BBox {
                min_lon: t.origin_lon + pb[0] as f64 * t.pixel_width,
                min_lat: t.origin_lat - (pb[3] + 1) as f64 * t.pixel_height,
                max_lon: t.origin_lon + (pb[2] + 1) as f64 * t.pixel_width,
                max_lat: t.origin_lat - pb[1] as f64 * t.pixel_height,
            };
            RegionMeasure {
                region_id: k as u32 + 1,
                area_pixels: pixels.len(),
                centroid_lon,
                centroid_lat,
                bbox,
                pixel_bbox: pb,
                also_in: Vec::new(),
                pixels,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangePattern {
    Shrink,
    Merge,
    Expand,
    Split,
}

impl ChangePattern {
    pub const ALL: [ChangePattern; 4] =
        [ChangePattern::Shrink, ChangePattern::Merge, ChangePattern::Expand, ChangePattern::Split];

    pub fn as_str(self) -> &'static str {
        match self {
            ChangePattern::Shrink => "shrink",
            ChangePattern::Merge => "merge",
            ChangePattern::Expand => "expand",
            ChangePattern::Split => "split",
        }
    }
}

/// The four change masks between two epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeMasks {
    pub shrink: BinaryGrid,
    pub merge: BinaryGrid,
    pub expand: BinaryGrid,
    pub split: BinaryGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangeReport {
    pub threshold: f64,
    pub structuring_element: StructuringElement,
    pub shrink: Vec<RegionMeasure>,
    pub merge: Vec<RegionMeasure>,
    pub expand: Vec<RegionMeasure>,
    pub split: Vec<RegionMeasure>,
}

impl ChangeReport {
    pub fn regions(&self, p: ChangePattern) -> &[RegionMeasure] {
        match p {
            ChangePattern::Shrink => &self.shrink,
            ChangePattern::Merge => &self.merge,
            ChangePattern::Expand => &self.expand,
            ChangePattern::Split => &self.split,
        }
    }

    pub fn is_empty(&self) -> bool {
        ChangePattern::ALL.iter().all(|&p| self.regions(p).is_empty())
    }
}

/// Change masks from two binarized epochs.
///
/// With `ΔX = X(b2) xor X(b1)`: merge is `ΔErosion xor ΔOpening`, expand
/// is `ΔDilation xor ΔClosing`, split is `ΔClosing`. Shrink is the opened
/// foreground of the first epoch that is gone from the second,
/// `Opening(b1) \ Opening(b2)`, so pure growth never registers as shrink.
pub fn change_masks(b1: &BinaryGrid, b2: &BinaryGrid, se: &StructuringElement) -> Result<ChangeMasks> {
    let delta = |f: fn(&BinaryGrid, &StructuringElement) -> BinaryGrid| f(b2, se).xor(&f(b1, se));
    let d_erosion = delta(erode)?;
    let d_dilation = delta(dilate)?;
    let d_opening = delta(opening)?;
    let d_closing = delta(closing)?;
    Ok(ChangeMasks {
        shrink: opening(b1, se).minus(&opening(b2, se))?,
        merge: d_erosion.xor(&d_opening)?,
        expand: d_dilation.xor(&d_closing)?,
        split: d_closing,
    })
}

/// Classifies shrink, merge, expand and split regions between two epochs
/// binarized at `threshold`.
pub fn sprawl_change(
    i1: &RasterGrid,
    i2: &RasterGrid,
    threshold: f64,
    se: &StructuringElement,
) -> Result<ChangeReport> {
    if i1.transform() != i2.transform() {
        return Err(Error::ShapeMismatch("epochs do not share a grid".into()));
    }
    if !threshold.is_finite() {
        return Err(Error::InvalidParameter("threshold must be finite".into()));
    }
    let masks = change_masks(&binarize(i1, threshold), &binarize(i2, threshold), se)?;
    let mut lists = [
        measure_regions(&masks.shrink),
        measure_regions(&masks.merge),
        measure_regions(&masks.expand),
        measure_regions(&masks.split),
    ];
    flag_overlaps(&mut lists);
    let [shrink, merge, expand, split] = lists;
    Ok(ChangeReport { threshold, structuring_element: se.clone(), shrink, merge, expand, split })
}

fn flag_overlaps(lists: &mut [Vec<RegionMeasure>; 4]) {
    let mut flags = Vec::new();
    for a in 0..lists.len() {
        for (i, region) in lists[a].iter().enumerate() {
            for (b, &pb) in ChangePattern::ALL.iter().enumerate() {
                if a != b && lists[b].iter().any(|o| o.pixels == region.pixels) {
                    flags.push((a, i, pb));
                }
            }
        }
    }
    for (a, i, p) in flags {
        lists[a][i].also_in.push(p);
    }
}
