//! Marching Squares isolines.
//!
//! Each 2×2 block of pixel centers is a cell. A cell's corners are compared
//! with the level (`>=` is inside) to form a 4-bit index, a fixed table
//! maps the index to edge-crossing segments, and segment endpoints are
//! placed by linear interpolation along the crossed edge. Segments are
//! then joined into polylines.
//!
//! Vertices use fractional pixel coordinates: `x` is the column, `y` the
//! row, and `(0, 0)` is the center of the top-left pixel.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::raster::{GeoTransform, RasterGrid};

const TL: u8 = 0b1000;
const TR: u8 = 0b0100;
const BR: u8 = 0b0010;
const BL: u8 = 0b0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Edge {
    Top,
    Right,
    Bottom,
    Left,
}

use Edge::*;

/// Segments per cell index. Saddles (5, 10) list the variant used when the
/// cell center is below the level; see [`saddle_segments`].
const TABLE: [&[(Edge, Edge)]; 16] = [
    &[],
    &[(Left, Bottom)],
    &[(Bottom, Right)],
    &[(Left, Right)],
    &[(Top, Right)],
    &[(Top, Right), (Left, Bottom)],
    &[(Top, Bottom)],
    &[(Top, Left)],
    &[(Top, Left)],
    &[(Top, Bottom)],
    &[(Top, Left), (Bottom, Right)],
    &[(Top, Right)],
    &[(Left, Right)],
    &[(Bottom, Right)],
    &[(Left, Bottom)],
    &[],
];

/// Saddle resolution: a center average at or above the level joins the two
/// high corners, so the segments cut off the two low corners instead.
fn saddle_segments(index: u8, center_high: bool) -> &'static [(Edge, Edge)] {
    match (index, center_high) {
        (5, true) => &[(Top, Left), (Bottom, Right)],
        (10, true) => &[(Top, Right), (Left, Bottom)],
        (i, _) => TABLE[i as usize],
    }
}

/// 4-bit case index of a cell. Corners are ordered top-left, top-right,
/// bottom-right, bottom-left; top-left is the most significant bit.
pub fn cell_index(corners: [Option<f64>; 4], level: f64) -> Result<u8> {
    let mut index = 0u8;
    for (bit, corner) in [TL, TR, BR, BL].into_iter().zip(corners) {
        if corner.ok_or(Error::NodataCorner)? >= level {
            index |= bit;
        }
    }
    Ok(index)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contour {
    pub level: f64,
    pub vertices: Vec<Point>,
    /// First and last vertex coincide.
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourSet {
    pub contours: Vec<Contour>,
    pub transform: GeoTransform,
}

impl ContourSet {
    pub fn levels(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.contours.iter().map(|c| c.level).collect();
        v.dedup();
        v
    }

    pub fn is_empty(&self) -> bool {
        self.contours.is_empty()
    }
}

/// Extracts isolines at each level. Cells with a nodata corner are skipped,
/// so lines end at nodata boundaries as well as at the grid edge.
pub fn marching_squares(grid: &RasterGrid, levels: &[f64]) -> Result<ContourSet> {
    if grid.rows() < 2 || grid.cols() < 2 {
        return Err(Error::DegenerateGrid);
    }
    if let Some(l) = levels.iter().find(|l| !l.is_finite()) {
        return Err(Error::InvalidParameter(format!("contour level {l} is not finite")));
    }
    let mut contours: Vec<Contour> =
        levels.par_iter().flat_map_iter(|&level| join_segments(level, cell_segments(grid, level))).collect();
    contours.sort_by(|a, b| {
        a.level
            .total_cmp(&b.level)
            .then(a.vertices[0].y.total_cmp(&b.vertices[0].y))
            .then(a.vertices[0].x.total_cmp(&b.vertices[0].x))
    });
    Ok(ContourSet { contours, transform: *grid.transform() })
}

// Interpolation always runs from the lower-index corner so that both cells
// sharing an edge compute bit-identical vertices.
fn lerp_param(v0: f64, v1: f64, level: f64) -> f64 {
    (level - v0) / (v1 - v0)
}

fn cell_segments(grid: &RasterGrid, level: f64) -> Vec<(Point, Point)> {
    let mut segments = Vec::new();
    for row in 0..grid.rows() - 1 {
        for col in 0..grid.cols() - 1 {
            let corners =
                [grid.get(col, row), grid.get(col + 1, row), grid.get(col + 1, row + 1), grid.get(col, row + 1)]
                    .map(|c| c.map(f64::from));
            let Ok(index) = cell_index(corners, level) else { continue };
            if index == 0 || index == 15 {
                continue;
            }
            let [tl, tr, br, bl] = corners.map(|c| c.unwrap_or_default());
            let pairs = if index == 5 || index == 10 {
                saddle_segments(index, (tl + tr + br + bl) / 4.0 >= level)
            } else {
                TABLE[index as usize]
            };
            let (x, y) = (col as f64, row as f64);
            let at = |e: Edge| match e {
                Top => Point { x: x + lerp_param(tl, tr, level), y },
                Bottom => Point { x: x + lerp_param(bl, br, level), y: y + 1.0 },
                Left => Point { x, y: y + lerp_param(tl, bl, level) },
                Right => Point { x: x + 1.0, y: y + lerp_param(tr, br, level) },
            };
            for &(a, b) in pairs {
                let (p, q) = (at(a), at(b));
                if p != q {
                    segments.push((p, q));
                }
            }
        }
    }
    segments
}

type Key = (i64, i64);

fn key(p: Point) -> Key {
    ((p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64)
}

fn row_major_lt(a: Point, b: Point) -> bool {
    (a.y, a.x) < (b.y, b.x)
}

fn join_segments(level: f64, segments: Vec<(Point, Point)>) -> Vec<Contour> {
    let mut incident: HashMap<Key, Vec<usize>> = HashMap::new();
    for (i, (p, q)) in segments.iter().enumerate() {
        incident.entry(key(*p)).or_default().push(i);
        incident.entry(key(*q)).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];

    // Walks from `start` along unused segments, lowest index first.
    let walk = |start: Point, used: &mut Vec<bool>| -> Vec<Point> {
        let mut line = vec![start];
        let mut here = start;
        loop {
            let next = incident[&key(here)].iter().copied().find(|&i| !used[i]);
            let Some(i) = next else { break };
            used[i] = true;
            let (p, q) = segments[i];
            here = if key(p) == key(here) { q } else { p };
            line.push(here);
        }
        line
    };

    let mut contours = Vec::new();
    // Open lines start at odd-degree endpoints.
    for i in 0..segments.len() {
        for end in [segments[i].0, segments[i].1] {
            if !used[i] && incident[&key(end)].len() % 2 == 1 {
                let line = walk(end, &mut used);
                contours.push(finish(level, line));
            }
        }
    }
    // Whatever remains is a union of cycles.
    for i in 0..segments.len() {
        if !used[i] {
            let line = walk(segments[i].0, &mut used);
            contours.push(finish(level, line));
        }
    }
    contours
}

fn finish(level: f64, mut vertices: Vec<Point>) -> Contour {
    let closed = vertices.len() > 2 && key(vertices[0]) == key(*vertices.last().unwrap());
    if closed {
        vertices.pop();
        let start = (0..vertices.len())
            .reduce(|best, i| if row_major_lt(vertices[i], vertices[best]) { i } else { best })
            .unwrap_or(0);
        vertices.rotate_left(start);
        vertices.push(vertices[0]);
    } else if row_major_lt(*vertices.last().unwrap(), vertices[0]) {
        vertices.reverse();
    }
    Contour { level, vertices, closed }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: &[&[f32]]) -> RasterGrid {
        let t = GeoTransform::new(0.0, 0.0, 1.0, 1.0, rows[0].len(), rows.len()).unwrap();
        RasterGrid::new(t, rows.concat(), -1.0).unwrap()
    }

    #[test]
    fn cell_index_examples() {
        let s = |v: [f64; 4]| v.map(Some);
        assert_eq!(cell_index(s([0.0, 0.0, 1.0, 1.0]), 0.5).unwrap(), 0b0011);
        assert_eq!(cell_index(s([0.0; 4]), 0.5).unwrap(), 0);
        assert_eq!(cell_index(s([1.0; 4]), 0.5).unwrap(), 15);
        assert_eq!(cell_index(s([1.0, 0.0, 1.0, 0.0]), 0.5).unwrap(), 10);
        assert_eq!(cell_index(s([0.5, 0.0, 0.0, 0.0]), 0.5).unwrap(), 8);
        assert!(matches!(cell_index([Some(1.0), None, Some(0.0), Some(0.0)], 0.5), Err(Error::NodataCorner)));
    }

    #[test]
    fn single_cell_open_segment() {
        let set = marching_squares(&grid(&[&[0.0, 0.0], &[1.0, 1.0]]), &[0.5]).unwrap();
        assert_eq!(set.contours.len(), 1);
        let c = &set.contours[0];
        assert!(!c.closed);
        assert_eq!(c.vertices, vec![Point { x: 0.0, y: 0.5 }, Point { x: 1.0, y: 0.5 }]);
    }

    #[test]
    fn uniform_grid_has_no_contours() {
        let g = grid(&[&[3.0, 3.0, 3.0], &[3.0, 3.0, 3.0]]);
        assert!(marching_squares(&g, &[1.0, 2.9, 3.5]).unwrap().is_empty());
    }

    #[test]
    fn diamond_around_center_pixel() {
        // Four cells, each cutting the two edges next to the bright center:
        // crossings at the midpoints between the center and its 4-neighbours.
        let g = grid(&[&[0.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 0.0]]);
        let set = marching_squares(&g, &[0.5]).unwrap();
        assert_eq!(set.contours.len(), 1);
        let c = &set.contours[0];
        assert!(c.closed);
        assert_eq!(c.vertices.len(), 5);
        let mut distinct: Vec<(f64, f64)> = c.vertices[..4].iter().map(|p| (p.x, p.y)).collect();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(distinct, vec![(0.5, 1.0), (1.0, 0.5), (1.0, 1.5), (1.5, 1.0)]);
        assert_eq!(c.vertices[0], Point { x: 1.0, y: 0.5 });
    }

    #[test]
    fn saddle_follows_center_average() {
        // TL and BR high. Center average 0.5 >= 0.4 joins them.
        let g = grid(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let high = marching_squares(&g, &[0.4]).unwrap();
        let low = marching_squares(&g, &[0.6]).unwrap();
        assert_eq!(high.contours.len(), 2);
        assert_eq!(low.contours.len(), 2);
        let has = |set: &ContourSet, a: Point, b: Point| {
            set.contours.iter().any(|c| c.vertices == vec![a, b] || c.vertices == vec![b, a])
        };
        // Joined: segments isolate the low TR and BL corners.
        assert!(has(&high, Point { x: 0.6, y: 0.0 }, Point { x: 1.0, y: 0.4 }));
        // Separated: segments isolate the high TL and BR corners.
        assert!(has(&low, Point { x: 0.0, y: 0.4 }, Point { x: 0.4, y: 0.0 }));
    }

    #[test]
    fn nodata_cells_are_skipped() {
        let nd = -1.0;
        let g = grid(&[&[0.0, 0.0, 0.0], &[0.0, 1.0, nd], &[0.0, 0.0, 0.0]]);
        let set = marching_squares(&g, &[0.5]).unwrap();
        // Two of four cells touch the nodata pixel; the remaining line is open.
        assert_eq!(set.contours.len(), 1);
        assert!(!set.contours[0].closed);
        assert_eq!(set.contours[0].vertices.len(), 3);
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        assert!(matches!(marching_squares(&grid(&[&[1.0, 2.0]]), &[1.5]), Err(Error::DegenerateGrid)));
        let g = grid(&[&[0.0, 0.0], &[1.0, 1.0]]);
        assert!(marching_squares(&g, &[f64::NAN]).is_err());
    }

    #[test]
    fn zero_length_segments_dropped() {
        // Level exactly at a corner: both crossings collapse onto that corner.
        let g = grid(&[&[0.5, 0.0], &[0.0, 0.0]]);
        let set = marching_squares(&g, &[0.5]).unwrap();
        assert!(set.is_empty());
    }
}
