//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};

use nightpulse_core::contour::ContourSet;
use nightpulse_core::raster::RasterGrid;

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Textbook queue-expansion DBSCAN over raw points.
pub struct RefDbscan {
    pub core: Vec<bool>,
    pub labels: Vec<Option<usize>>,
}

pub fn ref_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> RefDbscan {
    let n = points.len();
    let neigh: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| euclid(&points[i], &points[j]) <= eps).collect()).collect();
    let core: Vec<bool> = neigh.iter().map(|nb| nb.len() >= min_pts).collect();
    let mut labels = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if !core[i] || labels[i].is_some() {
            continue;
        }
        labels[i] = Some(next);
        let mut queue = VecDeque::from([i]);
        while let Some(p) = queue.pop_front() {
            if !core[p] {
                continue;
            }
            for &q in &neigh[p] {
                if labels[q].is_none() {
                    labels[q] = Some(next);
                    queue.push_back(q);
                }
            }
        }
        next += 1;
    }
    RefDbscan { core, labels }
}

/// True when two labelings induce the same partition, noise matching noise.
pub fn same_partition(a: &[Option<usize>], b: &[Option<usize>]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        match (x, y) {
            (None, None) => {}
            (Some(x), Some(y)) => {
                if *fwd.entry(*x).or_insert(*y) != *y || *back.entry(*y).or_insert(*x) != *x {
                    return false;
                }
            }
            _ => return false,
        }
    }
    true
}

/// Restricts a labeling to the given indices.
pub fn restrict(labels: &[Option<usize>], keep: &[bool]) -> Vec<Option<usize>> {
    labels.iter().zip(keep).map(|(l, &k)| if k { *l } else { None }).collect()
}

/// Largest interpolation residual over all vertices, or a description of the
/// first vertex that does not sit on a straddling cell edge.
pub fn contour_residual(grid: &RasterGrid, set: &ContourSet) -> Result<f64, String> {
    let val = |c: usize, r: usize| grid.get(c, r).map(f64::from);
    let mut worst: f64 = 0.0;
    for contour in &set.contours {
        let level = contour.level;
        if contour.vertices.len() < 2 {
            return Err("contour with fewer than two vertices".into());
        }
        for p in &contour.vertices {
            let (fx, fy) = (p.x.floor(), p.y.floor());
            let on_col = p.x == fx;
            let on_row = p.y == fy;
            let (c, r) = (fx as usize, fy as usize);
            let edge = if on_col && !on_row {
                (val(c, r), val(c, r + 1), p.y - fy)
            } else if on_row && !on_col {
                (val(c, r), val(c + 1, r), p.x - fx)
            } else if on_col && on_row {
                let v = val(c, r).ok_or("vertex on nodata corner")?;
                if v != level {
                    return Err(format!("corner vertex ({}, {}) has value {v} != {level}", p.x, p.y));
                }
                continue;
            } else {
                return Err(format!("vertex ({}, {}) is not on a cell edge", p.x, p.y));
            };
            let (v0, v1, s) = match edge {
                (Some(a), Some(b), s) => (a, b, s),
                _ => return Err(format!("vertex ({}, {}) on a nodata edge", p.x, p.y)),
            };
            if (v0 >= level) == (v1 >= level) {
                return Err(format!("edge {v0}..{v1} does not straddle {level}"));
            }
            worst = worst.max((v0 + s * (v1 - v0) - level).abs());
        }
    }
    Ok(worst)
}

/// Every contour is closed or has both ends on the grid boundary.
pub fn contours_terminate(grid: &RasterGrid, set: &ContourSet) -> bool {
    let (w, h) = ((grid.cols() - 1) as f64, (grid.rows() - 1) as f64);
    let on_border = |x: f64, y: f64| x == 0.0 || y == 0.0 || x == w || y == h;
    set.contours.iter().all(|c| {
        let (a, b) = (c.vertices[0], *c.vertices.last().unwrap());
        if c.closed {
            a == b
        } else {
            on_border(a.x, a.y) && on_border(b.x, b.y)
        }
    })
}
