//! Spatio-temporal DBSCAN over a scene stack.
//!
//! The pipeline is fixed: drop dim observations, build one weighted feature
//! vector per surviving `(x, y, t)` cell, standard-scale each feature
//! column, compute the dense Euclidean distance matrix, and run DBSCAN on
//! it. Clustering units are grid cells, not whole images.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{SceneStack, YearMonth};
use crate::error::{Error, Result};
use crate::raster::{BBox, GeoTransform};

/// Upper bound on observations for the dense distance matrix.
pub const MAX_OBSERVATIONS: usize = 20_000;

/// One bright cell of the space–time cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    /// Column.
    pub x: usize,
    /// Row.
    pub y: usize,
    /// Frame index within the stack.
    pub t: usize,
    pub intensity: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// `(w1·s, w2·t)`: neighbourhood intensity and time only.
    Literal,
    /// `(w1·x, w1·y, w1·s, w2·t)`: adds pixel coordinates.
    #[default]
    Spatial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    /// Prefilter threshold; cells below it are never clustered.
    pub t_filter: f64,
    /// Spatial weight.
    pub w1: f64,
    /// Temporal weight.
    pub w2: f64,
    /// Neighbourhood radius in scaled feature space.
    pub eps: f64,
    pub min_pts: usize,
    #[serde(default)]
    pub mode: FeatureMode,
}

impl FeatureParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !self.t_filter.is_finite() {
            return bad("t_filter must be finite");
        }
        if !(self.w1 >= 0.0 && self.w2 >= 0.0 && self.w1 + self.w2 > 0.0) {
            return bad("weights must be nonnegative with a positive sum");
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps must be positive");
        }
        if self.min_pts < 1 {
            return bad("min_pts must be at least 1");
        }
        Ok(())
    }
}

/// Cells with valid intensity `>= t_filter`, in `(t, y, x)` order.
pub fn prefilter(stack: &SceneStack, t_filter: f64) -> Vec<Observation> {
    stack
        .frames()
        .iter()
        .flat_map(|frame| {
            frame
                .grid
                .valid_pixels()
                .filter(move |&(_, _, v)| f64::from(v) >= t_filter)
                .map(move |(x, y, intensity)| Observation { x, y, t: frame.t, intensity })
        })
        .collect()
}

/// Standard-scaled features with the statistics used to scale them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    ncols: usize,
    pub means: Vec<f64>,
    /// Population standard deviations before scaling.
    pub stds: Vec<f64>,
}

impl FeatureMatrix {
    pub fn nrows(&self) -> usize {
        self.data.len().checked_div(self.ncols).unwrap_or(0)
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.ncols)
    }
}

/// Scales each column to zero mean and unit population standard deviation.
/// Constant columns become all zeros.
pub fn standard_scale(raw: &[Vec<f64>]) -> Result<FeatureMatrix> {
    let first = raw.first().ok_or(Error::EmptyInput)?;
    let ncols = first.len();
    if raw.iter().any(|r| r.len() != ncols) {
        return Err(Error::ShapeMismatch("ragged feature rows".into()));
    }
    let n = raw.len() as f64;
    let means: Vec<f64> = (0..ncols).map(|c| raw.iter().map(|r| r[c]).sum::<f64>() / n).collect();
    let stds: Vec<f64> =
        (0..ncols).map(|c| (raw.iter().map(|r| (r[c] - means[c]).powi(2)).sum::<f64>() / n).sqrt()).collect();
    let mut data = Vec::with_capacity(raw.len() * ncols);
    for r in raw {
        for c in 0..ncols {
            // Relative guard: a column of equal values can leave rounding residue.
            let constant = stds[c] <= 1e-12 * means[c].abs();
            data.push(if constant { 0.0 } else { (r[c] - means[c]) / stds[c] });
        }
    }
    Ok(FeatureMatrix { data, ncols, means, stds })
}

/// Mean of the valid pixels in the border-clipped 3×3 window.
fn neighbourhood_mean(stack: &SceneStack, o: &Observation) -> f64 {
    let grid = &stack.frames()[o.t].grid;
    let (mut sum, mut n) = (0.0, 0u32);
    for y in o.y.saturating_sub(1)..=(o.y + 1).min(grid.rows() - 1) {
        for x in o.x.saturating_sub(1)..=(o.x + 1).min(grid.cols() - 1) {
            if let Some(v) = grid.get(x, y) {
                sum += f64::from(v);
                n += 1;
            }
        }
    }
    // The observation itself is valid, so n >= 1.
    sum / f64::from(n)
}

/// Weighted raw features, one row per observation, before scaling.
pub fn raw_features(stack: &SceneStack, obs: &[Observation], params: &FeatureParams) -> Vec<Vec<f64>> {
    obs.par_iter()
        .map(|o| {
            let s = neighbourhood_mean(stack, o);
            let t = o.t as f64;
            match params.mode {
                FeatureMode::Literal => vec![params.w1 * s, params.w2 * t],
                FeatureMode::Spatial => {
                    vec![params.w1 * o.x as f64, params.w1 * o.y as f64, params.w1 * s, params.w2 * t]
                }
            }
        })
        .collect()
}

/// Weighted, standard-scaled feature matrix.
///
/// Because scaling follows weighting, a positive weight only switches its
/// columns on; a zero weight makes them constant and therefore inert.
pub fn build_features(stack: &SceneStack, obs: &[Observation], params: &FeatureParams) -> Result<FeatureMatrix> {
    if obs.is_empty() {
        return Err(Error::EmptyInput);
    }
    standard_scale(&raw_features(stack, obs, params))
}

/// Symmetric pairwise distances, stored as the strict upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.upper[self.offset(i, j)],
            std::cmp::Ordering::Greater => self.upper[self.offset(j, i)],
        }
    }

    /// Builds a matrix from any symmetric distance function.
    pub fn from_fn(n: usize, dist: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let upper = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| dist(i, j))
            .collect();
        DistanceMatrix { n, upper }
    }
}

/// Euclidean distances between all feature rows.
pub fn distance_matrix(features: &FeatureMatrix) -> DistanceMatrix {
    DistanceMatrix::from_fn(features.nrows(), |i, j| {
        features.row(i).iter().zip(features.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Noise,
    Cluster(usize),
}

impl Label {
    pub fn cluster(self) -> Option<usize> {
        match self {
            Label::Noise => None,
            Label::Cluster(c) => Some(c),
        }
    }

    /// `-1` for noise, otherwise the cluster id.
    pub fn as_i64(self) -> i64 {
        self.cluster().map_or(-1, |c| c as i64)
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i64(self.as_i64())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterLabels {
    pub labels: Vec<Label>,
    pub core: Vec<bool>,
    pub cluster_count: usize,
}

impl ClusterLabels {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == Label::Noise).count()
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// DBSCAN on a precomputed distance matrix.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `eps`. Clusters are connected components of core points; a
/// non-core point within `eps` of a core point joins the cluster of its
/// lowest-index core neighbour. Cluster ids follow each cluster's lowest
/// member index.
pub fn dbscan(d: &DistanceMatrix, eps: f64, min_pts: usize) -> ClusterLabels {
    let n = d.len();
    let core: Vec<bool> =
        (0..n).into_par_iter().map(|i| (0..n).filter(|&j| d.get(i, j) <= eps).count() >= min_pts).collect();

    let mut parent: Vec<usize> = (0..n).collect();
    for i in (0..n).filter(|&i| core[i]) {
        for j in ((i + 1)..n).filter(|&j| core[j]) {
            if d.get(i, j) <= eps {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }

    let mut root: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        root[i] = if core[i] {
            Some(find(&mut parent, i))
        } else {
            (0..n).find(|&j| core[j] && d.get(i, j) <= eps).map(|j| find(&mut parent, j))
        };
    }

    let mut ids = vec![usize::MAX; n];
    let mut next = 0;
    let labels = root
        .iter()
        .map(|r| match r {
            None => Label::Noise,
            Some(r) => {
                if ids[*r] == usize::MAX {
                    ids[*r] = next;
                    next += 1;
                }
                Label::Cluster(ids[*r])
            }
        })
        .collect();
    ClusterLabels { labels, core, cluster_count: next }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub size: usize,
    pub mean_intensity: f64,
    pub t_start: usize,
    pub t_end: usize,
    pub time_start: YearMonth,
    pub time_end: YearMonth,
    /// Extent of member pixel centers.
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterResult {
    pub params: FeatureParams,
    pub observations: Vec<Observation>,
    pub labels: ClusterLabels,
    pub summaries: Vec<ClusterSummary>,
    pub transform: GeoTransform,
    /// Calendar month of each stack frame.
    pub times: Vec<YearMonth>,
}

/// Full pipeline: prefilter, features, distances, DBSCAN, summaries.
pub fn nightpulse_dbscan(stack: &SceneStack, params: &FeatureParams) -> Result<ClusterResult> {
    params.validate()?;
    let observations = prefilter(stack, params.t_filter);
    if observations.is_empty() {
        return Err(Error::EmptySelection);
    }
    if observations.len() > MAX_OBSERVATIONS {
        return Err(Error::TooLarge { count: observations.len(), limit: MAX_OBSERVATIONS });
    }
    let features = build_features(stack, &observations, params)?;
    let labels = dbscan(&distance_matrix(&features), params.eps, params.min_pts);
    let times: Vec<YearMonth> = stack.frames().iter().map(|f| f.time).collect();
    let summaries = summarize(&observations, &labels, stack.transform(), &times);
    Ok(ClusterResult { params: *params, observations, labels, summaries, transform: *stack.transform(), times })
}

fn summarize(
    obs: &[Observation],
    labels: &ClusterLabels,
    transform: &GeoTransform,
    times: &[YearMonth],
) -> Vec<ClusterSummary> {
    (0..labels.cluster_count)
        .map(|cluster| {
            let members: Vec<&Observation> = obs
                .iter()
                .zip(&labels.labels)
                .filter(|(_, l)| **l == Label::Cluster(cluster))
                .map(|(o, _)| o)
                .collect();
            let size = members.len();
            let mean_intensity = members.iter().map(|o| f64::from(o.intensity)).sum::<f64>() / size as f64;
            let t_start = members.iter().map(|o| o.t).min().unwrap_or(0);
            let t_end = members.iter().map(|o| o.t).max().unwrap_or(0);
            let (x0, x1) = min_max(members.iter().map(|o| o.x));
            let (y0, y1) = min_max(members.iter().map(|o| o.y));
            ClusterSummary {
                cluster,
                size,
                mean_intensity,
                t_start,
                t_end,
                time_start: times[t_start],
                time_end: times[t_end],
                bbox: BBox {
                    min_lon: transform.center_lon(x0),
                    min_lat: transform.center_lat(y1),
                    max_lon: transform.center_lon(x1),
                    max_lat: transform.center_lat(y0),
                },
            }
        })
        .collect()
}

fn min_max(it: impl Iterator<Item = usize>) -> (usize, usize) {
    it.fold((usize::MAX, 0), |(lo, hi), v| (lo.min(v), hi.max(v)))
}
