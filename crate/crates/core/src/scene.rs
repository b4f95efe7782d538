//! Metric 3D scene graph reconstruction from a perception record.

use std::io::{self, Write};

use thiserror::Error;

use crate::geometry::{azimuth_of, pitch_of, Azimuth, Frame3, Point3, Vec3};
use crate::perception::{DepthMap, Detection, PerceptionError, PerceptionRecord};

pub const DEFAULT_MIN_POINTS: usize = 25;

const TAIL: f64 = 0.025;
const TAIL_BAND: (f64, f64) = (0.005, 0.06);

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot load depth: {0}")]
    DepthLoad(#[from] PerceptionError),
    #[error("{category} (detection {detection_index}) has {valid_points} valid depth pixels, need {required}")]
    InsufficientDepth { category: String, detection_index: usize, valid_points: usize, required: usize },
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { got: usize, need: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct SceneConfig {
    pub min_points: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { min_points: DEFAULT_MIN_POINTS }
    }
}

/// Object size along its own forward, left and up axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extents {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl Extents {
    pub fn characteristic(&self) -> f64 {
        (self.length * self.width * self.height).cbrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectNode {
    pub category: String,
    pub detection_index: usize,
    pub centroid: Point3,
    pub frame: Option<Frame3>,
    pub extents: Option<Extents>,
    pub point_count: usize,
    pub confidence: f64,
}

impl ObjectNode {
    /// Node with a known pose and no reconstruction statistics.
    pub fn posed(category: &str, centroid: Point3, frame: Option<Frame3>) -> Self {
        Self {
            category: category.to_string(),
            detection_index: 0,
            centroid,
            frame,
            extents: None,
            point_count: 0,
            confidence: 1.0,
        }
    }

    pub fn azimuth(&self, up: &Vec3) -> Option<Azimuth> {
        self.frame.and_then(|f| azimuth_of(&f.forward, up).ok())
    }

    pub fn pitch(&self, up: &Vec3) -> Option<f64> {
        self.frame.map(|f| pitch_of(&f.forward, up))
    }
}

/// A selected detection that was dropped for lack of valid depth.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedObject {
    pub category: String,
    pub detection_index: usize,
    pub valid_points: usize,
}

/// Camera-at-origin reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    pub image_id: String,
    pub up: Vec3,
    pub objects: Vec<ObjectNode>,
    pub dropped: Vec<DroppedObject>,
}

impl SceneGraph {
    pub fn nodes_of<'a>(&'a self, category: &'a str) -> impl Iterator<Item = &'a ObjectNode> + 'a {
        self.objects.iter().filter(move |n| crate::perception::same_category(&n.category, category))
    }

    /// Fails with `InsufficientDepth` if any selected detection was dropped.
    pub fn ensure_complete(&self, min_points: usize) -> Result<(), SceneError> {
        match self.dropped.first() {
            None => Ok(()),
            Some(d) => Err(SceneError::InsufficientDepth {
                category: d.category.clone(),
                detection_index: d.detection_index,
                valid_points: d.valid_points,
                required: min_points,
            }),
        }
    }
}

/// Loads the record's depth file and reconstructs the requested objects.
pub fn reconstruct(
    rec: &PerceptionRecord,
    categories: &[(String, usize)],
    cfg: &SceneConfig,
) -> Result<SceneGraph, SceneError> {
    let depth = rec.load_depth()?;
    reconstruct_with_depth(rec, &depth, categories, cfg)
}

/// Builds one node per selected detection, in requested category order.
/// Detections with fewer than `min_points` valid depth pixels are listed in
/// `dropped` instead.
pub fn reconstruct_with_depth(
    rec: &PerceptionRecord,
    depth: &DepthMap,
    categories: &[(String, usize)],
    cfg: &SceneConfig,
) -> Result<SceneGraph, SceneError> {
    if depth.width != rec.camera.width || depth.height != rec.camera.height {
        return Err(PerceptionError::DimensionMismatch(format!(
            "depth map {}x{} vs camera {}x{}",
            depth.width, depth.height, rec.camera.width, rec.camera.height
        ))
        .into());
    }
    let mut objects = Vec::new();
    let mut dropped = Vec::new();
    for (category, count) in categories {
        for ranked in rec.best_instances(category, *count) {
            let det = ranked.detection;
            let points = object_points(rec, depth, det);
            if points.len() < cfg.min_points.max(1) {
                dropped.push(DroppedObject {
                    category: det.category.clone(),
                    detection_index: ranked.index,
                    valid_points: points.len(),
                });
                continue;
            }
            objects.push(build_node(det, ranked.index, &points));
        }
    }
    Ok(SceneGraph { image_id: rec.image_id.clone(), up: rec.camera.up_hint.normalize(), objects, dropped })
}

fn build_node(det: &Detection, index: usize, points: &[Point3]) -> ObjectNode {
    let (centroid, extents) = match &det.orientation {
        Some(frame) => {
            let mut center = Vec3::zeros();
            let mut sizes = [0.0; 3];
            for (axis, size) in frame.axes().iter().zip(sizes.iter_mut()) {
                let (lo, hi) = extrapolated_support(&footprint_projections(points, axis));
                *size = hi - lo;
                center += axis * (0.5 * (lo + hi));
            }
            let extents = Extents { length: sizes[0], width: sizes[1], height: sizes[2] };
            (Point3::from(center), Some(extents))
        }
        None => (median_point(points), None),
    };
    ObjectNode {
        category: det.category.clone(),
        detection_index: index,
        centroid,
        frame: det.orientation,
        extents,
        point_count: points.len(),
        confidence: det.confidence,
    }
}

/// Camera-frame points under a detection's mask, sampled at pixel centers.
pub fn object_points(rec: &PerceptionRecord, depth: &DepthMap, det: &Detection) -> Vec<Point3> {
    let w = rec.camera.width;
    det.mask
        .foreground()
        .filter_map(|i| {
            let d = depth.at(i)?;
            let (u, v) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
            Some(Point3::from(rec.camera.ray(u, v) * d))
        })
        .collect()
}

/// Writes `x y z` lines for every point of every reconstructed object.
pub fn dump_points<W: Write>(
    rec: &PerceptionRecord,
    depth: &DepthMap,
    scene: &SceneGraph,
    out: &mut W,
) -> io::Result<()> {
    for node in &scene.objects {
        for p in object_points(rec, depth, &rec.detections[node.detection_index]) {
            writeln!(out, "{} {} {}", p.x, p.y, p.z)?;
        }
    }
    Ok(())
}

/// Coordinate-wise median.
pub fn object_centroid(points: &[Point3]) -> Result<Point3, SceneError> {
    if points.is_empty() {
        return Err(SceneError::TooFewPoints { got: 0, need: 1 });
    }
    Ok(median_point(points))
}

/// Robust size along `axis`: the 2.5th to 97.5th percentile range of the
/// projections. Sign-invariant in `axis`.
pub fn object_extent(points: &[Point3], axis: &Vec3) -> Result<f64, SceneError> {
    if points.is_empty() {
        return Err(SceneError::TooFewPoints { got: 0, need: 1 });
    }
    Ok(robust_range(&sorted_projections(points, axis)))
}

pub fn camera_object_distance(node: &ObjectNode) -> f64 {
    node.centroid.coords.norm()
}

fn median_point(points: &[Point3]) -> Point3 {
    let coord = |k: usize| {
        let mut v: Vec<f64> = points.iter().map(|p| p[k]).collect();
        v.sort_by(f64::total_cmp);
        quantile(&v, 0.5)
    };
    Point3::new(coord(0), coord(1), coord(2))
}

/// Projections onto `axis`, each weighted by its pixel footprint (depth
/// squared), sorted by value.
fn footprint_projections(points: &[Point3], axis: &Vec3) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = points.iter().map(|p| (p.coords.dot(axis), p.z * p.z)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

fn sorted_projections(points: &[Point3], axis: &Vec3) -> Vec<f64> {
    let mut v: Vec<f64> = points.iter().map(|p| p.coords.dot(axis)).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn robust_range(sorted: &[f64]) -> f64 {
    quantile(sorted, 1.0 - TAIL) - quantile(sorted, TAIL)
}

/// Support estimated by a least-squares line through each tail of the
/// weighted quantile function, over the cumulative-weight band `TAIL_BAND`,
/// evaluated at 0 and 1. Exact for uniform bodies and for point masses at
/// the ends; fitting a band rather than two quantiles keeps pixel-row
/// staircases from being amplified.
///
/// `samples` are `(value, weight)` sorted by value.
fn extrapolated_support(samples: &[(f64, f64)]) -> (f64, f64) {
    let n = samples.len();
    if n < 4 {
        return (samples[0].0, samples[n - 1].0);
    }
    let total: f64 = samples.iter().map(|s| s.1).sum();
    let mut acc = 0.0;
    let mids: Vec<f64> = samples
        .iter()
        .map(|(_, w)| {
            let m = (acc + 0.5 * w) / total;
            acc += w;
            m
        })
        .collect();
    let lo = tail_intercept(samples.iter().zip(&mids).map(|((x, _), p)| (*p, *x)));
    let hi = tail_intercept(samples.iter().zip(&mids).rev().map(|((x, _), p)| (1.0 - p, *x)));
    (lo, hi)
}

/// Intercept at level 0 of the line fitted to the `(level, value)` pairs
/// inside the tail band. Pairs arrive in increasing level order.
fn tail_intercept(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut band = Vec::new();
    let mut head = Vec::with_capacity(2);
    for (p, x) in pairs {
        if head.len() < 2 {
            head.push((p, x));
        }
        if p > TAIL_BAND.1 {
            break;
        }
        if p >= TAIL_BAND.0 {
            band.push((p, x));
        }
    }
    if band.len() < 2 {
        band = head;
    }
    let k = band.len() as f64;
    let (sp, sx) = band.iter().fold((0.0, 0.0), |(a, b), (p, x)| (a + p, b + x));
    let (mp, mx) = (sp / k, sx / k);
    let (mut spp, mut spx) = (0.0, 0.0);
    for (p, x) in &band {
        spp += (p - mp) * (p - mp);
        spx += (p - mp) * (x - mx);
    }
    if spp <= 0.0 {
        return mx;
    }
    mx - spx / spp * mp
}

/// Linear-interpolated quantile of sorted data at rank `p * (n - 1)`.
///
/// Upper quantiles are interpolated from the top end so that negating the
/// data mirrors every quantile exactly.
pub(crate) fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let from_top = p > 0.5;
    let rank = if from_top { 1.0 - p } else { p } * (n - 1) as f64;
    let i = (rank.floor() as usize).min(n - 2);
    let frac = rank - i as f64;
    if from_top {
        let j = n - 1 - i;
        sorted[j] - (sorted[j] - sorted[j - 1]) * frac
    } else {
        sorted[i] + (sorted[i + 1] - sorted[i]) * frac
    }
}
