//! Synthetic oracle: analytic perception records for scenes of oriented
//! boxes, plus scenes built to satisfy or violate a target spec.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::bench::CategoryList;
use crate::geometry::{Azimuth, CameraModel, Frame3, HorizontalBasis, Point3, Vec3};
use crate::perception::{BBox, DepthMap, DepthRef, Detection, PerceptionError, PerceptionRecord, RleMask};
use crate::predicates::{Dimension, MeasurementKind, MoveDirection, RelationLabel};
use crate::scoring::{SubDomain, TargetSpec, Task};

pub const ORACLE_WIDTH: u32 = 640;
pub const ORACLE_HEIGHT: u32 = 480;
pub const ORACLE_FOCAL: f64 = 500.0;
/// Downward tilt of the oracle camera, so that box tops are visible.
pub const ORACLE_PITCH: f64 = 30.0;

const CONFIDENCE: f64 = 0.9;
const AZIMUTH_JITTER: f64 = 8.0;
const METRIC_JITTER: f64 = 0.05;
const OFF_AXIS: f64 = 90.0;
const OFF_METRIC: f64 = 1.75;
const FRAME_MARGIN: f64 = 12.0;
const MIN_VISIBLE_PIXELS: usize = 400;
const SPREAD_ATTEMPTS: usize = 8;
const SPREAD_FACTOR: f64 = 1.35;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid oracle scene: {0}")]
    InvalidScene(String),
    #[error("{0} does not project into the image")]
    EmptyFrustum(String),
    #[error("cannot build a scene for this spec: {0}")]
    UnsatisfiableSpec(String),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleObject {
    pub category: String,
    pub center: Point3,
    pub azimuth: Azimuth,
    /// Length (along forward), width (along left), height (along up).
    pub dims: [f64; 3],
    pub confidence: f64,
}

impl OracleObject {
    pub fn frame(&self, basis: &HorizontalBasis) -> Frame3 {
        Frame3::from_azimuth(self.azimuth, basis)
    }

    fn half_axes(&self, basis: &HorizontalBasis) -> [Vec3; 3] {
        let f = self.frame(basis);
        [f.forward * (self.dims[0] / 2.0), f.left * (self.dims[1] / 2.0), f.up * (self.dims[2] / 2.0)]
    }

    pub fn corners(&self, basis: &HorizontalBasis) -> [Point3; 8] {
        let [a, b, c] = self.half_axes(basis);
        std::array::from_fn(|i| {
            let s = |bit: usize| if i >> bit & 1 == 1 { 1.0 } else { -1.0 };
            self.center + a * s(0) + b * s(1) + c * s(2)
        })
    }

    pub fn circumradius(&self) -> f64 {
        0.5 * (self.dims[0].powi(2) + self.dims[1].powi(2) + self.dims[2].powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Noise {
    /// Gaussian depth noise, meters.
    pub depth_sigma: f64,
    /// Gaussian azimuth noise on emitted orientations, degrees.
    pub orientation_sigma: f64,
    /// Mask erosion, pixels.
    pub mask_erosion: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleScene {
    pub camera: CameraModel,
    pub objects: Vec<OracleObject>,
    pub noise: Noise,
}

impl OracleScene {
    pub fn new(camera: CameraModel, objects: Vec<OracleObject>) -> Self {
        Self { camera, objects, noise: Noise::default() }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidScene(m));
        self.camera.validate().map_err(|e| SynthError::InvalidScene(e.to_string()))?;
        let n = self.noise;
        if !(n.depth_sigma >= 0.0 && n.orientation_sigma >= 0.0) {
            return bad(format!("negative noise {n:?}"));
        }
        for o in &self.objects {
            if !o.dims.iter().all(|d| d.is_finite() && *d > 0.0) {
                return bad(format!("{} has non-positive dims {:?}", o.category, o.dims));
            }
            if !(0.0..=1.0).contains(&o.confidence) {
                return bad(format!("{} confidence {}", o.category, o.confidence));
            }
            if !(o.center.z > o.circumradius()) {
                return Err(SynthError::EmptyFrustum(o.category.clone()));
            }
        }
        Ok(())
    }

    /// Rotates every object about the vertical axis through `pivot`.
    pub fn yawed(&self, degrees: f64, pivot: &Point3) -> Self {
        let basis = self.camera.horizontal();
        let rot = basis.yaw(degrees);
        let mut out = self.clone();
        for o in &mut out.objects {
            o.center = pivot + rot * (o.center - pivot);
            o.azimuth = o.azimuth.rotated(degrees);
        }
        out
    }
}

/// 640×480, f = 500, principal point at the center, pitched down.
pub fn oracle_camera() -> CameraModel {
    let p = ORACLE_PITCH.to_radians();
    CameraModel::new(ORACLE_FOCAL, ORACLE_FOCAL, ORACLE_WIDTH as f64 / 2.0, ORACLE_HEIGHT as f64 / 2.0, ORACLE_WIDTH, ORACLE_HEIGHT)
        .and_then(|c| c.with_up(Vec3::new(0.0, -p.cos(), -p.sin())))
        .expect("oracle camera is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub record: PerceptionRecord,
    pub depth: DepthMap,
}

impl Rendered {
    /// Writes `records/<id>.json` and `depth/<id>.f32` under `root`.
    pub fn write(&self, root: &Path) -> Result<(), PerceptionError> {
        let id = &self.record.image_id;
        self.record.save(&root.join("records").join(format!("{id}.json")))?;
        self.depth.save(&root.join(&self.record.depth.uri))
    }
}

struct Slab {
    center: Vec3,
    axes: [Vec3; 3],
    half: [f64; 3],
}

impl Slab {
    /// Entry distance along `ray` (scaled so that z = 1, which makes the
    /// distance equal the z-depth), if the ray hits the box in front.
    fn hit(&self, ray: &Vec3) -> Option<f64> {
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        for k in 0..3 {
            let o = -self.center.dot(&self.axes[k]);
            let d = ray.dot(&self.axes[k]);
            if d.abs() < 1e-15 {
                if o.abs() > self.half[k] {
                    return None;
                }
                continue;
            }
            let (a, b) = ((-self.half[k] - o) / d, (self.half[k] - o) / d);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        (t0 <= t1 && t0 > 0.0).then_some(t0)
    }
}

fn erode(mask: &[bool], w: usize, h: usize, steps: u32) -> Vec<bool> {
    let mut cur = mask.to_vec();
    for _ in 0..steps {
        let prev = cur.clone();
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                if prev[i] {
                    let inside = |rr: usize, cc: usize| prev[rr * w + cc];
                    let keep = r > 0 && r + 1 < h && c > 0 && c + 1 < w
                        && inside(r - 1, c)
                        && inside(r + 1, c)
                        && inside(r, c - 1)
                        && inside(r, c + 1);
                    cur[i] = keep;
                }
            }
        }
    }
    cur
}

struct Raycast {
    boxes: Vec<BBox>,
    nearest: Vec<f64>,
    owner: Vec<usize>,
}

fn raycast(scene: &OracleScene) -> Result<Raycast, SynthError> {
    let cam = &scene.camera;
    let basis = cam.horizontal();
    let (w, h) = (cam.width as usize, cam.height as usize);
    let mut boxes = Vec::with_capacity(scene.objects.len());
    let mut slabs = Vec::with_capacity(scene.objects.len());
    for o in &scene.objects {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in o.corners(&basis) {
            let px = cam.project(&c).map_err(|_| SynthError::EmptyFrustum(o.category.clone()))?;
            x0 = x0.min(px.x);
            y0 = y0.min(px.y);
            x1 = x1.max(px.x);
            y1 = y1.max(px.y);
        }
        let bbox = BBox { x0: x0.max(0.0), y0: y0.max(0.0), x1: x1.min(w as f64), y1: y1.min(h as f64) };
        if !(bbox.x0 < bbox.x1 && bbox.y0 < bbox.y1) {
            return Err(SynthError::EmptyFrustum(o.category.clone()));
        }
        let f = o.frame(&basis);
        slabs.push(Slab { center: o.center.coords, axes: f.axes(), half: o.dims.map(|d| d / 2.0) });
        boxes.push(bbox);
    }

    let mut nearest = vec![f64::INFINITY; w * h];
    let mut owner = vec![usize::MAX; w * h];
    for (i, (bbox, slab)) in boxes.iter().zip(&slabs).enumerate() {
        let (c0, c1) = (bbox.x0.floor() as usize, (bbox.x1.ceil() as usize).min(w));
        let (r0, r1) = (bbox.y0.floor() as usize, (bbox.y1.ceil() as usize).min(h));
        for r in r0..r1 {
            for c in c0..c1 {
                let ray = cam.ray(c as f64 + 0.5, r as f64 + 0.5);
                if let Some(t) = slab.hit(&ray) {
                    let k = r * w + c;
                    if t < nearest[k] {
                        nearest[k] = t;
                        owner[k] = i;
                    }
                }
            }
        }
    }
    Ok(Raycast { boxes, nearest, owner })
}

/// Visible pixel count per object.
pub fn visible_pixels(scene: &OracleScene) -> Result<Vec<usize>, SynthError> {
    let rc = raycast(scene)?;
    let mut counts = vec![0; scene.objects.len()];
    for &k in rc.owner.iter().filter(|&&k| k != usize::MAX) {
        counts[k] += 1;
    }
    Ok(counts)
}

/// Ray-casts the scene. Each pixel center takes the nearest box hit; pixels
/// that miss every box carry depth 0 (invalid).
pub fn render(scene: &OracleScene, image_id: &str, seed: u64) -> Result<Rendered, SynthError> {
    scene.validate()?;
    let cam = &scene.camera;
    let basis = cam.horizontal();
    let (w, h) = (cam.width as usize, cam.height as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Raycast { boxes, nearest, owner } = raycast(scene)?;

    let azimuths: Vec<Azimuth> = if scene.noise.orientation_sigma > 0.0 {
        let n = Normal::new(0.0, scene.noise.orientation_sigma).expect("sigma is finite");
        scene.objects.iter().map(|o| o.azimuth.rotated(n.sample(&mut rng))).collect()
    } else {
        scene.objects.iter().map(|o| o.azimuth).collect()
    };
    let mut values: Vec<f32> = nearest.iter().map(|&t| if t.is_finite() { t as f32 } else { 0.0 }).collect();
    if scene.noise.depth_sigma > 0.0 {
        let n = Normal::new(0.0, scene.noise.depth_sigma).expect("sigma is finite");
        for v in values.iter_mut().filter(|v| **v > 0.0) {
            *v = (*v as f64 + n.sample(&mut rng)).max(1e-3) as f32;
        }
    }

    let mut detections = Vec::with_capacity(scene.objects.len());
    for (i, (o, bbox)) in scene.objects.iter().zip(&boxes).enumerate() {
        let bitmap: Vec<bool> = owner.iter().map(|&k| k == i).collect();
        let bitmap = erode(&bitmap, w, h, scene.noise.mask_erosion);
        detections.push(Detection {
            category: o.category.clone(),
            confidence: o.confidence,
            bbox: *bbox,
            mask: RleMask::encode(cam.width, cam.height, &bitmap),
            orientation: Some(Frame3::from_azimuth(azimuths[i], &basis)),
            orientation_confidence: Some(1.0),
        });
    }
    let record = PerceptionRecord {
        image_id: image_id.to_string(),
        camera: cam.clone(),
        depth: DepthRef { uri: format!("depth/{image_id}.f32"), width: cam.width, height: cam.height },
        detections,
        source_image_id: None,
        base_dir: None,
    };
    let depth = DepthMap::new(cam.width, cam.height, values)?;
    Ok(Rendered { record, depth })
}

/// Oracle scenes for one benchmark sample: the scene shown by the generated
/// or edited image and, for editing, the source scene.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCase {
    pub source: Option<OracleScene>,
    pub target: OracleScene,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedCase {
    pub source: Option<Rendered>,
    pub target: Rendered,
}

impl OracleCase {
    pub fn render(&self, image_id: &str, source_id: Option<&str>, seed: u64) -> Result<RenderedCase, SynthError> {
        let mut target = render(&self.target, image_id, seed)?;
        let source = match (&self.source, source_id) {
            (Some(s), Some(id)) => Some(render(s, id, seed ^ 0xA5A5_A5A5)?),
            (Some(_), None) => return Err(SynthError::InvalidScene("source scene needs an id".into())),
            _ => None,
        };
        if let Some(id) = source_id {
            target.record.source_image_id = Some(id.to_string());
        }
        Ok(RenderedCase { source, target })
    }
}

/// Object placed on a horizontal stage: offsets are along camera right and
/// ahead from an anchor on the optical axis; all centers share its height.
#[derive(Debug, Clone)]
struct Placed {
    category: String,
    offset: [f64; 2],
    azimuth: f64,
    dims: [f64; 3],
}

fn heading(degrees: f64) -> [f64; 2] {
    let r = degrees.to_radians();
    [r.sin(), r.cos()]
}

fn along(from: [f64; 2], degrees: f64, dist: f64) -> [f64; 2] {
    let d = heading(degrees);
    [from[0] + d[0] * dist, from[1] + d[1] * dist]
}

fn realize(stage: &[Placed], cam: &CameraModel, range: f64) -> OracleScene {
    let b = cam.horizontal();
    let anchor = Point3::new(0.0, 0.0, range);
    let objects = stage
        .iter()
        .map(|p| OracleObject {
            category: p.category.clone(),
            center: anchor + b.right * p.offset[0] + b.ahead * p.offset[1],
            azimuth: Azimuth::new(p.azimuth),
            dims: p.dims,
            confidence: CONFIDENCE,
        })
        .collect();
    OracleScene::new(cam.clone(), objects)
}

fn in_frame(scene: &OracleScene) -> bool {
    let cam = &scene.camera;
    let basis = cam.horizontal();
    scene.objects.iter().all(|o| {
        o.corners(&basis).iter().all(|c| {
            c.z > 0.2
                && cam.project(c).is_ok_and(|px| {
                    px.x >= FRAME_MARGIN
                        && px.y >= FRAME_MARGIN
                        && px.x <= cam.width as f64 - FRAME_MARGIN
                        && px.y <= cam.height as f64 - FRAME_MARGIN
                })
        })
    })
}

/// Smallest anchor range at which every stage fits in the frame.
fn fit_range(stages: &[&[Placed]], cam: &CameraModel) -> Result<f64, SynthError> {
    (0..400)
        .map(|i| 1.0 + 0.1 * i as f64)
        .find(|&r| stages.iter().all(|s| in_frame(&realize(s, cam, r))))
        .ok_or_else(|| SynthError::UnsatisfiableSpec("scene does not fit the frame".into()))
}

struct Builder<'a> {
    spec: &'a TargetSpec,
    categories: &'a CategoryList,
    rng: ChaCha8Rng,
    conforming: bool,
}

impl Builder<'_> {
    fn natural_dims(&self, name: &str) -> [f64; 3] {
        self.categories.get(name).map(|c| [c.length, c.width, c.height]).unwrap_or([0.5, 0.5, 0.5])
    }

    /// Category dimensions rescaled so the largest side lies in [0.4, 1.0] m,
    /// keeping mixed-size pairs legible at one camera range.
    fn dims(&self, name: &str) -> [f64; 3] {
        let d = self.natural_dims(name);
        let m = d.iter().cloned().fold(0.0, f64::max);
        let s = m.clamp(0.4, 1.0) / m;
        d.map(|x| x * s)
    }

    fn name(&self, i: usize) -> Result<String, SynthError> {
        self.spec
            .categories
            .get(i)
            .map(|c| c.name.clone())
            .ok_or_else(|| SynthError::UnsatisfiableSpec(format!("spec names no object {}", i + 1)))
    }

    fn jitter(&mut self) -> f64 {
        self.rng.random_range(-AZIMUTH_JITTER..=AZIMUTH_JITTER)
    }

    fn any_azimuth(&mut self) -> f64 {
        self.rng.random_range(0.0..360.0)
    }

    /// Metric value realized in the scene: within 5% of the target when
    /// conforming, 75% above it otherwise.
    fn metric(&mut self, target: f64) -> f64 {
        if self.conforming {
            target * (1.0 + self.rng.random_range(-METRIC_JITTER..=METRIC_JITTER))
        } else {
            target * OFF_METRIC
        }
    }

    /// Realized azimuth for a target: jittered, and a quarter turn away
    /// when non-conforming.
    fn pose(&mut self) -> Result<f64, SynthError> {
        let t = self
            .spec
            .azimuth_target
            .ok_or_else(|| SynthError::UnsatisfiableSpec("spec has no azimuth target".into()))?
            .degrees();
        let off = if self.conforming { 0.0 } else { OFF_AXIS };
        Ok(t + off + self.jitter())
    }

    fn separation(&self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        let m = a.iter().chain(b).cloned().fold(0.0, f64::max);
        1.5 * m + 0.3
    }

    fn metric_target(&self) -> Result<(MeasurementKind, f64), SynthError> {
        self.spec
            .metric_target
            .map(|m| (m.kind, m.value))
            .ok_or_else(|| SynthError::UnsatisfiableSpec("spec has no metric target".into()))
    }

    fn relation(&self) -> Result<RelationLabel, SynthError> {
        self.spec.relation_target.ok_or_else(|| SynthError::UnsatisfiableSpec("spec has no relation target".into()))
    }

    fn single(&mut self, azimuth: f64) -> Result<Placed, SynthError> {
        let name = self.name(0)?;
        Ok(Placed { dims: self.dims(&name), category: name, offset: [0.0, 0.0], azimuth })
    }

    /// Subject/reference pair realizing a camera or reference-frame relation.
    fn related_pair(&mut self) -> Result<Vec<Placed>, SynthError> {
        let (a, b) = (self.name(0)?, self.name(1)?);
        let (da, db) = (self.dims(&a), self.dims(&b));
        let s = self.separation(&da, &db);
        let label = self.relation()?;
        let ref_az = self.any_azimuth();
        let base = match label {
            RelationLabel::EgoFront => 180.0,
            RelationLabel::EgoBehind => 0.0,
            RelationLabel::EgoLeft => 270.0,
            RelationLabel::EgoRight => 90.0,
            RelationLabel::AlloFront => ref_az,
            RelationLabel::AlloBehind => ref_az + 180.0,
            RelationLabel::AlloLeft => ref_az - 90.0,
            RelationLabel::AlloRight => ref_az + 90.0,
            other => return Err(SynthError::UnsatisfiableSpec(format!("{other:?} is not a directional relation"))),
        };
        let bearing = base + if self.conforming { 0.0 } else { OFF_AXIS } + self.jitter();
        let subject_az = self.any_azimuth();
        Ok(vec![
            Placed { category: a, offset: along([0.0, 0.0], bearing, s), azimuth: subject_az, dims: da },
            Placed { category: b, offset: [0.0, 0.0], azimuth: ref_az, dims: db },
        ])
    }

    fn intrinsic_pair(&mut self) -> Result<Vec<Placed>, SynthError> {
        use RelationLabel::*;
        const CYCLE: [RelationLabel; 4] = [SideBySideSame, SideBySideOpposite, FaceToFace, BackToBack];
        let target = self.relation()?;
        let idx = CYCLE
            .iter()
            .position(|l| *l == target)
            .ok_or_else(|| SynthError::UnsatisfiableSpec(format!("{target:?} is not an intrinsic relation")))?;
        let label = if self.conforming { target } else { CYCLE[(idx + 1) % 4] };
        let (a, b) = (self.name(0)?, self.name(1)?);
        let (da, db) = (self.dims(&a), self.dims(&b));
        let s = self.separation(&da, &db);
        let flip = if self.rng.random_bool(0.5) { 180.0 } else { 0.0 };
        let spread = self.rng.random_range(-30.0..=30.0);
        // keep the displacement across the image rather than along the view
        let (base, bearing, b_az) = match label {
            SideBySideSame => (180.0 + flip + spread, 90.0, 0.0),
            SideBySideOpposite => (180.0 + flip + spread, 90.0, 180.0),
            FaceToFace => (90.0 + flip + spread, 0.0, 180.0),
            _ => (90.0 + flip + spread, 180.0, 180.0),
        };
        let side = if self.rng.random_bool(0.5) { 0.0 } else { 180.0 };
        let bearing = base + bearing + if label == SideBySideSame || label == SideBySideOpposite { side } else { 0.0 };
        let a_az = base + self.jitter();
        let b_off = along([0.0, 0.0], bearing + self.jitter(), s);
        let b_az = base + b_az + self.jitter();
        Ok(vec![
            Placed { category: a, offset: [0.0, 0.0], azimuth: a_az, dims: da },
            Placed { category: b, offset: b_off, azimuth: b_az, dims: db },
        ])
    }

    /// obj1 at `azimuth` with obj2 beside it, on its left or right.
    fn side_by_side(&mut self, azimuth: f64) -> Result<Vec<Placed>, SynthError> {
        let (a, b) = (self.name(0)?, self.name(1)?);
        let (da, db) = (self.dims(&a), self.dims(&b));
        let s = self.separation(&da, &db);
        let side = if self.rng.random_bool(0.5) { 90.0 } else { -90.0 };
        let off = along([0.0, 0.0], azimuth + side + self.jitter(), s);
        let b_az = self.any_azimuth();
        Ok(vec![
            Placed { category: a, offset: [0.0, 0.0], azimuth, dims: da },
            Placed { category: b, offset: off, azimuth: b_az, dims: db },
        ])
    }

    fn resized(&mut self, dims: [f64; 3], dim: Dimension, delta: f64) -> [f64; 3] {
        let mut d = dims;
        match dim {
            Dimension::Length => d[0] += delta,
            Dimension::Width => d[1] += delta,
            Dimension::Height => d[2] += delta,
            Dimension::Characteristic => {
                let c = (d[0] * d[1] * d[2]).cbrt();
                d = d.map(|x| x * (1.0 + delta / c));
            }
        }
        d
    }

    fn build(&mut self) -> Result<OracleCase, SynthError> {
        let cam = oracle_camera();
        let spec = self.spec;
        // free layouts may be spread apart until nothing is hidden
        let spreadable = matches!(
            spec.sub_domain,
            SubDomain::ComplexPose | SubDomain::Egocentric | SubDomain::Allocentric | SubDomain::Intrinsic
        );
        let staged = |_: &Self, source: Option<Vec<Placed>>, target: Vec<Placed>| {
            let (mut source, mut target) = (source, target);
            for _ in 0..SPREAD_ATTEMPTS {
                let mut stages: Vec<&[Placed]> = vec![&target];
                if let Some(s) = &source {
                    stages.push(s);
                }
                let r = fit_range(&stages, &cam)?;
                let case = OracleCase {
                    source: source.as_ref().map(|s| realize(s, &cam, r)),
                    target: realize(&target, &cam, r),
                };
                let visible = |scene: &OracleScene| {
                    visible_pixels(scene).is_ok_and(|v| v.iter().all(|&n| n >= MIN_VISIBLE_PIXELS))
                };
                if !spreadable || (visible(&case.target) && case.source.as_ref().is_none_or(visible)) {
                    return Ok(case);
                }
                for p in target.iter_mut().chain(source.iter_mut().flatten()) {
                    p.offset = p.offset.map(|x| x * SPREAD_FACTOR);
                }
            }
            Err(SynthError::UnsatisfiableSpec("objects occlude each other".into()))
        };
        use SubDomain::*;
        match (spec.task, spec.sub_domain) {
            (Task::Generation, ObjectPose | CameraPose) => {
                let az = self.pose()?;
                let t = vec![self.single(az)?];
                staged(self, None, t)
            }
            (Task::Editing, ObjectPose | CameraPose) => {
                let az = self.pose()?;
                let turn = 90.0 * self.rng.random_range(1..4) as f64;
                let src = vec![self.single(az + turn)?];
                let t = vec![self.single(az)?];
                staged(self, Some(src), t)
            }
            (Task::Generation, ComplexPose) => {
                let az = self.pose()?;
                let t = self.side_by_side(az)?;
                staged(self, None, t)
            }
            (Task::Editing, ComplexPose) => {
                let az = self.pose()?;
                let turn = 90.0 * self.rng.random_range(1..4) as f64;
                let src = self.side_by_side(az + turn)?;
                // the camera orbits obj1: the whole arrangement turns about it
                let t = src
                    .iter()
                    .map(|p| {
                        let [x, z] = p.offset;
                        let (s, c) = (-turn).to_radians().sin_cos();
                        Placed { offset: [x * c + z * s, -x * s + z * c], azimuth: p.azimuth - turn, ..p.clone() }
                    })
                    .collect();
                staged(self, Some(src), t)
            }
            (task, Egocentric | Allocentric) => {
                let t = self.related_pair()?;
                let src = (task == Task::Editing).then(|| t[1..].to_vec());
                staged(self, src, t)
            }
            (task, Intrinsic) => {
                let t = self.intrinsic_pair()?;
                let src = (task == Task::Editing).then(|| t[1..].to_vec());
                staged(self, src, t)
            }
            (Task::Generation, ObjectSize) => {
                let (kind, n) = self.metric_target()?;
                let MeasurementKind::Dim(dim) = kind else {
                    return Err(SynthError::UnsatisfiableSpec(format!("{kind:?} for object size")));
                };
                let name = self.name(0)?;
                let small = self.natural_dims(&name);
                let delta = self.metric(n);
                let big = self.resized(small, dim, delta);
                let s = self.separation(&small, &big);
                let (az1, az2) = (self.any_azimuth(), self.any_azimuth());
                let t = vec![
                    Placed { category: name.clone(), offset: [-s / 2.0, 0.0], azimuth: az1, dims: small },
                    Placed { category: name, offset: [s / 2.0, 0.0], azimuth: az2, dims: big },
                ];
                staged(self, None, t)
            }
            (Task::Editing, ObjectSize) => {
                let (kind, n) = self.metric_target()?;
                let MeasurementKind::DeltaDim(dim) = kind else {
                    return Err(SynthError::UnsatisfiableSpec(format!("{kind:?} for a size edit")));
                };
                let az = self.any_azimuth();
                let name = self.name(0)?;
                let dims = self.natural_dims(&name);
                let src = vec![Placed { category: name, offset: [0.0, 0.0], azimuth: az, dims }];
                let delta = self.metric(n);
                let t = vec![Placed { dims: self.resized(dims, dim, delta), ..src[0].clone() }];
                staged(self, Some(src), t)
            }
            (Task::Generation, ObjectDistance) => {
                let (_, gap) = self.metric_target()?;
                let gap = self.metric(gap);
                let (a, b) = (self.name(0)?, self.name(1)?);
                let cap = 0.45 * gap;
                let shrink = |d: [f64; 3]| {
                    let m = d.iter().cloned().fold(0.0, f64::max);
                    d.map(|x| x * (cap / m).min(1.0))
                };
                let (da, db) = (shrink(self.dims(&a)), shrink(self.dims(&b)));
                let bearing = 90.0 + self.jitter();
                let (az1, az2) = (self.any_azimuth(), self.any_azimuth());
                let t = vec![
                    Placed { category: a, offset: along([0.0, 0.0], bearing, -gap / 2.0), azimuth: az1, dims: da },
                    Placed { category: b, offset: along([0.0, 0.0], bearing, gap / 2.0), azimuth: az2, dims: db },
                ];
                staged(self, None, t)
            }
            (Task::Editing, ObjectDistance | CameraDistance) => {
                let (kind, step) = self.metric_target()?;
                let (MeasurementKind::DeltaMove(dir) | MeasurementKind::DeltaCameraMove(dir)) = kind else {
                    return Err(SynthError::UnsatisfiableSpec(format!("{kind:?} for a move edit")));
                };
                let moved = if self.conforming { dir } else { adjacent(dir) };
                let step = if self.conforming { self.metric(step) } else { step };
                let v = move_offset(moved, step);
                let az = self.any_azimuth();
                let src = vec![self.single(az)?];
                let sign = if sub_is_camera(kind) { -1.0 } else { 1.0 };
                let t = vec![Placed { offset: [sign * v[0], sign * v[1]], ..src[0].clone() }];
                staged(self, Some(src), t)
            }
            (Task::Generation, CameraDistance) => {
                let (_, range) = self.metric_target()?;
                let range = self.metric(range);
                let az = self.any_azimuth();
                let mut p = self.single(az)?;
                p.dims = self.natural_dims(&p.category);
                let mut tries = 0;
                while !in_frame(&realize(std::slice::from_ref(&p), &cam, range)) {
                    p.dims = p.dims.map(|d| d * 0.9);
                    tries += 1;
                    if tries > 100 {
                        return Err(SynthError::UnsatisfiableSpec(format!("nothing fits at {range} m")));
                    }
                }
                Ok(OracleCase { source: None, target: realize(&[p], &cam, range) })
            }
        }
    }
}

fn sub_is_camera(kind: MeasurementKind) -> bool {
    matches!(kind, MeasurementKind::DeltaCameraMove(_))
}

fn adjacent(dir: MoveDirection) -> MoveDirection {
    match dir {
        MoveDirection::Forward => MoveDirection::Right,
        MoveDirection::Right => MoveDirection::Backward,
        MoveDirection::Backward => MoveDirection::Left,
        MoveDirection::Left => MoveDirection::Forward,
    }
}

/// Stage offset (right, ahead) of a move.
fn move_offset(dir: MoveDirection, step: f64) -> [f64; 2] {
    match dir {
        MoveDirection::Forward => [0.0, step],
        MoveDirection::Backward => [0.0, -step],
        MoveDirection::Left => [-step, 0.0],
        MoveDirection::Right => [step, 0.0],
    }
}

/// Builds oracle scenes that satisfy the spec with margin (`conforming`) or
/// violate it beyond the scoring knees.
pub fn render_target(
    spec: &TargetSpec,
    categories: &CategoryList,
    seed: u64,
    conforming: bool,
) -> Result<OracleCase, SynthError> {
    spec.validate().map_err(|e| SynthError::UnsatisfiableSpec(e.to_string()))?;
    Builder { spec, categories, rng: ChaCha8Rng::seed_from_u64(seed), conforming }.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{reconstruct_with_depth, SceneConfig};

    fn cube(center: Point3, azimuth: f64) -> OracleObject {
        OracleObject { category: "cube".into(), center, azimuth: Azimuth::new(azimuth), dims: [1.0; 3], confidence: 0.9 }
    }

    fn rebuild(r: &Rendered, cats: &[(&str, usize)]) -> crate::scene::SceneGraph {
        let cats: Vec<(String, usize)> = cats.iter().map(|(c, n)| (c.to_string(), *n)).collect();
        reconstruct_with_depth(&r.record, &r.depth, &cats, &SceneConfig::default()).unwrap()
    }

    #[test]
    fn unit_cube_round_trip() {
        let scene = OracleScene::new(oracle_camera(), vec![cube(Point3::new(0.0, 0.0, 3.0), 0.0)]);
        let r = render(&scene, "cube", 1).unwrap();
        let g = rebuild(&r, &[("cube", 1)]);
        let n = &g.objects[0];
        assert!((n.centroid - Point3::new(0.0, 0.0, 3.0)).norm() < 0.01, "{:?}", n.centroid);
        let az = n.azimuth(&g.up).unwrap();
        assert!(crate::geometry::azimuth_diff(az, Azimuth::new(0.0)) < 0.5);
        let e = n.extents.unwrap();
        for d in [e.length, e.width, e.height] {
            assert!((d - 1.0).abs() < 0.05, "{e:?}");
        }
    }

    #[test]
    fn depth_is_analytic_on_the_optical_axis() {
        let cam = CameraModel::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let scene = OracleScene::new(cam, vec![cube(Point3::new(0.0, 0.0, 3.0), 0.0)]);
        let r = render(&scene, "axis", 0).unwrap();
        // the pixel straddling the principal point sees the near face at z = 2.5
        assert!((r.depth.values[240 * 640 + 320] - 2.5).abs() < 1e-6);
        assert_eq!(r.depth.values[0], 0.0);
    }

    #[test]
    fn occluded_box_gets_an_empty_mask() {
        let cam = CameraModel::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let mut near = cube(Point3::new(0.0, 0.0, 3.0), 0.0);
        near.dims = [0.5, 3.0, 3.0];
        let mut far = cube(Point3::new(0.0, 0.0, 6.0), 0.0);
        far.category = "far".into();
        far.dims = [0.5; 3];
        let r = render(&OracleScene::new(cam, vec![near, far]), "occ", 0).unwrap();
        assert_eq!(r.record.detections[1].mask.area(), 0);
        let cats = vec![("far".to_string(), 1)];
        let g = reconstruct_with_depth(&r.record, &r.depth, &cats, &SceneConfig::default()).unwrap();
        assert!(g.ensure_complete(25).is_err());
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut scene = OracleScene::new(oracle_camera(), vec![cube(Point3::new(0.3, 0.1, 4.0), 40.0)]);
        scene.noise = Noise { depth_sigma: 0.02, orientation_sigma: 3.0, mask_erosion: 1 };
        let a = render(&scene, "n", 9).unwrap();
        let b = render(&scene, "n", 9).unwrap();
        assert_eq!(a.depth.to_le_bytes(), b.depth.to_le_bytes());
        assert_eq!(a.record.to_canonical_json(), b.record.to_canonical_json());
        let c = render(&scene, "n", 10).unwrap();
        assert_ne!(a.depth.to_le_bytes(), c.depth.to_le_bytes());
        assert!(a.record.validate().is_ok());
    }

    #[test]
    fn off_screen_box_is_rejected() {
        let scene = OracleScene::new(oracle_camera(), vec![cube(Point3::new(50.0, 0.0, 3.0), 0.0)]);
        assert!(matches!(render(&scene, "x", 0), Err(SynthError::EmptyFrustum(_))));
        let scene = OracleScene::new(oracle_camera(), vec![cube(Point3::new(0.0, 0.0, 0.5), 0.0)]);
        assert!(matches!(render(&scene, "x", 0), Err(SynthError::EmptyFrustum(_))));
    }

    #[test]
    fn erosion_shrinks_masks() {
        let m = vec![true; 25];
        let e = erode(&m, 5, 5, 1);
        assert_eq!(e.iter().filter(|b| **b).count(), 9);
        assert_eq!(erode(&m, 5, 5, 2).iter().filter(|b| **b).count(), 1);
    }
}
