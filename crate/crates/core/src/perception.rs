//! Interchange format between perception backends and the evaluator.
//!
//! One JSON manifest per image (`records/<image_id>.json`, `schema_version: 1`)
//! plus a raw depth file (`depth/<image_id>.f32`: little-endian `f32`,
//! row-major, no header). Relative depth URIs resolve against the parent of
//! the manifest's directory. Non-finite or non-positive depth means missing.

use std::cmp::Ordering;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::geometry::{CameraModel, Frame3, GeometryError, Vec3};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed manifest: {0}")]
    Parse(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mask runs sum to {actual}, expected {expected}")]
    MaskChecksum { expected: u64, actual: u64 },
    #[error("invalid value: {0}")]
    Invalid(String),
}

impl PerceptionError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

impl From<GeometryError> for PerceptionError {
    fn from(e: GeometryError) -> Self {
        Self::Invalid(e.to_string())
    }
}

/// Uncompressed run-length mask: alternating background/foreground runs over
/// row-major pixels, background first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RleMask {
    width: u32,
    height: u32,
    counts: Vec<u32>,
}

impl RleMask {
    pub fn new(width: u32, height: u32, counts: Vec<u32>) -> Result<Self, PerceptionError> {
        if counts.is_empty() {
            return Err(PerceptionError::Invalid("mask has no runs".into()));
        }
        if let Some(i) = counts.iter().skip(1).position(|&c| c == 0) {
            return Err(PerceptionError::Invalid(format!("zero-length run at index {}", i + 1)));
        }
        let expected = width as u64 * height as u64;
        let actual: u64 = counts.iter().map(|&c| c as u64).sum();
        if actual != expected {
            return Err(PerceptionError::MaskChecksum { expected, actual });
        }
        Ok(Self { width, height, counts })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self::encode(width, height, &vec![false; width as usize * height as usize])
    }

    /// Encodes a row-major bitmap of exactly `width * height` entries.
    pub fn encode(width: u32, height: u32, bitmap: &[bool]) -> Self {
        assert_eq!(bitmap.len(), width as usize * height as usize, "bitmap size");
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for &bit in bitmap {
            if bit != current {
                counts.push(run);
                run = 0;
                current = bit;
            }
            run += 1;
        }
        counts.push(run);
        Self { width, height, counts }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| c as u64).sum()
    }

    /// Row-major indices of foreground pixels, ascending.
    pub fn foreground(&self) -> impl Iterator<Item = u32> + '_ {
        let mut start = 0u32;
        self.counts.iter().enumerate().flat_map(move |(i, &c)| {
            let run = start..start + c;
            start += c;
            run.filter(move |_| i % 2 == 1)
        })
    }

    pub fn decode(&self) -> Vec<u32> {
        self.foreground().collect()
    }

    pub fn to_bitmap(&self) -> Vec<bool> {
        let mut bits = vec![false; self.width as usize * self.height as usize];
        for i in self.foreground() {
            bits[i as usize] = true;
        }
        bits
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub category: String,
    pub confidence: f64,
    pub bbox: BBox,
    pub mask: RleMask,
    pub orientation: Option<Frame3>,
    pub orientation_confidence: Option<f64>,
}

impl Detection {
    fn validate(&self, cam: &CameraModel) -> Result<(), PerceptionError> {
        let inv = |m: String| Err(PerceptionError::Invalid(m));
        if self.category.trim().is_empty() {
            return inv("empty category".into());
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return inv(format!("confidence {} outside [0,1]", self.confidence));
        }
        if let Some(c) = self.orientation_confidence {
            if !(0.0..=1.0).contains(&c) {
                return inv(format!("orientation_confidence {c} outside [0,1]"));
            }
        }
        let b = self.bbox;
        let (w, h) = (cam.width as f64, cam.height as f64);
        if !(b.x0 < b.x1 && b.y0 < b.y1) {
            return inv(format!("degenerate bbox {b:?}"));
        }
        if !(b.x0 >= 0.0 && b.y0 >= 0.0 && b.x1 <= w && b.y1 <= h) {
            return inv(format!("bbox {b:?} outside {w}x{h} image"));
        }
        if self.mask.width != cam.width || self.mask.height != cam.height {
            return Err(PerceptionError::DimensionMismatch(format!(
                "mask {}x{} vs image {}x{}",
                self.mask.width, self.mask.height, cam.width, cam.height
            )));
        }
        Ok(())
    }
}

/// Location and dimensions of a metric depth file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthRef {
    pub uri: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionRecord {
    pub image_id: String,
    pub camera: CameraModel,
    pub depth: DepthRef,
    pub detections: Vec<Detection>,
    pub source_image_id: Option<String>,
    /// Directory relative depth URIs resolve against. Not serialized.
    pub base_dir: Option<PathBuf>,
}

/// Canonical category comparison: trimmed, case-insensitive, no synonyms.
pub fn same_category(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() == b.trim().to_lowercase()
}

/// A detection together with its index in the record.
#[derive(Debug, Clone, Copy)]
pub struct Ranked<'a> {
    pub index: usize,
    pub detection: &'a Detection,
}

impl PerceptionRecord {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        if self.image_id.trim().is_empty() {
            return Err(PerceptionError::Invalid("empty image_id".into()));
        }
        self.camera.validate()?;
        if self.depth.width != self.camera.width || self.depth.height != self.camera.height {
            return Err(PerceptionError::DimensionMismatch(format!(
                "depth {}x{} vs camera {}x{}",
                self.depth.width, self.depth.height, self.camera.width, self.camera.height
            )));
        }
        for (i, d) in self.detections.iter().enumerate() {
            d.validate(&self.camera).map_err(|e| match e {
                PerceptionError::Invalid(m) => PerceptionError::Invalid(format!("detection {i}: {m}")),
                other => other,
            })?;
        }
        Ok(())
    }

    /// Parses and validates a manifest without touching the depth file.
    pub fn from_json(bytes: &[u8]) -> Result<Self, PerceptionError> {
        let value: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| PerceptionError::Parse(e.to_string()))?;
        let wire: wire::Manifest =
            serde_json::from_value(value).map_err(|e| PerceptionError::Schema(e.to_string()))?;
        let rec = wire.into_record()?;
        rec.validate()?;
        Ok(rec)
    }

    /// Canonical serialization: fixed field order, reals at nine significant
    /// digits, two-space indentation, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&wire::Manifest::from_record(self))
            .expect("manifest serialization is infallible");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), PerceptionError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| PerceptionError::io(dir, e))?;
        }
        fs::write(path, self.to_canonical_json()).map_err(|e| PerceptionError::io(path, e))
    }

    pub fn depth_path(&self) -> PathBuf {
        let uri = Path::new(&self.depth.uri);
        if uri.is_absolute() {
            uri.to_path_buf()
        } else {
            self.base_dir.clone().unwrap_or_else(|| PathBuf::from(".")).join(uri)
        }
    }

    pub fn load_depth(&self) -> Result<DepthMap, PerceptionError> {
        DepthMap::load(&self.depth_path(), self.depth.width, self.depth.height)
    }

    /// Up to `k` detections of `category`, best first: higher confidence, then
    /// larger mask area, then smaller `bbox.x0`.
    pub fn best_instances(&self, category: &str, k: usize) -> Vec<Ranked<'_>> {
        let mut found: Vec<Ranked<'_>> = self
            .detections
            .iter()
            .enumerate()
            .filter(|(_, d)| same_category(&d.category, category))
            .map(|(index, detection)| Ranked { index, detection })
            .collect();
        found.sort_by(|a, b| {
            let (a, b) = (a.detection, b.detection);
            b.confidence
                .total_cmp(&a.confidence)
                .then_with(|| b.mask.area().cmp(&a.mask.area()))
                .then_with(|| a.bbox.x0.partial_cmp(&b.bbox.x0).unwrap_or(Ordering::Equal))
        });
        found.truncate(k);
        found
    }
}

/// Reads, parses and validates a manifest, then checks that the depth file
/// exists with the declared size.
pub fn load_record(path: &Path) -> Result<PerceptionRecord, PerceptionError> {
    let bytes = fs::read(path).map_err(|e| PerceptionError::io(path, e))?;
    let mut rec = PerceptionRecord::from_json(&bytes)?;
    rec.base_dir = Some(
        path.parent()
            .and_then(Path::parent)
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    );
    let depth_path = rec.depth_path();
    let meta = fs::metadata(&depth_path).map_err(|e| PerceptionError::io(&depth_path, e))?;
    let expected = rec.depth.width as u64 * rec.depth.height as u64 * 4;
    if meta.len() != expected {
        return Err(PerceptionError::DimensionMismatch(format!(
            "{} holds {} bytes, expected {expected}",
            depth_path.display(),
            meta.len()
        )));
    }
    Ok(rec)
}

/// Metric z-depth in meters, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self, PerceptionError> {
        if values.len() != width as usize * height as usize {
            return Err(PerceptionError::DimensionMismatch(format!(
                "{} depth values for a {width}x{height} image",
                values.len()
            )));
        }
        Ok(Self { width, height, values })
    }

    pub fn from_le_bytes(width: u32, height: u32, bytes: &[u8]) -> Result<Self, PerceptionError> {
        let expected = width as u64 * height as u64 * 4;
        if bytes.len() as u64 != expected {
            return Err(PerceptionError::DimensionMismatch(format!(
                "{} depth bytes, expected {expected}",
                bytes.len()
            )));
        }
        let values = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Ok(Self { width, height, values })
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn load(path: &Path, width: u32, height: u32) -> Result<Self, PerceptionError> {
        let bytes = fs::read(path).map_err(|e| PerceptionError::io(path, e))?;
        Self::from_le_bytes(width, height, &bytes)
    }

    pub fn save(&self, path: &Path) -> Result<(), PerceptionError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| PerceptionError::io(dir, e))?;
        }
        fs::write(path, self.to_le_bytes()).map_err(|e| PerceptionError::io(path, e))
    }

    /// Valid depth at a row-major pixel index, `None` for holes.
    pub fn at(&self, index: u32) -> Option<f64> {
        let d = *self.values.get(index as usize)? as f64;
        (d.is_finite() && d > 0.0).then_some(d)
    }

    pub fn scaled(&self, factor: f32) -> Self {
        Self { values: self.values.iter().map(|v| v * factor).collect(), ..self.clone() }
    }
}

mod wire {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Manifest {
        pub schema_version: u32,
        pub image_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub source_image_id: Option<String>,
        pub camera: Camera,
        pub depth: Depth,
        pub detections: Vec<Det>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Camera {
        #[serde(serialize_with = "canonical::real")]
        pub fx: f64,
        #[serde(serialize_with = "canonical::real")]
        pub fy: f64,
        #[serde(serialize_with = "canonical::real")]
        pub cx: f64,
        #[serde(serialize_with = "canonical::real")]
        pub cy: f64,
        pub width: u32,
        pub height: u32,
        #[serde(serialize_with = "canonical::reals")]
        pub up_hint: [f64; 3],
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Depth {
        pub uri: String,
        pub width: u32,
        pub height: u32,
        pub unit: String,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Mask {
        pub width: u32,
        pub height: u32,
        pub counts: Vec<u32>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Orientation {
        #[serde(serialize_with = "canonical::reals")]
        pub forward: [f64; 3],
        #[serde(serialize_with = "canonical::reals")]
        pub left: [f64; 3],
        #[serde(serialize_with = "canonical::reals")]
        pub up: [f64; 3],
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Det {
        pub category: String,
        #[serde(serialize_with = "canonical::real")]
        pub confidence: f64,
        #[serde(serialize_with = "canonical::reals")]
        pub bbox: [f64; 4],
        pub mask: Mask,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub orientation: Option<Orientation>,
        #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "canonical::opt_real")]
        pub orientation_confidence: Option<f64>,
    }

    fn v3(a: [f64; 3]) -> Vec3 {
        Vec3::new(a[0], a[1], a[2])
    }

    fn a3(v: &Vec3) -> [f64; 3] {
        [v.x, v.y, v.z]
    }

    impl Manifest {
        pub fn into_record(self) -> Result<PerceptionRecord, PerceptionError> {
            if self.schema_version != SCHEMA_VERSION {
                return Err(PerceptionError::Schema(format!(
                    "unsupported schema_version {}",
                    self.schema_version
                )));
            }
            if self.depth.unit != "meters" {
                return Err(PerceptionError::Schema(format!("depth unit must be meters, got {:?}", self.depth.unit)));
            }
            let c = self.camera;
            let camera = CameraModel {
                fx: c.fx,
                fy: c.fy,
                cx: c.cx,
                cy: c.cy,
                width: c.width,
                height: c.height,
                up_hint: v3(c.up_hint),
            };
            let detections = self
                .detections
                .into_iter()
                .map(|d| {
                    let orientation = d
                        .orientation
                        .map(|o| Frame3::try_new(v3(o.forward), v3(o.left), v3(o.up)))
                        .transpose()?;
                    Ok(Detection {
                        category: d.category,
                        confidence: d.confidence,
                        bbox: BBox { x0: d.bbox[0], y0: d.bbox[1], x1: d.bbox[2], y1: d.bbox[3] },
                        mask: RleMask::new(d.mask.width, d.mask.height, d.mask.counts)?,
                        orientation,
                        orientation_confidence: d.orientation_confidence,
                    })
                })
                .collect::<Result<Vec<_>, PerceptionError>>()?;
            Ok(PerceptionRecord {
                image_id: self.image_id,
                camera,
                depth: DepthRef { uri: self.depth.uri, width: self.depth.width, height: self.depth.height },
                detections,
                source_image_id: self.source_image_id,
                base_dir: None,
            })
        }

        pub fn from_record(r: &PerceptionRecord) -> Self {
            let c = &r.camera;
            Self {
                schema_version: SCHEMA_VERSION,
                image_id: r.image_id.clone(),
                source_image_id: r.source_image_id.clone(),
                camera: Camera {
                    fx: c.fx,
                    fy: c.fy,
                    cx: c.cx,
                    cy: c.cy,
                    width: c.width,
                    height: c.height,
                    up_hint: a3(&c.up_hint),
                },
                depth: Depth {
                    uri: r.depth.uri.clone(),
                    width: r.depth.width,
                    height: r.depth.height,
                    unit: "meters".into(),
                },
                detections: r
                    .detections
                    .iter()
                    .map(|d| Det {
                        category: d.category.clone(),
                        confidence: d.confidence,
                        bbox: [d.bbox.x0, d.bbox.y0, d.bbox.x1, d.bbox.y1],
                        mask: Mask { width: d.mask.width, height: d.mask.height, counts: d.mask.counts.clone() },
                        orientation: d.orientation.map(|f| Orientation {
                            forward: a3(&f.forward),
                            left: a3(&f.left),
                            up: a3(&f.up),
                        }),
                        orientation_confidence: d.orientation_confidence,
                    })
                    .collect(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn minimal_json(detections: &str) -> String {
        format!(
            r#"{{"schema_version":1,"image_id":"img","camera":{{"fx":500,"fy":500,"cx":1,"cy":1,"width":3,"height":2,"up_hint":[0,-1,0]}},"depth":{{"uri":"depth/img.f32","width":3,"height":2,"unit":"meters"}},"detections":[{detections}]}}"#
        )
    }

    fn det_json(category: &str, conf: f64, counts: &str) -> String {
        format!(
            r#"{{"category":"{category}","confidence":{conf},"bbox":[0,0,3,2],"mask":{{"width":3,"height":2,"counts":[{counts}]}}}}"#
        )
    }

    #[test]
    fn minimal_manifest_has_no_detections() {
        let rec = PerceptionRecord::from_json(minimal_json("").as_bytes()).unwrap();
        assert!(rec.detections.is_empty());
        assert_eq!(rec.image_id, "img");
    }

    #[test]
    fn mask_checksum_is_enforced() {
        let json = minimal_json(&det_json("fox", 0.9, "1,4"));
        match PerceptionRecord::from_json(json.as_bytes()) {
            Err(PerceptionError::MaskChecksum { expected: 6, actual: 5 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn error_kinds() {
        assert!(matches!(PerceptionRecord::from_json(b"{not json"), Err(PerceptionError::Parse(_))));
        let missing = r#"{"schema_version":1,"image_id":"x"}"#;
        assert!(matches!(PerceptionRecord::from_json(missing.as_bytes()), Err(PerceptionError::Schema(_))));
        let v2 = minimal_json("").replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(matches!(PerceptionRecord::from_json(v2.as_bytes()), Err(PerceptionError::Schema(_))));
        let dims = minimal_json("").replace("\"width\":3,\"height\":2,\"unit\"", "\"width\":4,\"height\":2,\"unit\"");
        assert!(matches!(PerceptionRecord::from_json(dims.as_bytes()), Err(PerceptionError::DimensionMismatch(_))));
        let interior_zero = minimal_json(&det_json("fox", 0.9, "1,0,5"));
        assert!(matches!(PerceptionRecord::from_json(interior_zero.as_bytes()), Err(PerceptionError::Invalid(_))));
        let bad_conf = minimal_json(&det_json("fox", 1.5, "0,6"));
        assert!(matches!(PerceptionRecord::from_json(bad_conf.as_bytes()), Err(PerceptionError::Invalid(_))));
    }

    #[test]
    fn decode_examples() {
        assert!(RleMask::new(3, 2, vec![6]).unwrap().decode().is_empty());
        assert_eq!(RleMask::new(3, 2, vec![0, 6]).unwrap().decode(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(RleMask::new(3, 2, vec![1, 2, 2, 1]).unwrap().decode(), vec![1, 2, 5]);
        assert_eq!(RleMask::new(3, 2, vec![1, 2, 2, 1]).unwrap().area(), 3);
    }

    #[test]
    fn best_instances_ordering() {
        let dets = [det_json("car", 0.4, "0,6"), det_json(" Car ", 0.9, "3,3"), det_json("bus", 0.95, "0,6")].join(",");
        let rec = PerceptionRecord::from_json(minimal_json(&dets).as_bytes()).unwrap();
        let best = rec.best_instances("car", 1);
        assert_eq!(best.len(), 1);
        assert_eq!(best[0].index, 1);
        assert_eq!(rec.best_instances("CAR", 5).len(), 2);
        assert!(rec.best_instances("fox", 3).is_empty());
    }

    #[test]
    fn best_instances_tie_breaks_on_area_then_x0() {
        let mut rec = PerceptionRecord::from_json(minimal_json("").as_bytes()).unwrap();
        let det = |area: usize, x0: f64| {
            let w = 50u32;
            let mut bits = vec![false; 50 * 20];
            bits[..area].iter_mut().for_each(|b| *b = true);
            Detection {
                category: "chair".into(),
                confidence: 0.7,
                bbox: BBox { x0, y0: 0.0, x1: 40.0, y1: 10.0 },
                mask: RleMask::encode(w, 20, &bits),
                orientation: None,
                orientation_confidence: None,
            }
        };
        rec.detections = vec![det(300, 1.0), det(500, 5.0), det(500, 2.0)];
        let best = rec.best_instances("chair", 3);
        assert_eq!(best.iter().map(|r| r.index).collect::<Vec<_>>(), vec![2, 1, 0]);
        assert_eq!(rec.best_instances("chair", 1)[0].detection.mask.area(), 500);
    }

    #[test]
    fn depth_bytes_round_trip() {
        let d = DepthMap::new(2, 1, vec![1.5, f32::NAN]).unwrap();
        let back = DepthMap::from_le_bytes(2, 1, &d.to_le_bytes()).unwrap();
        assert_eq!(back.at(0), Some(1.5));
        assert_eq!(back.at(1), None);
        assert!(DepthMap::from_le_bytes(2, 2, &d.to_le_bytes()).is_err());
    }

    #[test]
    fn canonical_json_is_stable() {
        let json = minimal_json(&det_json("fox", 0.123456789123, "1,2,2,1"));
        let rec = PerceptionRecord::from_json(json.as_bytes()).unwrap();
        let once = rec.to_canonical_json();
        let again = PerceptionRecord::from_json(once.as_bytes()).unwrap().to_canonical_json();
        assert_eq!(once, again);
        assert!(once.contains("0.123456789"));
        assert!(!once.contains("0.1234567891"));
    }

    proptest! {
        #[test]
        fn encode_decode_identity(bits in proptest::collection::vec(any::<bool>(), 1..400), width in 1u32..20) {
            let height = (bits.len() as u32).div_ceil(width);
            let mut bitmap = bits.clone();
            bitmap.resize((width * height) as usize, false);
            let mask = RleMask::encode(width, height, &bitmap);
            let validated = RleMask::new(width, height, mask.counts().to_vec()).unwrap();
            prop_assert_eq!(validated.to_bitmap(), bitmap.clone());
            let naive: Vec<u32> = bitmap.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i as u32).collect();
            prop_assert_eq!(validated.decode(), naive.clone());
            prop_assert_eq!(validated.area() as usize, naive.len());
        }
    }
}
