//! Spatial difference analysis: relation classification in the camera, object
//! and mutual reference systems, metric measurements and edit deltas.
//!
//! Every relation is decided in the horizontal plane with 90° sectors centred
//! on the reference axes. Horizontal displacements shorter than
//! [`DEGENERATE_DISPLACEMENT`] classify as [`RelationLabel::None`].

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{azimuth_diff, azimuth_of, HorizontalBasis, Vec3};
use crate::perception::same_category;
use crate::scene::{ObjectNode, SceneGraph};

/// Meters.
pub const DEGENERATE_DISPLACEMENT: f64 = 0.01;

const COS_45: f64 = FRAC_1_SQRT_2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredicateError {
    #[error("{0} has no orientation")]
    MissingOrientation(String),
    #[error("measurement needs a reference object")]
    MissingReference,
    #[error("{0} not found in both scenes")]
    UnmatchedObject(String),
    #[error("{0:?} is not a single-scene measurement")]
    UnsupportedKind(MeasurementKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationLabel {
    EgoFront,
    EgoBehind,
    EgoLeft,
    EgoRight,
    AlloFront,
    AlloBehind,
    AlloLeft,
    AlloRight,
    SideBySideSame,
    SideBySideOpposite,
    FaceToFace,
    BackToBack,
    SideBySide,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Length,
    Width,
    Height,
    /// Cube root of length × width × height.
    Characteristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveDirection {
    Forward,
    Backward,
    Left,
    Right,
}

impl MoveDirection {
    pub const ALL: [MoveDirection; 4] = [Self::Forward, Self::Backward, Self::Left, Self::Right];

    /// Horizontal camera-frame direction: forward is away from the camera.
    pub fn vector(self, basis: &HorizontalBasis) -> Vec3 {
        match self {
            Self::Forward => basis.ahead,
            Self::Backward => -basis.ahead,
            Self::Left => -basis.right,
            Self::Right => basis.right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    ObjectGap,
    CameraDistance,
    Dim(Dimension),
    DeltaMove(MoveDirection),
    DeltaCameraMove(MoveDirection),
    DeltaDim(Dimension),
}

impl MeasurementKind {
    pub fn is_delta(self) -> bool {
        matches!(self, Self::DeltaMove(_) | Self::DeltaCameraMove(_) | Self::DeltaDim(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub kind: MeasurementKind,
    /// Meters.
    pub value: f64,
    pub signed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sector {
    Front,
    Behind,
    Left,
    Right,
}

/// Which of the four 90° sectors around `front`/`left` contains `d`.
fn sector(d: &Vec3, front: &Vec3, left: &Vec3) -> Sector {
    let f = d.dot(front);
    let l = d.dot(left);
    if f.abs() >= l.abs() {
        if f >= 0.0 {
            Sector::Front
        } else {
            Sector::Behind
        }
    } else if l >= 0.0 {
        Sector::Left
    } else {
        Sector::Right
    }
}

fn basis(up: &Vec3) -> HorizontalBasis {
    HorizontalBasis::from_up(up).expect("scene up must not be degenerate")
}

fn horizontal_offset(from: &ObjectNode, to: &ObjectNode, basis: &HorizontalBasis) -> Option<Vec3> {
    let d = basis.flatten(&(to.centroid - from.centroid));
    (d.norm() >= DEGENERATE_DISPLACEMENT).then_some(d)
}

fn horizontal_forward(node: &ObjectNode, basis: &HorizontalBasis) -> Result<Vec3, PredicateError> {
    let frame = node.frame.ok_or_else(|| PredicateError::MissingOrientation(node.category.clone()))?;
    let f = basis.flatten(&frame.forward);
    let n = f.norm();
    if n < 1e-6 {
        return Err(PredicateError::MissingOrientation(node.category.clone()));
    }
    Ok(f / n)
}

/// Where `a` sits relative to `b` as seen from the camera. Front means closer
/// to the camera.
pub fn egocentric_direction(a: &ObjectNode, b: &ObjectNode, up: &Vec3) -> RelationLabel {
    let basis = basis(up);
    let Some(d) = horizontal_offset(b, a, &basis) else {
        return RelationLabel::None;
    };
    match sector(&d, &-basis.ahead, &-basis.right) {
        Sector::Front => RelationLabel::EgoFront,
        Sector::Behind => RelationLabel::EgoBehind,
        Sector::Left => RelationLabel::EgoLeft,
        Sector::Right => RelationLabel::EgoRight,
    }
}

/// Where `a` sits relative to `reference` in the reference object's own frame.
pub fn allocentric_direction(
    a: &ObjectNode,
    reference: &ObjectNode,
    up: &Vec3,
) -> Result<RelationLabel, PredicateError> {
    let basis = basis(up);
    let front = horizontal_forward(reference, &basis)?;
    let Some(d) = horizontal_offset(reference, a, &basis) else {
        return Ok(RelationLabel::None);
    };
    let left = basis.up.cross(&front);
    Ok(match sector(&d, &front, &left) {
        Sector::Front => RelationLabel::AlloFront,
        Sector::Behind => RelationLabel::AlloBehind,
        Sector::Left => RelationLabel::AlloLeft,
        Sector::Right => RelationLabel::AlloRight,
    })
}

/// Viewpoint-independent arrangement of two oriented objects.
pub fn intrinsic_relation(a: &ObjectNode, b: &ObjectNode, up: &Vec3) -> Result<RelationLabel, PredicateError> {
    let basis = basis(up);
    let fa = horizontal_forward(a, &basis)?;
    let fb = horizontal_forward(b, &basis)?;
    let Some(d) = horizontal_offset(a, b, &basis) else {
        return Ok(RelationLabel::None);
    };
    let d = d.normalize();
    let phi = match (azimuth_of(&fa, up), azimuth_of(&fb, up)) {
        (Ok(x), Ok(y)) => azimuth_diff(x, y),
        _ => return Err(PredicateError::MissingOrientation(a.category.clone())),
    };
    let ca = fa.dot(&d);
    let cb = fb.dot(&-d);
    Ok(if phi <= 45.0 {
        if ca.abs() <= COS_45 {
            RelationLabel::SideBySideSame
        } else {
            RelationLabel::None
        }
    } else if phi >= 135.0 {
        if ca > COS_45 && cb > COS_45 {
            RelationLabel::FaceToFace
        } else if ca < -COS_45 && cb < -COS_45 {
            RelationLabel::BackToBack
        } else if ca.abs() <= COS_45 {
            RelationLabel::SideBySideOpposite
        } else {
            RelationLabel::None
        }
    } else {
        RelationLabel::None
    })
}

/// `b` lies to one side of `a` (within 45° of `a`'s lateral axis). Forward
/// parity is not checked.
pub fn side_by_side(a: &ObjectNode, b: &ObjectNode, up: &Vec3) -> Result<RelationLabel, PredicateError> {
    let basis = basis(up);
    let fa = horizontal_forward(a, &basis)?;
    let Some(d) = horizontal_offset(a, b, &basis) else {
        return Ok(RelationLabel::None);
    };
    Ok(if fa.dot(&d.normalize()).abs() <= COS_45 { RelationLabel::SideBySide } else { RelationLabel::None })
}

fn dimension_of(node: &ObjectNode, dim: Dimension) -> Result<f64, PredicateError> {
    let e = node.extents.ok_or_else(|| PredicateError::MissingOrientation(node.category.clone()))?;
    Ok(match dim {
        Dimension::Length => e.length,
        Dimension::Width => e.width,
        Dimension::Height => e.height,
        Dimension::Characteristic => e.characteristic(),
    })
}

/// Single-scene measurement of `subject`, optionally against `reference`.
pub fn measure(
    _scene: &SceneGraph,
    kind: MeasurementKind,
    subject: &ObjectNode,
    reference: Option<&ObjectNode>,
) -> Result<Measurement, PredicateError> {
    let value = match kind {
        MeasurementKind::ObjectGap => {
            let r = reference.ok_or(PredicateError::MissingReference)?;
            (subject.centroid - r.centroid).norm()
        }
        MeasurementKind::CameraDistance => subject.centroid.coords.norm(),
        MeasurementKind::Dim(d) => dimension_of(subject, d)?,
        other => return Err(PredicateError::UnsupportedKind(other)),
    };
    Ok(Measurement { kind, value, signed: false })
}

/// Pairs nodes of one category across two scenes, closest centroids first.
pub fn match_category<'a>(
    src: &'a SceneGraph,
    dst: &'a SceneGraph,
    category: &str,
) -> Vec<(&'a ObjectNode, &'a ObjectNode)> {
    let a: Vec<&ObjectNode> = src.objects.iter().filter(|n| same_category(&n.category, category)).collect();
    let b: Vec<&ObjectNode> = dst.objects.iter().filter(|n| same_category(&n.category, category)).collect();
    let mut pairs: Vec<(f64, usize, usize)> = a
        .iter()
        .enumerate()
        .flat_map(|(i, x)| b.iter().enumerate().map(move |(j, y)| ((x.centroid - y.centroid).norm(), i, j)))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let (mut used_a, mut used_b) = (vec![false; a.len()], vec![false; b.len()]);
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((a[i], b[j]));
        }
    }
    out
}

fn componentwise_median(vs: &[Vec3]) -> Vec3 {
    let med = |k: usize| {
        let mut c: Vec<f64> = vs.iter().map(|v| v[k]).collect();
        c.sort_by(f64::total_cmp);
        crate::scene::quantile(&c, 0.5)
    };
    Vec3::new(med(0), med(1), med(2))
}

/// Change between a source and an edited scene.
///
/// `category` names the edited object for `DeltaMove`/`DeltaDim`; for
/// `DeltaCameraMove` it must be matched and every category present in both
/// scenes contributes to the median displacement.
pub fn edit_delta(
    src: &SceneGraph,
    dst: &SceneGraph,
    kind: MeasurementKind,
    category: &str,
) -> Result<Measurement, PredicateError> {
    let basis = basis(&dst.up);
    let pairs = match_category(src, dst, category);
    let (s, d) = *pairs.first().ok_or_else(|| PredicateError::UnmatchedObject(category.to_string()))?;
    let value = match kind {
        MeasurementKind::DeltaMove(dir) => (d.centroid - s.centroid).dot(&dir.vector(&basis)),
        MeasurementKind::DeltaCameraMove(dir) => {
            let mut cats: Vec<&str> = Vec::new();
            for n in &src.objects {
                if !cats.iter().any(|c| same_category(c, &n.category)) {
                    cats.push(&n.category);
                }
            }
            let shifts: Vec<Vec3> = cats
                .iter()
                .flat_map(|c| match_category(src, dst, c))
                .map(|(a, b)| b.centroid - a.centroid)
                .collect();
            -componentwise_median(&shifts).dot(&dir.vector(&basis))
        }
        MeasurementKind::DeltaDim(dim) => dimension_of(d, dim)? - dimension_of(s, dim)?,
        other => return Err(PredicateError::UnsupportedKind(other)),
    };
    Ok(Measurement { kind, value, signed: true })
}

/// Right/ahead components of a horizontal displacement.
pub fn planar_components(v: &Vec3, up: &Vec3) -> [f64; 2] {
    let b = basis(up);
    [v.dot(&b.right), v.dot(&b.ahead)]
}
