//! Three-step spatial-faithfulness metric: presence check, spatial
//! difference analysis and piecewise score mapping, with per-sub-domain
//! multiplicative combination.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::geometry::{azimuth_diff, Azimuth};
use crate::perception::{same_category, DepthMap, PerceptionRecord};
use crate::predicates::{
    allocentric_direction, edit_delta, egocentric_direction, intrinsic_relation, measure, planar_components,
    side_by_side, Dimension, MeasurementKind, MoveDirection, PredicateError, RelationLabel,
};
use crate::scene::{reconstruct_with_depth, ObjectNode, SceneConfig, SceneGraph, DEFAULT_MIN_POINTS};

pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.35;

/// Orientation differences up to this many degrees score 100.
pub const ORIENTATION_FULL: f64 = 30.0;
/// Orientation differences from this many degrees on score 0.
pub const ORIENTATION_ZERO: f64 = 45.0;
/// Relative distance errors up to this value score 100.
pub const DISTANCE_FULL: f64 = 0.33;
/// Relative distance errors from this value on score 0.
pub const DISTANCE_ZERO: f64 = 0.44;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("unknown option {option:?} for {sub_domain}")]
    UnknownOption { option: String, sub_domain: SubDomain },
    #[error("invalid target spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubDomain {
    CameraPose,
    ObjectPose,
    ComplexPose,
    Egocentric,
    Allocentric,
    Intrinsic,
    ObjectSize,
    ObjectDistance,
    CameraDistance,
}

impl SubDomain {
    /// Leaderboard column order.
    pub const ALL: [SubDomain; 9] = [
        Self::CameraPose,
        Self::ObjectPose,
        Self::ComplexPose,
        Self::Egocentric,
        Self::Allocentric,
        Self::Intrinsic,
        Self::ObjectSize,
        Self::ObjectDistance,
        Self::CameraDistance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::CameraPose => "camera_pose",
            Self::ObjectPose => "object_pose",
            Self::ComplexPose => "complex_pose",
            Self::Egocentric => "egocentric",
            Self::Allocentric => "allocentric",
            Self::Intrinsic => "intrinsic",
            Self::ObjectSize => "object_size",
            Self::ObjectDistance => "object_distance",
            Self::CameraDistance => "camera_distance",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == s)
    }

    /// Which spatial differences the sub-domain needs.
    pub fn applicability(self) -> Applicability {
        DIFFERENCES_REQUIRED.iter().find(|(d, _)| *d == self).map(|(_, a)| *a).expect("all sub-domains listed")
    }
}

impl fmt::Display for SubDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Generation,
    Editing,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Self::Generation => "generation",
            Self::Editing => "editing",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "generation" => Some(Self::Generation),
            "editing" => Some(Self::Editing),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Applicability {
    pub orientation: bool,
    pub relation: bool,
    pub distance: bool,
}

const fn row(orientation: bool, relation: bool, distance: bool) -> Applicability {
    Applicability { orientation, relation, distance }
}

/// Differences required for each sub-domain (orientation, relation, distance).
pub const DIFFERENCES_REQUIRED: [(SubDomain, Applicability); 9] = [
    (SubDomain::CameraPose, row(true, false, false)),
    (SubDomain::ObjectPose, row(true, false, false)),
    (SubDomain::ComplexPose, row(true, true, false)),
    (SubDomain::Egocentric, row(true, true, false)),
    (SubDomain::Allocentric, row(true, true, false)),
    (SubDomain::Intrinsic, row(true, true, false)),
    (SubDomain::ObjectSize, row(true, false, true)),
    (SubDomain::ObjectDistance, row(false, false, true)),
    (SubDomain::CameraDistance, row(false, false, true)),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub name: String,
    pub count: usize,
}

impl CategoryCount {
    pub fn new(name: &str, count: usize) -> Self {
        Self { name: name.to_string(), count }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTarget {
    pub kind: MeasurementKind,
    #[serde(serialize_with = "canonical::real")]
    pub value: f64,
}

/// Machine-readable spatial condition a sample must satisfy.
///
/// Category order assigns roles: the first entry is the subject (`obj1`,
/// `obj_new` or the only object), the second the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub sub_domain: SubDomain,
    pub task: Task,
    pub categories: Vec<CategoryCount>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub azimuth_target: Option<Azimuth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation_target: Option<RelationLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_target: Option<MetricTarget>,
    pub applicability: Applicability,
}

impl TargetSpec {
    pub fn validate(&self) -> Result<(), ScoringError> {
        let bad = |m: String| Err(ScoringError::InvalidSpec(m));
        if self.applicability != self.sub_domain.applicability() {
            return bad(format!("applicability {:?} does not match {}", self.applicability, self.sub_domain));
        }
        if self.azimuth_target.is_none() && self.relation_target.is_none() && self.metric_target.is_none() {
            return bad("no condition present".into());
        }
        if let Some(m) = self.metric_target {
            if !(m.value > 0.0 && m.value.is_finite()) {
                return bad(format!("metric target {} must be positive", m.value));
            }
        }
        if self.categories.is_empty() || self.categories.iter().any(|c| c.count == 0 || c.name.trim().is_empty()) {
            return bad("categories must be non-empty with positive counts".into());
        }
        let needed = match (self.sub_domain, self.task) {
            (SubDomain::CameraPose | SubDomain::ObjectPose | SubDomain::CameraDistance, _) => 1,
            (SubDomain::ObjectSize, Task::Generation) => 2,
            (SubDomain::ObjectSize | SubDomain::ObjectDistance, Task::Editing) => 1,
            _ => 2,
        };
        let total: usize = self.categories.iter().map(|c| c.count).sum();
        if total < needed {
            return bad(format!("{} needs {needed} objects, spec names {total}", self.sub_domain));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub confidence_threshold: f64,
    pub min_points: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD, min_points: DEFAULT_MIN_POINTS }
    }
}

/// Measured state behind a score.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Azimuth per reconstructed object, in role order.
    #[serde(default, serialize_with = "canonical::opt_real_vec")]
    pub azimuths: Vec<Option<f64>>,
    /// Pitch of each object's forward axis; recorded, never scored.
    #[serde(default, serialize_with = "canonical::opt_real_vec")]
    pub pitches: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<RelationLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_relation: Option<RelationLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "canonical::opt_real")]
    pub measured_value: Option<f64>,
    /// `None` together with a `wrong-direction` flag means infinite error.
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "canonical::opt_real")]
    pub relative_error: Option<f64>,
    /// Right/ahead components of the measured horizontal displacement.
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "canonical::opt_reals")]
    pub displacement: Option<[f64; 2]>,
    /// Length, width, height and characteristic differences.
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "canonical::opt_reals")]
    pub dimension_deltas: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub present: bool,
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "canonical::opt_real")]
    pub orientation_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "canonical::opt_real")]
    pub relation_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "canonical::opt_real")]
    pub distance_score: Option<f64>,
    #[serde(rename = "final", serialize_with = "canonical::real")]
    pub final_score: f64,
    pub diagnostics: Diagnostics,
}

impl SampleScore {
    pub fn failure(reason: impl Into<String>) -> Self {
        Self {
            present: false,
            orientation_score: None,
            relation_score: None,
            distance_score: None,
            final_score: 0.0,
            diagnostics: Diagnostics { failure: Some(reason.into()), ..Default::default() },
        }
    }

    fn combine(mut self) -> Self {
        let components: Vec<f64> =
            [self.orientation_score, self.relation_score, self.distance_score].into_iter().flatten().collect();
        self.final_score = match components.split_first() {
            Some((first, rest)) => rest.iter().fold(*first, |acc, c| acc * c / 100.0),
            None => 0.0,
        };
        self
    }
}

/// One line of an evaluation results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub sample_id: String,
    pub sub_domain: SubDomain,
    pub task: Task,
    pub template_index: usize,
    /// Metric target of the spec, kept for condition-state analysis.
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "canonical::opt_real")]
    pub target_value: Option<f64>,
    #[serde(flatten)]
    pub score: SampleScore,
}

impl SampleResult {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("result serialization is infallible")
    }

    pub fn from_json_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

pub fn orientation_score(delta_degrees: f64) -> f64 {
    if delta_degrees <= ORIENTATION_FULL {
        100.0
    } else if delta_degrees < ORIENTATION_ZERO {
        100.0 * (ORIENTATION_ZERO - delta_degrees) / (ORIENTATION_ZERO - ORIENTATION_FULL)
    } else {
        0.0
    }
}

pub fn distance_score(relative_error: f64) -> f64 {
    if relative_error <= DISTANCE_FULL {
        100.0
    } else if relative_error < DISTANCE_ZERO {
        100.0 * (DISTANCE_ZERO - relative_error) / (DISTANCE_ZERO - DISTANCE_FULL)
    } else {
        0.0
    }
}

pub fn relation_score(measured: RelationLabel, target: RelationLabel) -> f64 {
    if measured != RelationLabel::None && measured == target {
        100.0
    } else {
        0.0
    }
}

/// First category lacking enough detections at or above `threshold`.
pub fn missing_category(rec: &PerceptionRecord, spec: &TargetSpec, threshold: f64) -> Option<String> {
    spec.categories.iter().find_map(|c| {
        let n = rec
            .detections
            .iter()
            .filter(|d| d.confidence >= threshold && same_category(&d.category, &c.name))
            .count();
        (n < c.count).then(|| c.name.clone())
    })
}

pub fn presence_check(rec: &PerceptionRecord, spec: &TargetSpec, threshold: f64) -> bool {
    missing_category(rec, spec, threshold).is_none()
}

fn normalize_option(option: &str) -> String {
    let o = option.trim().to_lowercase();
    o.strip_suffix(" view").unwrap_or(&o).trim().to_string()
}

/// Target azimuth for a pose option. "X view", "shot from X" and "facing X"
/// describe the same state and share a target.
pub fn azimuth_target_of(option: &str, sub_domain: SubDomain) -> Result<Azimuth, ScoringError> {
    let o = normalize_option(option);
    let deg = match (sub_domain, o.as_str()) {
        (SubDomain::ObjectPose, "forward") => Some(180.0),
        (SubDomain::ObjectPose, "backward") => Some(0.0),
        (SubDomain::CameraPose | SubDomain::ComplexPose, "front") => Some(180.0),
        (SubDomain::CameraPose | SubDomain::ComplexPose, "back") => Some(0.0),
        (SubDomain::ObjectPose | SubDomain::CameraPose | SubDomain::ComplexPose, "right") => Some(90.0),
        (SubDomain::ObjectPose | SubDomain::CameraPose | SubDomain::ComplexPose, "left") => Some(270.0),
        _ => None,
    };
    deg.map(Azimuth::new).ok_or_else(|| ScoringError::UnknownOption { option: option.to_string(), sub_domain })
}

/// Relation label named by a relation option.
pub fn relation_target_of(option: &str, sub_domain: SubDomain) -> Result<RelationLabel, ScoringError> {
    use RelationLabel as R;
    let o = normalize_option(option);
    let label = match (sub_domain, o.as_str()) {
        (SubDomain::Egocentric, "in front of") => Some(R::EgoFront),
        (SubDomain::Egocentric, "behind") => Some(R::EgoBehind),
        (SubDomain::Egocentric, "to the left of") => Some(R::EgoLeft),
        (SubDomain::Egocentric, "to the right of") => Some(R::EgoRight),
        (SubDomain::Allocentric, "in front of") => Some(R::AlloFront),
        (SubDomain::Allocentric, "behind") => Some(R::AlloBehind),
        (SubDomain::Allocentric, "to the left of") => Some(R::AlloLeft),
        (SubDomain::Allocentric, "to the right of") => Some(R::AlloRight),
        (SubDomain::Intrinsic, "side-by-side, same direction") => Some(R::SideBySideSame),
        (SubDomain::Intrinsic, "side-by-side, opposite") => Some(R::SideBySideOpposite),
        (SubDomain::Intrinsic, "face-to-face") => Some(R::FaceToFace),
        (SubDomain::Intrinsic, "back-to-back") => Some(R::BackToBack),
        _ => None,
    };
    label.ok_or_else(|| ScoringError::UnknownOption { option: option.to_string(), sub_domain })
}

/// Dimension named by an object-size option.
pub fn dimension_of_option(option: &str) -> Option<Dimension> {
    match normalize_option(option).as_str() {
        "bigger" => Some(Dimension::Characteristic),
        "taller" => Some(Dimension::Height),
        "longer" => Some(Dimension::Length),
        "wider" => Some(Dimension::Width),
        _ => None,
    }
}

pub fn direction_of_option(option: &str) -> Option<MoveDirection> {
    match normalize_option(option).as_str() {
        "forward" => Some(MoveDirection::Forward),
        "backward" => Some(MoveDirection::Backward),
        "left" => Some(MoveDirection::Left),
        "right" => Some(MoveDirection::Right),
        _ => None,
    }
}

/// One perception record with its depth map, if already in memory.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub record: &'a PerceptionRecord,
    pub depth: Option<&'a DepthMap>,
}

impl<'a> Observation<'a> {
    pub fn new(record: &'a PerceptionRecord, depth: &'a DepthMap) -> Self {
        Self { record, depth: Some(depth) }
    }

    pub fn on_disk(record: &'a PerceptionRecord) -> Self {
        Self { record, depth: None }
    }

    fn scene(&self, spec: &TargetSpec, cfg: &EvalConfig) -> Result<SceneGraph, String> {
        let loaded;
        let depth = match self.depth {
            Some(d) => d,
            None => {
                loaded = self.record.load_depth().map_err(|e| format!("depth-load: {e}"))?;
                &loaded
            }
        };
        let cats: Vec<(String, usize)> = spec.categories.iter().map(|c| (c.name.clone(), c.count)).collect();
        let scene = reconstruct_with_depth(self.record, depth, &cats, &SceneConfig { min_points: cfg.min_points })
            .map_err(|e| format!("depth-load: {e}"))?;
        if let Some(d) = scene.dropped.first() {
            return Err(format!("insufficient-depth:{}", d.category));
        }
        Ok(scene)
    }
}

/// Scores one sample. Never fails: record and scene problems become a zero
/// score with the reason in `diagnostics.failure`.
pub fn evaluate_sample(
    spec: &TargetSpec,
    edited: Observation<'_>,
    source: Option<Observation<'_>>,
    cfg: &EvalConfig,
) -> SampleScore {
    if let Err(e) = spec.validate() {
        return SampleScore::failure(format!("invalid-spec: {e}"));
    }
    if let Some(cat) = missing_category(edited.record, spec, cfg.confidence_threshold) {
        return SampleScore::failure(format!("absent:{cat}"));
    }
    let uses_source = spec.task == Task::Editing
        && matches!(
            spec.sub_domain,
            SubDomain::ComplexPose | SubDomain::ObjectSize | SubDomain::ObjectDistance | SubDomain::CameraDistance
        );
    if spec.task == Task::Editing && source.is_none() {
        return SampleScore::failure("missing-source-record");
    }
    let dst = match edited.scene(spec, cfg) {
        Ok(s) => s,
        Err(reason) => return SampleScore::failure(reason),
    };
    let src = if uses_source {
        let obs = source.expect("checked above");
        if let Some(cat) = missing_category(obs.record, spec, cfg.confidence_threshold) {
            return SampleScore::failure(format!("source-absent:{cat}"));
        }
        match obs.scene(spec, cfg) {
            Ok(s) => Some(s),
            Err(reason) => return SampleScore::failure(format!("source-{reason}")),
        }
    } else {
        None
    };
    Evaluator { spec, dst: &dst, src: src.as_ref(), score: SampleScore::failure("") }.run()
}

struct Evaluator<'a> {
    spec: &'a TargetSpec,
    dst: &'a SceneGraph,
    src: Option<&'a SceneGraph>,
    score: SampleScore,
}

impl Evaluator<'_> {
    fn run(mut self) -> SampleScore {
        self.score.present = true;
        self.score.diagnostics.failure = None;
        let up = self.dst.up;
        self.score.diagnostics.azimuths =
            self.dst.objects.iter().map(|n| n.azimuth(&up).map(|a| a.degrees())).collect();
        self.score.diagnostics.pitches = self.dst.objects.iter().map(|n| n.pitch(&up)).collect();

        let nodes = &self.dst.objects;
        let (subject, reference) = (&nodes[0], nodes.get(1));
        match (self.spec.sub_domain, self.spec.task) {
            (SubDomain::CameraPose | SubDomain::ObjectPose, _) => self.orientation(subject),
            (SubDomain::ComplexPose, Task::Generation) => {
                self.orientation(subject);
                let r = side_by_side(subject, self.second(reference), &up);
                self.relation(r);
            }
            (SubDomain::ComplexPose, Task::Editing) => {
                self.orientation(subject);
                self.preserved_allocentric();
            }
            (SubDomain::Egocentric, _) => {
                let r = Ok(egocentric_direction(subject, self.second(reference), &up));
                self.relation(r);
            }
            (SubDomain::Allocentric, _) => {
                let r = allocentric_direction(subject, self.second(reference), &up);
                self.relation(r);
            }
            (SubDomain::Intrinsic, _) => {
                let r = intrinsic_relation(subject, self.second(reference), &up);
                self.relation(r);
            }
            (SubDomain::ObjectSize, Task::Generation) => self.size_difference(subject, self.second(reference)),
            (SubDomain::ObjectDistance | SubDomain::CameraDistance, Task::Generation) => {
                let m = measure(self.dst, self.metric().kind, subject, reference);
                if let (Ok(_), Some(r)) = (&m, reference) {
                    self.score.diagnostics.displacement = Some(planar_components(&(subject.centroid - r.centroid), &up));
                }
                self.distance(m.map(|m| m.value), false);
            }
            (SubDomain::ObjectSize | SubDomain::ObjectDistance | SubDomain::CameraDistance, Task::Editing) => {
                self.delta(subject)
            }
        }
        self.score.combine()
    }

    fn second<'n>(&self, reference: Option<&'n ObjectNode>) -> &'n ObjectNode {
        reference.expect("validated specs name two objects and presence was checked")
    }

    fn metric(&self) -> MetricTarget {
        self.spec.metric_target.expect("measurement sub-domains carry a metric target")
    }

    fn flag(&mut self, e: &PredicateError) {
        let flag = match e {
            PredicateError::MissingOrientation(c) => format!("missing-orientation:{c}"),
            PredicateError::UnmatchedObject(c) => format!("unmatched:{c}"),
            other => other.to_string(),
        };
        self.score.diagnostics.flags.push(flag);
    }

    fn orientation(&mut self, node: &ObjectNode) {
        let Some(target) = self.spec.azimuth_target else {
            return;
        };
        self.score.orientation_score = Some(match node.azimuth(&self.dst.up) {
            Some(az) => orientation_score(azimuth_diff(az, target)),
            None => {
                self.flag(&PredicateError::MissingOrientation(node.category.clone()));
                0.0
            }
        });
    }

    fn relation(&mut self, measured: Result<RelationLabel, PredicateError>) {
        let target = self.spec.relation_target.unwrap_or(RelationLabel::None);
        self.score.relation_score = Some(match measured {
            Ok(label) => {
                self.score.diagnostics.relation = Some(label);
                relation_score(label, target)
            }
            Err(e) => {
                self.flag(&e);
                0.0
            }
        });
    }

    fn preserved_allocentric(&mut self) {
        let src = self.src.expect("editing complex pose uses the source scene");
        let label = |scene: &SceneGraph| -> Result<RelationLabel, PredicateError> {
            let (Some(a), Some(b)) = (scene.objects.first(), scene.objects.get(1)) else {
                return Err(PredicateError::UnmatchedObject("reference".into()));
            };
            allocentric_direction(b, a, &scene.up)
        };
        let before = label(src);
        let after = label(self.dst);
        self.score.relation_score = Some(match (before, after) {
            (Ok(b), Ok(a)) => {
                self.score.diagnostics.source_relation = Some(b);
                self.score.diagnostics.relation = Some(a);
                relation_score(a, b)
            }
            (Err(e), _) | (_, Err(e)) => {
                self.flag(&e);
                0.0
            }
        });
    }

    fn size_difference(&mut self, a: &ObjectNode, b: &ObjectNode) {
        let (Some(ea), Some(eb)) = (a.extents, b.extents) else {
            let missing = if a.extents.is_none() { a } else { b };
            self.flag(&PredicateError::MissingOrientation(missing.category.clone()));
            self.score.distance_score = Some(0.0);
            return;
        };
        let deltas = [
            (ea.length - eb.length).abs(),
            (ea.width - eb.width).abs(),
            (ea.height - eb.height).abs(),
            (ea.characteristic() - eb.characteristic()).abs(),
        ];
        self.score.diagnostics.dimension_deltas = Some(deltas);
        let measured = match self.metric().kind {
            MeasurementKind::Dim(Dimension::Length) => deltas[0],
            MeasurementKind::Dim(Dimension::Width) => deltas[1],
            MeasurementKind::Dim(Dimension::Height) => deltas[2],
            MeasurementKind::Dim(Dimension::Characteristic) => deltas[3],
            other => {
                self.score.diagnostics.flags.push(format!("unsupported-metric:{other:?}"));
                self.score.distance_score = Some(0.0);
                return;
            }
        };
        self.distance(Ok(measured), false);
    }

    fn delta(&mut self, subject: &ObjectNode) {
        let src = self.src.expect("editing measurements use the source scene");
        let kind = self.metric().kind;
        if let Some((s, d)) = crate::predicates::match_category(src, self.dst, &subject.category).first() {
            self.score.diagnostics.displacement = Some(planar_components(&(d.centroid - s.centroid), &self.dst.up));
            if let (Some(es), Some(ed)) = (s.extents, d.extents) {
                self.score.diagnostics.dimension_deltas = Some([
                    ed.length - es.length,
                    ed.width - es.width,
                    ed.height - es.height,
                    ed.characteristic() - es.characteristic(),
                ]);
            }
        }
        let m = edit_delta(src, self.dst, kind, &subject.category);
        self.distance(m.map(|m| m.value), true);
    }

    fn distance(&mut self, measured: Result<f64, PredicateError>, signed: bool) {
        let target = self.metric().value;
        let value = match measured {
            Ok(v) => v,
            Err(e) => {
                self.flag(&e);
                self.score.distance_score = Some(0.0);
                return;
            }
        };
        self.score.diagnostics.measured_value = Some(value);
        let error = if signed && value <= 0.0 {
            self.score.diagnostics.flags.push("wrong-direction".into());
            f64::INFINITY
        } else {
            (value - target).abs() / target
        };
        self.score.diagnostics.relative_error = error.is_finite().then_some(error);
        self.score.distance_score = Some(distance_score(error));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_knees() {
        assert_eq!(orientation_score(0.0), 100.0);
        assert_eq!(orientation_score(30.0), 100.0);
        assert!((orientation_score(37.5) - 50.0).abs() < 1e-9);
        assert_eq!(orientation_score(45.0), 0.0);
        assert_eq!(orientation_score(180.0), 0.0);
    }

    #[test]
    fn distance_knees() {
        assert_eq!(distance_score(0.33), 100.0);
        assert!((distance_score(0.385) - 50.0).abs() < 1e-9);
        assert_eq!(distance_score(0.44), 0.0);
        assert_eq!(distance_score(f64::INFINITY), 0.0);
        // 100 * (0.44 - 0.35) / 0.11
        assert!((distance_score(0.35) - 81.818_181_818_181_82).abs() < 1e-9);
    }

    #[test]
    fn relation_examples() {
        use RelationLabel::*;
        assert_eq!(relation_score(EgoLeft, EgoLeft), 100.0);
        assert_eq!(relation_score(FaceToFace, BackToBack), 0.0);
        assert_eq!(relation_score(SideBySideSame, SideBySideOpposite), 0.0);
        assert_eq!(relation_score(None, None), 0.0);
        assert_eq!(relation_score(None, EgoLeft), 0.0);
    }

    #[test]
    fn target_azimuths() {
        let t = |o: &str, d| azimuth_target_of(o, d).unwrap().degrees();
        assert_eq!(t("Front view", SubDomain::CameraPose), 180.0);
        assert_eq!(t("Backward", SubDomain::ObjectPose), 0.0);
        assert_eq!(t("Left", SubDomain::ObjectPose), 270.0);
        assert_eq!(t("Left view", SubDomain::CameraPose), 270.0);
        assert_eq!(t("Right", SubDomain::ComplexPose), 90.0);
        assert!(matches!(azimuth_target_of("Upside", SubDomain::ObjectPose), Err(ScoringError::UnknownOption { .. })));
        assert!(azimuth_target_of("Forward", SubDomain::CameraPose).is_err());
    }

    #[test]
    fn table_rows_match_applicability() {
        for (d, a) in DIFFERENCES_REQUIRED {
            assert_eq!(d.applicability(), a);
        }
        assert_eq!(SubDomain::ALL.len(), DIFFERENCES_REQUIRED.len());
    }

    #[test]
    fn combine_multiplies() {
        let mut s = SampleScore::failure("");
        s.orientation_score = Some(50.0);
        s.relation_score = Some(100.0);
        assert_eq!(s.clone().combine().final_score, 50.0);
        s.relation_score = Some(0.0);
        assert_eq!(s.clone().combine().final_score, 0.0);
        s.distance_score = Some(80.0);
        s.relation_score = Some(50.0);
        assert!((s.combine().final_score - 20.0).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        let mut spec = TargetSpec {
            sub_domain: SubDomain::ObjectPose,
            task: Task::Generation,
            categories: vec![CategoryCount::new("fox", 1)],
            azimuth_target: Some(Azimuth::new(180.0)),
            relation_target: None,
            metric_target: None,
            applicability: SubDomain::ObjectPose.applicability(),
        };
        assert!(spec.validate().is_ok());
        spec.applicability.relation = true;
        assert!(spec.validate().is_err());
        spec.applicability.relation = false;
        spec.azimuth_target = None;
        assert!(spec.validate().is_err());
        spec.metric_target = Some(MetricTarget { kind: MeasurementKind::CameraDistance, value: 0.0 });
        assert!(spec.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn score_maps_are_monotone(a in 0.0f64..180.0, b in 0.0f64..180.0, e in 0.0f64..2.0, f in 0.0f64..2.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(orientation_score(lo) >= orientation_score(hi));
            let (lo, hi) = if e <= f { (e, f) } else { (f, e) };
            proptest::prop_assert!(distance_score(lo) >= distance_score(hi));
            proptest::prop_assert!((0.0..=100.0).contains(&orientation_score(a)));
            proptest::prop_assert!((0.0..=100.0).contains(&distance_score(e)));
        }
    }
}
