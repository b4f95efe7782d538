//! Benchmark manifests: templated prompts and instructions with their
//! machine-readable target specs.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predicates::{MeasurementKind, RelationLabel};
use crate::scoring::{
    azimuth_target_of, dimension_of_option, direction_of_option, relation_target_of, CategoryCount, MetricTarget,
    ScoringError, SubDomain, TargetSpec, Task,
};

pub const TEMPLATES_PER_SUB_DOMAIN: usize = 4;
pub const SAMPLES_PER_TEMPLATE: usize = 50;
pub const CATEGORY_COUNT: usize = 50;

const DEFAULT_CATEGORIES: &str = include_str!("../data/categories.csv");

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid category list: {0}")]
    InvalidCategoryList(String),
    #[error("template needs a binding for {0}")]
    MissingBinding(String),
    #[error("template index {0} out of range")]
    TemplateIndex(usize),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {line}: {message}")]
    Manifest { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryList {
    pub categories: Vec<Category>,
}

impl CategoryList {
    /// The bundled list of 50 orientable everyday categories.
    pub fn builtin() -> Self {
        Self::from_csv(DEFAULT_CATEGORIES.as_bytes()).expect("bundled category list is valid")
    }

    /// Reads `name,length,width,height` rows.
    pub fn from_csv<R: io::Read>(reader: R) -> Result<Self, BenchError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let categories = rdr
            .deserialize()
            .collect::<Result<Vec<Category>, _>>()
            .map_err(|e| BenchError::InvalidCategoryList(e.to_string()))?;
        let list = Self { categories };
        list.validate()?;
        Ok(list)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidCategoryList(m));
        if self.categories.len() != CATEGORY_COUNT {
            return bad(format!("expected {CATEGORY_COUNT} categories, found {}", self.categories.len()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.categories {
            let key = c.name.trim().to_lowercase();
            if key.is_empty() || !seen.insert(key) {
                return bad(format!("empty or duplicate name {:?}", c.name));
            }
            if ![c.length, c.width, c.height].iter().all(|d| d.is_finite() && *d > 0.0) {
                return bad(format!("{} has non-positive dimensions", c.name));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Category> {
        self.categories.iter().find(|c| crate::perception::same_category(&c.name, name))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSample {
    pub id: String,
    pub task: Task,
    pub sub_domain: SubDomain,
    pub template_index: usize,
    pub prompt_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rephrased_text: Option<String>,
    pub categories: Vec<String>,
    pub spec: TargetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_image_id: Option<String>,
}

impl BenchmarkSample {
    pub fn from_json_line(line: &str) -> Result<Self, BenchError> {
        let s: Self = serde_json::from_str(line).map_err(|e| BenchError::Manifest { line: 0, message: e.to_string() })?;
        s.spec.validate()?;
        if s.task == Task::Editing && s.source_image_id.is_none() {
            return Err(BenchError::Manifest { line: 0, message: format!("{} lacks a source image id", s.id) });
        }
        Ok(s)
    }
}

const DIRECTIONS: [&str; 4] = ["Forward", "Backward", "Left", "Right"];
const VIEWS: [&str; 4] = ["Front", "Back", "Left", "Right"];
const PLACES: [&str; 4] = ["in Front of", "Behind", "to the Left of", "to the Right of"];
const ARRANGEMENTS: [&str; 4] =
    ["Side-by-Side, Same direction", "Side-by-Side, Opposite", "Face-to-Face", "Back-to-Back"];
const SIZES: [&str; 4] = ["Bigger", "Taller", "Longer", "Wider"];
const GAPS: [&str; 4] = ["0.5", "1.0", "1.5", "2.0"];
const RANGES: [&str; 4] = ["1.0", "2.0", "3.0", "4.0"];

/// The four option texts of a sub-domain, in template order.
pub fn options(task: Task, sub_domain: SubDomain) -> [&'static str; 4] {
    use SubDomain::*;
    match (task, sub_domain) {
        (_, ObjectPose) => DIRECTIONS,
        (_, CameraPose | ComplexPose) => VIEWS,
        (_, Egocentric | Allocentric) => PLACES,
        (_, Intrinsic) => ARRANGEMENTS,
        (_, ObjectSize) => SIZES,
        (Task::Generation, ObjectDistance) => GAPS,
        (Task::Generation, CameraDistance) => RANGES,
        (Task::Editing, ObjectDistance | CameraDistance) => DIRECTIONS,
    }
}

/// Template text with `{option}`, `{N}` and `<role>` placeholders.
pub fn template(task: Task, sub_domain: SubDomain) -> &'static str {
    use SubDomain::*;
    match (task, sub_domain) {
        (Task::Generation, ObjectPose) => "<obj> is facing {option} to the viewer.",
        (Task::Generation, CameraPose) => "{option} view of <obj>",
        (Task::Generation, ComplexPose) => "<obj1> and <obj2>, side-by-side, shot from <obj1>'s {option}",
        (Task::Generation, Egocentric) => "From the camera's perspective, <obj1> is {option} <obj2>",
        (Task::Generation, Allocentric) => "From the <obj2>'s perspective, <obj1> is {option} <obj2>",
        (Task::Generation, Intrinsic) => "<obj1> and <obj2>, {option}",
        (Task::Generation, ObjectSize) => "Two <obj>, one is {option} than another with {N} m.",
        (Task::Generation, ObjectDistance) => "<obj1> separated from <obj2> by {option} m",
        (Task::Generation, CameraDistance) => "<obj>, captured from {option} m",
        (Task::Editing, ObjectPose) => "Rotate the <obj> to face {option} relative to the viewer",
        (Task::Editing, CameraPose) => "Show the {option} view of <obj>",
        (Task::Editing, ComplexPose) => "Move the camera to the {option} of <obj1>",
        (Task::Editing, Egocentric) => "Add <obj_new> {option} <obj>, from the camera's perspective",
        (Task::Editing, Allocentric) => "Add <obj_new> {option} <obj>, from the <obj>'s perspective",
        (Task::Editing, Intrinsic) => "Add <obj_new> near <obj>, {option}",
        (Task::Editing, ObjectSize) => "Change the size of <obj>, make it {option} by {N} m",
        (Task::Editing, ObjectDistance) => "Move <obj> 1m {option}",
        (Task::Editing, CameraDistance) => "Change camera distance: move 1m {option}",
    }
}

/// Placeholder names in role order: subject first, reference second.
pub fn roles(task: Task, sub_domain: SubDomain) -> &'static [&'static str] {
    use SubDomain::*;
    match (task, sub_domain) {
        (_, ObjectPose | CameraPose | ObjectSize | CameraDistance) => &["obj"],
        (Task::Editing, ObjectDistance) => &["obj"],
        (Task::Editing, Egocentric | Allocentric | Intrinsic) => &["obj_new", "obj"],
        _ => &["obj1", "obj2"],
    }
}

pub type Bindings = BTreeMap<String, String>;

/// Substitutes the option of `template_index` and every placeholder.
pub fn render_prompt(
    task: Task,
    sub_domain: SubDomain,
    template_index: usize,
    bindings: &Bindings,
) -> Result<String, BenchError> {
    let opts = options(task, sub_domain);
    let option = opts.get(template_index).ok_or(BenchError::TemplateIndex(template_index))?;
    let mut text = template(task, sub_domain).replace("{option}", option);
    if text.contains("{N}") {
        let n = bindings.get("N").ok_or_else(|| BenchError::MissingBinding("N".into()))?;
        text = text.replace("{N}", n);
    }
    // longest names first so <obj> does not eat <obj1>
    for role in ["obj_new", "obj1", "obj2", "obj"] {
        let tag = format!("<{role}>");
        if text.contains(&tag) {
            let value = bindings.get(role).ok_or_else(|| BenchError::MissingBinding(role.into()))?;
            text = text.replace(&tag, value);
        }
    }
    Ok(text)
}

/// Target spec for a sub-domain option. `value` is the `{N}` of size
/// templates and is ignored elsewhere.
pub fn spec_of(
    task: Task,
    sub_domain: SubDomain,
    option: &str,
    categories: &[String],
    value: Option<f64>,
) -> Result<TargetSpec, BenchError> {
    use SubDomain::*;
    let unknown = || ScoringError::UnknownOption { option: option.to_string(), sub_domain };
    let mut spec = TargetSpec {
        sub_domain,
        task,
        categories: categories.iter().map(|c| CategoryCount::new(c, 1)).collect(),
        azimuth_target: None,
        relation_target: None,
        metric_target: None,
        applicability: sub_domain.applicability(),
    };
    let metric = |kind, value| Some(MetricTarget { kind, value });
    match (task, sub_domain) {
        (_, ObjectPose | CameraPose) => spec.azimuth_target = Some(azimuth_target_of(option, sub_domain)?),
        (_, ComplexPose) => {
            spec.azimuth_target = Some(azimuth_target_of(option, sub_domain)?);
            if task == Task::Generation {
                spec.relation_target = Some(RelationLabel::SideBySide);
            }
        }
        (_, Egocentric | Allocentric | Intrinsic) => {
            spec.relation_target = Some(relation_target_of(option, sub_domain)?)
        }
        (_, ObjectSize) => {
            let dim = dimension_of_option(option).ok_or_else(unknown)?;
            let n = value.ok_or_else(|| BenchError::MissingBinding("N".into()))?;
            spec.metric_target = match task {
                Task::Generation => {
                    spec.categories = categories.iter().take(1).map(|c| CategoryCount::new(c, 2)).collect();
                    metric(MeasurementKind::Dim(dim), n)
                }
                Task::Editing => metric(MeasurementKind::DeltaDim(dim), n),
            };
        }
        (Task::Generation, ObjectDistance | CameraDistance) => {
            let v: f64 = option.trim().parse().map_err(|_| unknown())?;
            let kind =
                if sub_domain == ObjectDistance { MeasurementKind::ObjectGap } else { MeasurementKind::CameraDistance };
            spec.metric_target = metric(kind, v);
        }
        (Task::Editing, ObjectDistance | CameraDistance) => {
            let dir = direction_of_option(option).ok_or_else(unknown)?;
            let kind = if sub_domain == ObjectDistance {
                MeasurementKind::DeltaMove(dir)
            } else {
                MeasurementKind::DeltaCameraMove(dir)
            };
            spec.metric_target = metric(kind, 1.0);
        }
    }
    spec.validate()?;
    Ok(spec)
}

/// Endless stream of category indices made of shuffled permutations, so
/// every block of 50 draws uses each category once.
struct CategoryStream {
    rng: ChaCha8Rng,
    buf: Vec<usize>,
    pos: usize,
}

impl CategoryStream {
    fn new(seed: u64, n: usize) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), buf: (0..n).collect(), pos: n }
    }

    fn next(&mut self) -> usize {
        if self.pos == self.buf.len() {
            self.buf.sort_unstable();
            self.buf.shuffle(&mut self.rng);
            self.pos = 0;
        }
        self.pos += 1;
        self.buf[self.pos - 1]
    }
}

fn task_prefix(task: Task) -> &'static str {
    match task {
        Task::Generation => "gen",
        Task::Editing => "edit",
    }
}

/// Mixes the run seed with a sub-domain so that streams are independent.
fn sub_seed(seed: u64, task: Task, sub_domain: SubDomain) -> u64 {
    let idx = SubDomain::ALL.iter().position(|d| *d == sub_domain).unwrap_or(0) as u64;
    let t = matches!(task, Task::Editing) as u64;
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((t << 8 | idx) + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// 9 sub-domains × 4 templates × 50 samples.
pub fn generate_task(task: Task, categories: &CategoryList, seed: u64) -> Result<Vec<BenchmarkSample>, BenchError> {
    categories.validate()?;
    let mut out = Vec::with_capacity(SubDomain::ALL.len() * TEMPLATES_PER_SUB_DOMAIN * SAMPLES_PER_TEMPLATE);
    for sub_domain in SubDomain::ALL {
        let s = sub_seed(seed, task, sub_domain);
        let mut stream = CategoryStream::new(s, categories.categories.len());
        let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0x5EED);
        let roles = roles(task, sub_domain);
        let opts = options(task, sub_domain);
        for (template_index, option) in opts.iter().enumerate() {
            for serial in 0..SAMPLES_PER_TEMPLATE {
                let cats: Vec<&Category> = roles.iter().map(|_| &categories.categories[stream.next()]).collect();
                let names: Vec<String> = cats.iter().map(|c| c.name.clone()).collect();
                let mut bindings: Bindings = roles.iter().map(|r| r.to_string()).zip(names.iter().cloned()).collect();
                let value = (sub_domain == SubDomain::ObjectSize).then(|| {
                    let h = cats[0].height;
                    let n = (rng.random_range(0.2..=1.0) * h * 100.0).round() / 100.0;
                    n.max(0.01)
                });
                if let Some(n) = value {
                    bindings.insert("N".into(), format!("{n:.2}"));
                }
                let prompt_text = render_prompt(task, sub_domain, template_index, &bindings)?;
                let spec = spec_of(task, sub_domain, option, &names, value)?;
                let stem = format!("{}-{template_index}-{serial:03}", sub_domain.name());
                out.push(BenchmarkSample {
                    id: format!("{}-{stem}", task_prefix(task)),
                    task,
                    sub_domain,
                    template_index,
                    prompt_text,
                    rephrased_text: None,
                    categories: names,
                    spec,
                    source_image_id: (task == Task::Editing).then(|| format!("src-{stem}")),
                });
            }
        }
    }
    Ok(out)
}

pub fn manifest_path(dir: &Path, task: Task) -> std::path::PathBuf {
    dir.join(format!("{}.jsonl", task.name()))
}

pub fn write_manifest<W: Write>(samples: &[BenchmarkSample], mut out: W) -> io::Result<()> {
    for s in samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_manifest(samples: &[BenchmarkSample], path: &Path) -> Result<(), BenchError> {
    let io_err = |source| BenchError::Io { path: path.display().to_string(), source };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut buf = Vec::new();
    write_manifest(samples, &mut buf).map_err(io_err)?;
    fs::write(path, buf).map_err(io_err)
}

pub fn read_manifest<R: BufRead>(reader: R) -> Result<Vec<BenchmarkSample>, BenchError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| BenchError::Manifest { line: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(BenchmarkSample::from_json_line(&line).map_err(|e| match e {
            BenchError::Manifest { message, .. } => BenchError::Manifest { line: i + 1, message },
            other => BenchError::Manifest { line: i + 1, message: other.to_string() },
        })?);
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<BenchmarkSample>, BenchError> {
    let f = fs::File::open(path).map_err(|source| BenchError::Io { path: path.display().to_string(), source })?;
    read_manifest(io::BufReader::new(f))
}
