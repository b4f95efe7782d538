//! Aggregation across runs: per-sub-domain means, average rank and
//! condition versus realized-state matrices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::bench::{options, BenchmarkSample};
use crate::geometry::{azimuth_diff, Azimuth};
use crate::runner::result_of;
use crate::scoring::{
    azimuth_target_of, dimension_of_option, relation_target_of, SampleResult, SampleScore, SubDomain, Task,
    DISTANCE_FULL, DISTANCE_ZERO,
};
use crate::predicates::Dimension;

/// Two means closer than this share a rank.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// Displacements shorter than this realize no move at all.
pub const MIN_MOVE: f64 = 0.1;
pub const OTHER_STATE: &str = "other";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("ranking needs at least two runs, got {0}")]
    TooFewRuns(usize),
    #[error("runs do not share a benchmark: {0}")]
    BenchmarkMismatch(String),
    #[error("sample {0} carries no diagnostics for its sub-domain")]
    MissingDiagnostics(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// All results of one model on one task.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRun {
    pub model_name: String,
    pub task: Task,
    /// Sorted by sample id.
    pub results: Vec<SampleResult>,
    /// Benchmark samples that had no result and were scored 0.
    pub missing: Vec<String>,
}

impl ModelRun {
    pub fn new(model_name: &str, task: Task, mut results: Vec<SampleResult>) -> Self {
        results.retain(|r| r.task == task);
        results.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        Self { model_name: model_name.to_string(), task, results, missing: Vec::new() }
    }

    /// Fills every benchmark sample without a result with a zero score.
    pub fn against(model_name: &str, task: Task, results: Vec<SampleResult>, benchmark: &[BenchmarkSample]) -> Self {
        let mut run = Self::new(model_name, task, results);
        let have: BTreeSet<String> = run.results.iter().map(|r| r.sample_id.clone()).collect();
        for s in benchmark.iter().filter(|s| s.task == task && !have.contains(&s.id)) {
            run.missing.push(s.id.clone());
            run.results.push(result_of(s, SampleScore::failure("missing-result")));
        }
        run.missing.sort();
        run.results.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        run
    }

    fn sample_ids(&self) -> Vec<&str> {
        self.results.iter().map(|r| r.sample_id.as_str()).collect()
    }
}

fn two_decimals<S: serde::Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64((x * 100.0).round() / 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainMean {
    pub sub_domain: SubDomain,
    pub samples: usize,
    #[serde(serialize_with = "two_decimals")]
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub model: String,
    pub task: Task,
    /// Leaderboard order; sub-domains without samples are left out.
    pub means: Vec<DomainMean>,
    /// Mean of the sub-domain means.
    #[serde(serialize_with = "two_decimals")]
    pub overall: f64,
    pub missing: Vec<String>,
}

impl Summary {
    pub fn mean_of(&self, d: SubDomain) -> Option<f64> {
        self.means.iter().find(|m| m.sub_domain == d).map(|m| m.mean)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("sub_domain,samples,mean\n");
        for m in &self.means {
            let _ = writeln!(s, "{},{},{:.2}", m.sub_domain, m.samples, m.mean);
        }
        let total: usize = self.means.iter().map(|m| m.samples).sum();
        let _ = writeln!(s, "overall,{total},{:.2}", self.overall);
        s
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serialization is infallible");
        s.push('\n');
        s
    }
}

/// Arithmetic mean of final scores per sub-domain.
pub fn subdomain_means(run: &ModelRun) -> Summary {
    let mut sums: BTreeMap<SubDomain, (f64, usize)> = BTreeMap::new();
    for r in &run.results {
        let e = sums.entry(r.sub_domain).or_default();
        e.0 += r.score.final_score;
        e.1 += 1;
    }
    let means: Vec<DomainMean> = SubDomain::ALL
        .into_iter()
        .filter_map(|d| sums.get(&d).map(|(sum, n)| DomainMean { sub_domain: d, samples: *n, mean: sum / *n as f64 }))
        .collect();
    let overall =
        if means.is_empty() { 0.0 } else { means.iter().map(|m| m.mean).sum::<f64>() / means.len() as f64 };
    Summary { model: run.model_name.clone(), task: run.task, means, overall, missing: run.missing.clone() }
}

/// Ranks of `values` with 1 for the largest; tied values share the mean of
/// their ranks.
pub fn rank_descending(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && (values[order[i]] - values[order[j]]).abs() <= TIE_TOLERANCE {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let shared = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = shared;
        }
        i = j;
    }
    ranks
}

/// Mean over sub-domains of each run's rank, in input order.
pub fn average_rank(runs: &[ModelRun]) -> Result<Vec<f64>, ReportError> {
    if runs.len() < 2 {
        return Err(ReportError::TooFewRuns(runs.len()));
    }
    let ids = runs[0].sample_ids();
    for r in &runs[1..] {
        if r.task != runs[0].task {
            return Err(ReportError::BenchmarkMismatch(format!("{} vs {} task", r.task.name(), runs[0].task.name())));
        }
        if r.sample_ids() != ids {
            return Err(ReportError::BenchmarkMismatch(format!(
                "{} and {} cover different samples",
                runs[0].model_name, r.model_name
            )));
        }
    }
    let summaries: Vec<Summary> = runs.iter().map(subdomain_means).collect();
    let domains: Vec<SubDomain> = summaries[0].means.iter().map(|m| m.sub_domain).collect();
    let mut totals = vec![0.0; runs.len()];
    for d in &domains {
        let values: Vec<f64> = summaries.iter().map(|s| s.mean_of(*d).unwrap_or(0.0)).collect();
        for (t, r) in totals.iter_mut().zip(rank_descending(&values)) {
            *t += r;
        }
    }
    let n = domains.len().max(1) as f64;
    Ok(totals.into_iter().map(|t| t / n).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionStateMatrix {
    pub sub_domain: SubDomain,
    pub task: Task,
    /// The four options, one row each.
    pub conditions: Vec<String>,
    /// The four options followed by [`OTHER_STATE`].
    pub states: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConditionStateMatrix {
    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("condition");
        for st in &self.states {
            let _ = write!(s, ",{}", csv_field(st));
        }
        s.push('\n');
        for (c, row) in self.conditions.iter().zip(&self.counts) {
            s.push_str(&csv_field(c));
            for n in row {
                let _ = write!(s, ",{n}");
            }
            s.push('\n');
        }
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn nearest(values: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if (v - x).abs() < (values[best] - x).abs() {
            best = i;
        }
    }
    best
}

fn dimension_index(d: Dimension) -> usize {
    match d {
        Dimension::Length => 0,
        Dimension::Width => 1,
        Dimension::Height => 2,
        Dimension::Characteristic => 3,
    }
}

/// Quantizes a right/ahead displacement into Forward, Backward, Left, Right.
fn move_state(opts: &[&str; 4], d: [f64; 2]) -> Option<usize> {
    let [right, ahead] = d;
    if right.hypot(ahead) < MIN_MOVE {
        return None;
    }
    let name = if ahead.abs() >= right.abs() {
        if ahead > 0.0 { "forward" } else { "backward" }
    } else if right > 0.0 {
        "right"
    } else {
        "left"
    };
    opts.iter().position(|o| o.eq_ignore_ascii_case(name))
}

/// Option index the sample actually realized, `None` for "other". Failed
/// samples realize nothing.
fn realized_state(r: &SampleResult) -> Result<Option<usize>, ReportError> {
    use SubDomain::*;
    if !r.score.present {
        return Ok(None);
    }
    let diag = &r.score.diagnostics;
    let flagged = !diag.flags.is_empty();
    let missing = || {
        if flagged {
            Ok(None)
        } else {
            Err(ReportError::MissingDiagnostics(r.sample_id.clone()))
        }
    };
    let opts = options(r.task, r.sub_domain);
    match (r.task, r.sub_domain) {
        (_, CameraPose | ObjectPose | ComplexPose) => {
            let Some(Some(az)) = diag.azimuths.first() else {
                return missing();
            };
            let targets: Vec<Azimuth> =
                opts.iter().map(|o| azimuth_target_of(o, r.sub_domain).expect("builtin options are known")).collect();
            let az = Azimuth::new(*az);
            let mut best = 0;
            for (i, t) in targets.iter().enumerate() {
                if azimuth_diff(az, *t) < azimuth_diff(az, targets[best]) {
                    best = i;
                }
            }
            Ok(Some(best))
        }
        (_, Egocentric | Allocentric | Intrinsic) => {
            let Some(label) = diag.relation else {
                return missing();
            };
            Ok(opts.iter().position(|o| relation_target_of(o, r.sub_domain).ok() == Some(label)))
        }
        (_, ObjectSize) => {
            let (Some(deltas), Some(n)) = (diag.dimension_deltas, r.target_value) else {
                return missing();
            };
            let errors: Vec<f64> = opts
                .iter()
                .map(|o| {
                    let dim = dimension_of_option(o).expect("builtin options are known");
                    (deltas[dimension_index(dim)] - n).abs() / n
                })
                .collect();
            // size states overlap (a bigger box is often taller too), so the
            // specified one wins whenever it is met
            if errors.get(r.template_index).is_some_and(|e| *e <= DISTANCE_FULL) {
                return Ok(Some(r.template_index));
            }
            let best = nearest(&errors, 0.0);
            Ok((errors[best] < DISTANCE_ZERO).then_some(best))
        }
        (Task::Generation, ObjectDistance | CameraDistance) => {
            let Some(v) = diag.measured_value else {
                return missing();
            };
            let grid: Vec<f64> = opts.iter().map(|o| o.parse().expect("builtin options are numeric")).collect();
            Ok(Some(nearest(&grid, v)))
        }
        (Task::Editing, ObjectDistance) => match diag.displacement {
            Some(d) => Ok(move_state(&opts, d)),
            None => missing(),
        },
        // the scene shifts against the camera's own motion
        (Task::Editing, CameraDistance) => match diag.displacement {
            Some([right, ahead]) => Ok(move_state(&opts, [-right, -ahead])),
            None => missing(),
        },
    }
}

/// Histogram of realized states for each specified option.
pub fn condition_state_matrix(run: &ModelRun, sub_domain: SubDomain) -> Result<ConditionStateMatrix, ReportError> {
    let opts = options(run.task, sub_domain);
    let mut counts = vec![vec![0usize; opts.len() + 1]; opts.len()];
    for r in run.results.iter().filter(|r| r.sub_domain == sub_domain) {
        let Some(row) = counts.get_mut(r.template_index) else {
            return Err(ReportError::BenchmarkMismatch(format!(
                "{} has template index {}",
                r.sample_id, r.template_index
            )));
        };
        let col = realized_state(r)?.unwrap_or(opts.len());
        row[col] += 1;
    }
    let conditions: Vec<String> = opts.iter().map(|s| s.to_string()).collect();
    let mut states = conditions.clone();
    states.push(OTHER_STATE.to_string());
    Ok(ConditionStateMatrix { sub_domain, task: run.task, conditions, states, counts })
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const PALETTE: [&str; 5] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#bab0ac"];

/// Stacked bar chart: one bar per condition, segments by realized state.
pub fn matrix_svg(m: &ConditionStateMatrix, title: &str) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, top, bottom) = (60.0, 40.0, 80.0);
    let plot_h = h - top - bottom;
    let slot = (w - left - 160.0) / m.conditions.len().max(1) as f64;
    let bar = slot * 0.6;
    let max = m.row_sums().into_iter().max().unwrap_or(0).max(1) as f64;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        w / 2.0,
        xml_escape(title)
    );
    let axis_y = top + plot_h;
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{axis_y}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{axis_y}" x2="{}" y2="{axis_y}" stroke="black"/>"#, w - 160.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
        left - 6.0,
        top + 4.0,
        max as usize
    );
    for (i, (cond, row)) in m.conditions.iter().zip(&m.counts).enumerate() {
        let x = left + slot * i as f64 + (slot - bar) / 2.0;
        let mut y = axis_y;
        for (j, n) in row.iter().enumerate() {
            if *n == 0 {
                continue;
            }
            let seg = plot_h * *n as f64 / max;
            y -= seg;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{bar:.1}" height="{seg:.1}" fill="{}"><title>{}: {n}</title></rect>"#,
                PALETTE[j.min(PALETTE.len() - 1)],
                xml_escape(&m.states[j])
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            x + bar / 2.0,
            axis_y + 16.0,
            xml_escape(cond)
        );
    }
    for (j, state) in m.states.iter().enumerate() {
        let y = top + 18.0 * j as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{y}" width="12" height="12" fill="{}"/>"#,
            w - 140.0,
            PALETTE[j.min(PALETTE.len() - 1)]
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            w - 122.0,
            y + 10.0,
            xml_escape(state)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn write_file(path: &Path, text: &str) -> Result<(), ReportError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, text).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

/// Writes `<out>/<model>/<task>/summary.{csv,json}` and one figure per
/// sub-domain. Returns the written paths.
pub fn write_run_report(run: &ModelRun, out: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let dir = out.join(&run.model_name).join(run.task.name());
    let summary = subdomain_means(run);
    let mut written = Vec::new();
    for (name, text) in [("summary.csv", summary.to_csv()), ("summary.json", summary.to_json())] {
        let p = dir.join(name);
        write_file(&p, &text)?;
        written.push(p);
    }
    for (i, d) in SubDomain::ALL.into_iter().enumerate() {
        if !run.results.iter().any(|r| r.sub_domain == d) {
            continue;
        }
        let m = condition_state_matrix(run, d)?;
        let p = dir.join(format!("fig{}_{}.svg", i + 1, d));
        write_file(&p, &matrix_svg(&m, &format!("{} / {} / {}", run.model_name, run.task.name(), d)))?;
        written.push(p);
    }
    Ok(written)
}

/// One row per run, grouped by task, with sub-domain means and the
/// average rank among the runs of the same task.
pub fn leaderboard(runs: &[ModelRun]) -> Result<String, ReportError> {
    let mut s = String::from("model,task");
    for d in SubDomain::ALL {
        let _ = write!(s, ",{d}");
    }
    s.push_str(",Ave. Rank\n");
    for task in [Task::Generation, Task::Editing] {
        let group: Vec<ModelRun> = runs.iter().filter(|r| r.task == task).cloned().collect();
        let ranks = match group.len() {
            0 => continue,
            1 => vec![1.0],
            _ => average_rank(&group)?,
        };
        for (run, rank) in group.iter().zip(ranks) {
            let summary = subdomain_means(run);
            s.push_str(&csv_field(&run.model_name));
            let _ = write!(s, ",{}", task.name());
            for d in SubDomain::ALL {
                match summary.mean_of(d) {
                    Some(m) => {
                        let _ = write!(s, ",{m:.2}");
                    }
                    None => s.push(','),
                }
            }
            let _ = writeln!(s, ",{rank:.2}");
        }
    }
    Ok(s)
}

pub fn write_leaderboard(runs: &[ModelRun], out: &Path) -> Result<PathBuf, ReportError> {
    let p = out.join("leaderboard.csv");
    write_file(&p, &leaderboard(runs)?)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicates::RelationLabel;
    use crate::scoring::Diagnostics;

    fn res(id: &str, d: SubDomain, t: usize, f: f64) -> SampleResult {
        let mut score = SampleScore::failure("");
        score.final_score = f;
        score.present = true;
        score.diagnostics.failure = None;
        SampleResult {
            sample_id: id.into(),
            sub_domain: d,
            task: Task::Generation,
            template_index: t,
            target_value: None,
            score,
        }
    }

    fn run_with(name: &str, means: &[f64]) -> ModelRun {
        let rs = SubDomain::ALL
            .iter()
            .zip(means)
            .map(|(d, m)| res(&format!("{d}-0"), *d, 0, *m))
            .collect();
        ModelRun::new(name, Task::Generation, rs)
    }

    #[test]
    fn half_and_half_is_fifty() {
        let rs = vec![res("a", SubDomain::Egocentric, 0, 100.0), res("b", SubDomain::Egocentric, 1, 0.0)];
        let s = subdomain_means(&ModelRun::new("m", Task::Generation, rs));
        assert_eq!(s.mean_of(SubDomain::Egocentric), Some(50.0));
        assert!(s.to_csv().contains("egocentric,2,50.00"));
    }

    #[test]
    fn tie_rule() {
        assert_eq!(rank_descending(&[3.0, 1.0, 2.0]), vec![1.0, 3.0, 2.0]);
        assert_eq!(rank_descending(&[5.0, 5.0]), vec![1.5, 1.5]);
        assert_eq!(rank_descending(&[1.0, 7.0, 7.0, 7.0]), vec![4.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn dominating_and_identical_runs() {
        let a = run_with("a", &[90.0; 9]);
        let b = run_with("b", &[10.0; 9]);
        assert_eq!(average_rank(&[a.clone(), b]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(average_rank(&[a.clone(), a.clone()]).unwrap(), vec![1.5, 1.5]);
        assert!(matches!(average_rank(&[a]), Err(ReportError::TooFewRuns(1))));
    }

    #[test]
    fn three_runs_match_hand_ranks() {
        let a = run_with("a", &[90.0, 90.0, 90.0, 50.0, 50.0, 50.0, 10.0, 10.0, 50.0]);
        let b = run_with("b", &[50.0, 50.0, 50.0, 90.0, 90.0, 90.0, 50.0, 50.0, 50.0]);
        let c = run_with("c", &[10.0, 10.0, 10.0, 10.0, 10.0, 10.0, 90.0, 90.0, 90.0]);
        // a: 1+1+1+2+2+2+3+3+2.5, b: 2+2+2+1+1+1+2+2+2.5, c: 3+3+3+3+3+3+1+1+1
        let want = [17.5 / 9.0, 15.5 / 9.0, 21.0 / 9.0];
        let got = average_rank(&[a, b, c]).unwrap();
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{got:?}");
        }
    }

    #[test]
    fn rows_conserve_sample_counts() {
        let cats = crate::bench::CategoryList::builtin();
        let bench = crate::bench::generate_task(Task::Editing, &cats, 4).unwrap();
        let rs = bench.iter().map(|s| result_of(s, SampleScore::failure("absent:x"))).collect();
        let run = ModelRun::new("m", Task::Editing, rs);
        for d in SubDomain::ALL {
            let m = condition_state_matrix(&run, d).unwrap();
            assert_eq!(m.row_sums(), vec![crate::bench::SAMPLES_PER_TEMPLATE; 4]);
        }
    }

    #[test]
    fn mismatched_benchmarks_are_rejected() {
        let a = run_with("a", &[1.0; 9]);
        let b = run_with("b", &[1.0; 8]);
        assert!(matches!(average_rank(&[a, b]), Err(ReportError::BenchmarkMismatch(_))));
    }

    #[test]
    fn missing_samples_score_zero() {
        let cats = crate::bench::CategoryList::builtin();
        let bench = crate::bench::generate_task(Task::Generation, &cats, 1).unwrap();
        let first = result_of(&bench[0], SampleScore::failure("x"));
        let run = ModelRun::against("m", Task::Generation, vec![first], &bench);
        assert_eq!(run.results.len(), bench.len());
        assert_eq!(run.missing.len(), bench.len() - 1);
    }

    #[test]
    fn always_forward_fills_one_column() {
        let rs: Vec<SampleResult> = (0..8)
            .map(|i| {
                let mut r = res(&format!("s{i}"), SubDomain::ObjectPose, i % 4, 0.0);
                r.score.diagnostics = Diagnostics { azimuths: vec![Some(178.0)], ..Default::default() };
                r
            })
            .collect();
        let m = condition_state_matrix(&ModelRun::new("m", Task::Generation, rs), SubDomain::ObjectPose).unwrap();
        let col = options(Task::Generation, SubDomain::ObjectPose).iter().position(|o| *o == "Forward").unwrap();
        for row in &m.counts {
            assert_eq!(row.iter().sum::<usize>(), 2);
            assert_eq!(row[col], 2);
        }
    }

    #[test]
    fn relations_and_failures() {
        let mut ok = res("a", SubDomain::Egocentric, 2, 100.0);
        ok.score.diagnostics.relation = Some(RelationLabel::EgoLeft);
        let mut none = res("b", SubDomain::Egocentric, 2, 0.0);
        none.score.diagnostics.relation = Some(RelationLabel::None);
        let failed = SampleResult { score: SampleScore::failure("absent:cat"), ..res("c", SubDomain::Egocentric, 0, 0.0) };
        let run = ModelRun::new("m", Task::Generation, vec![ok, none, failed]);
        let m = condition_state_matrix(&run, SubDomain::Egocentric).unwrap();
        assert_eq!(m.counts[2], vec![0, 0, 1, 0, 1]);
        assert_eq!(m.counts[0], vec![0, 0, 0, 0, 1]);

        let bare = res("d", SubDomain::Egocentric, 0, 0.0);
        let run = ModelRun::new("m", Task::Generation, vec![bare]);
        assert!(matches!(condition_state_matrix(&run, SubDomain::Egocentric), Err(ReportError::MissingDiagnostics(_))));
    }

    #[test]
    fn camera_moves_read_against_the_scene_shift() {
        let opts = options(Task::Editing, SubDomain::CameraDistance);
        let mut r = res("a", SubDomain::CameraDistance, 0, 0.0);
        r.task = Task::Editing;
        r.score.diagnostics.displacement = Some([0.0, -1.0]);
        let got = realized_state(&r).unwrap().map(|i| opts[i]);
        assert_eq!(got, Some("Forward"));
        r.score.diagnostics.displacement = Some([0.02, 0.03]);
        assert_eq!(realized_state(&r).unwrap(), None);
    }

    #[test]
    fn met_size_condition_wins_over_overlapping_states() {
        let mut r = res("a", SubDomain::ObjectSize, 0, 100.0);
        r.target_value = Some(0.3);
        // length, width, height, characteristic
        r.score.diagnostics.dimension_deltas = Some([0.1, 0.1, 0.3, 0.31]);
        let opts = options(Task::Generation, SubDomain::ObjectSize);
        assert_eq!(realized_state(&r).unwrap().map(|i| opts[i]), Some("Bigger"));
        r.template_index = 2;
        assert_eq!(realized_state(&r).unwrap().map(|i| opts[i]), Some("Taller"));
        r.score.diagnostics.dimension_deltas = Some([0.0, 0.0, 0.0, 0.0]);
        assert_eq!(realized_state(&r).unwrap(), None);
    }

    #[test]
    fn svg_is_self_contained() {
        let m = ConditionStateMatrix {
            sub_domain: SubDomain::Intrinsic,
            task: Task::Generation,
            conditions: vec!["a<b".into(); 4],
            states: vec!["x".into(); 5],
            counts: vec![vec![1, 0, 0, 0, 1]; 4],
        };
        let svg = matrix_svg(&m, "t & u");
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a&lt;b") && svg.contains("t &amp; u"));
        assert!(!svg.contains("href"));
    }

    proptest::proptest! {
        #[test]
        fn ranks_survive_affine_rescaling(
            means in proptest::collection::vec(proptest::collection::vec(0.0f64..100.0, 9), 2..5),
            scale in 0.1f64..10.0,
            shift in -50.0f64..50.0,
        ) {
            let runs: Vec<ModelRun> = means.iter().enumerate().map(|(i, m)| run_with(&format!("m{i}"), m)).collect();
            let moved: Vec<ModelRun> = means
                .iter()
                .enumerate()
                .map(|(i, m)| run_with(&format!("m{i}"), &m.iter().map(|x| x * scale + shift).collect::<Vec<_>>()))
                .collect();
            proptest::prop_assert_eq!(average_rank(&runs).unwrap(), average_rank(&moved).unwrap());
        }

        #[test]
        fn means_ignore_order(seed in 0u64..500) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut rs: Vec<SampleResult> =
                (0..40).map(|i| res(&format!("s{i:02}"), SubDomain::ALL[i % 9], 0, (i * 7 % 101) as f64)).collect();
            let base = subdomain_means(&ModelRun::new("m", Task::Generation, rs.clone()));
            rs.shuffle(&mut rng);
            let mut shuffled = ModelRun::new("m", Task::Generation, Vec::new());
            shuffled.results = rs;
            proptest::prop_assert_eq!(subdomain_means(&shuffled).to_csv(), base.to_csv());
        }
    }
}
