//! Batch evaluation of a benchmark against a records directory.
//!
//! Layout: `<root>/records/<image id>.json` with depth files at the URI each
//! manifest names, relative to `<root>`.

use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::bench::{BenchmarkSample, CategoryList};
use crate::perception::{load_record, PerceptionError, PerceptionRecord};
use crate::scoring::{evaluate_sample, EvalConfig, Observation, SampleResult, SampleScore};
use crate::synth::{render_target, SynthError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot build a pool of {0} threads: {1}")]
    Pool(usize, String),
    #[error("line {line}: {message}")]
    Results { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{id}: {source}")]
    Synth { id: String, source: SynthError },
    #[error("{id}: {source}")]
    Write { id: String, source: PerceptionError },
}

#[derive(Debug, Clone)]
pub struct RecordStore {
    pub root: PathBuf,
}

impl RecordStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn record_path(&self, image_id: &str) -> PathBuf {
        self.root.join("records").join(format!("{image_id}.json"))
    }

    /// `Ok(None)` when no manifest exists for the id.
    pub fn load(&self, image_id: &str) -> Result<Option<PerceptionRecord>, PerceptionError> {
        let path = self.record_path(image_id);
        if !path.exists() {
            return Ok(None);
        }
        load_record(&path).map(Some)
    }
}

pub fn result_of(sample: &BenchmarkSample, score: SampleScore) -> SampleResult {
    SampleResult {
        sample_id: sample.id.clone(),
        sub_domain: sample.sub_domain,
        task: sample.task,
        template_index: sample.template_index,
        target_value: sample.spec.metric_target.map(|m| m.value),
        score,
    }
}

/// Scores one sample from disk. Missing or broken records score 0.
pub fn evaluate_one(sample: &BenchmarkSample, store: &RecordStore, cfg: &EvalConfig) -> SampleResult {
    let load = |id: &str, missing: &str| match store.load(id) {
        Ok(Some(r)) => Ok(r),
        Ok(None) => Err(SampleScore::failure(missing)),
        Err(e) => Err(SampleScore::failure(format!("invalid-record: {e}"))),
    };
    let target = match load(&sample.id, "missing-record") {
        Ok(r) => r,
        Err(s) => return result_of(sample, s),
    };
    let source = match &sample.source_image_id {
        Some(id) => match load(id, "missing-source-record") {
            Ok(r) => Some(r),
            Err(s) => return result_of(sample, s),
        },
        None => None,
    };
    let score = evaluate_sample(
        &sample.spec,
        Observation::on_disk(&target),
        source.as_ref().map(Observation::on_disk),
        cfg,
    );
    result_of(sample, score)
}

fn pool(parallelism: usize) -> Result<rayon::ThreadPool, RunError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| RunError::Pool(parallelism, e.to_string()))
}

/// Scores every sample on up to `parallelism` threads; output is sorted by
/// sample id whatever the degree.
pub fn evaluate_all(
    samples: &[BenchmarkSample],
    store: &RecordStore,
    cfg: &EvalConfig,
    parallelism: usize,
) -> Result<Vec<SampleResult>, RunError> {
    let mut out: Vec<SampleResult> =
        pool(parallelism)?.install(|| samples.par_iter().map(|s| evaluate_one(s, store, cfg)).collect());
    out.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    Ok(out)
}

pub fn write_results<W: Write>(results: &[SampleResult], mut out: W) -> io::Result<()> {
    for r in results {
        out.write_all(r.to_json_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_results<R: BufRead>(reader: R) -> Result<Vec<SampleResult>, RunError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            SampleResult::from_json_line(&line)
                .map_err(|e| RunError::Results { line: i + 1, message: e.to_string() })?,
        );
    }
    Ok(out)
}

pub fn load_results(path: &Path) -> Result<Vec<SampleResult>, RunError> {
    read_results(io::BufReader::new(std::fs::File::open(path)?))
}

/// Renders an oracle record (and source record) for every sample, as a
/// generator that always (or never) follows the prompt would.
pub fn render_oracle_run(
    samples: &[BenchmarkSample],
    categories: &CategoryList,
    root: &Path,
    seed: u64,
    conforming: bool,
    parallelism: usize,
) -> Result<(), RunError> {
    pool(parallelism)?.install(|| {
        samples.par_iter().enumerate().try_for_each(|(i, s)| {
            let case_seed = seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let case = render_target(&s.spec, categories, case_seed, conforming)
                .map_err(|source| RunError::Synth { id: s.id.clone(), source })?;
            let r = case
                .render(&s.id, s.source_image_id.as_deref(), case_seed)
                .map_err(|source| RunError::Synth { id: s.id.clone(), source })?;
            r.target.write(root).map_err(|source| RunError::Write { id: s.id.clone(), source })?;
            if let Some(src) = &r.source {
                src.write(root).map_err(|source| RunError::Write { id: s.id.clone(), source })?;
            }
            Ok(())
        })
    })
}
