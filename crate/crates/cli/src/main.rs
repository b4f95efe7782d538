use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spacegauge::alignment::{agreement, read_labels, AlignmentError};
use spacegauge::bench::{generate_task, load_manifest, manifest_path, save_manifest, BenchError, BenchmarkSample, CategoryList};
use spacegauge::config::{ConfigError, Overrides, RunConfig, CONFIG_ENV};
use spacegauge::perception::{load_record, PerceptionError};
use spacegauge::report::{write_leaderboard, write_run_report, ModelRun, ReportError};
use spacegauge::runner::{evaluate_all, load_results, render_oracle_run, write_results, RecordStore, RunError};
use spacegauge::scene::{dump_points, reconstruct_with_depth, SceneConfig};
use spacegauge::scoring::Task;
use spacegauge::synth::{render_target, SynthError};

const EXIT_SCHEMA: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "spacegauge", version, about = "Spatial-faithfulness benchmark for image generation and editing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate benchmark manifests.
    GenBench(GenBench),
    /// Score perception records against a benchmark.
    Evaluate(Evaluate),
    /// Aggregate result files into summaries, figures and a leaderboard.
    Report(Report),
    /// Compare scores with human labels.
    Align(Align),
    /// Render synthetic oracle records.
    Synth(Synth),
    /// Schema-check a records directory.
    Validate(Validate),
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Generation,
    Editing,
    All,
}

impl TaskArg {
    fn tasks(self) -> Vec<Task> {
        match self {
            Self::Generation => vec![Task::Generation],
            Self::Editing => vec![Task::Editing],
            Self::All => vec![Task::Generation, Task::Editing],
        }
    }
}

#[derive(Args)]
struct GenBench {
    #[arg(long, value_enum, default_value = "all")]
    task: TaskArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "benchmark")]
    out: PathBuf,
    /// CSV `name,length,width,height` replacing the built-in categories.
    #[arg(long)]
    categories: Option<PathBuf>,
}

#[derive(Args)]
struct Evaluate {
    /// Manifest file, or a directory holding `<task>.jsonl` manifests.
    #[arg(long)]
    benchmark: Option<PathBuf>,
    /// Root holding `records/` and `depth/`.
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    min_points: Option<usize>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Config file; defaults to the file named by SPACEGAUGE_CONFIG.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write each sample's reconstructed points to `<dir>/<id>.xyz`.
    #[arg(long)]
    dump_points: Option<PathBuf>,
}

#[derive(Args)]
struct Report {
    /// `MODEL=RESULTS.jsonl`, repeatable.
    #[arg(long = "run", required = true)]
    runs: Vec<String>,
    /// Benchmark used to score samples missing from a run as 0.
    #[arg(long)]
    benchmark: Option<PathBuf>,
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

#[derive(Args)]
struct Align {
    #[arg(long)]
    results: PathBuf,
    /// CSV `sample_id,annotator,label`.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Synth {
    /// One conforming and one violating case per sub-domain option.
    #[arg(long, conflicts_with = "benchmark")]
    grid: bool,
    /// Render a perfect generator for every sample of this benchmark.
    #[arg(long)]
    benchmark: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    task: TaskArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    #[arg(long, default_value = "synth")]
    out: PathBuf,
}

#[derive(Args)]
struct Validate {
    /// Root holding `records/`, or the records directory itself.
    #[arg(long)]
    records: PathBuf,
}

/// An exit code with its message.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn schema(message: impl ToString) -> Self {
        Self { code: EXIT_SCHEMA, message: message.to_string() }
    }

    fn io(message: impl ToString) -> Self {
        Self { code: EXIT_IO, message: message.to_string() }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Io { .. } => Self::io(e),
            _ => Self::schema(e),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::schema(e)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Io(_) | RunError::Write { .. } => Self::io(e),
            _ => Self::schema(e),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Io { .. } => Self::io(e),
            _ => Self::schema(e),
        }
    }
}

impl From<AlignmentError> for Failure {
    fn from(e: AlignmentError) -> Self {
        Self::schema(e)
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        Self::schema(e)
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

/// Samples from a manifest file or from every `<task>.jsonl` in a directory.
fn load_benchmark(path: &Path) -> Result<Vec<BenchmarkSample>, Failure> {
    if !path.is_dir() {
        return Ok(load_manifest(path)?);
    }
    let mut samples = Vec::new();
    for task in [Task::Generation, Task::Editing] {
        let p = manifest_path(path, task);
        if p.exists() {
            samples.extend(load_manifest(&p)?);
        }
    }
    if samples.is_empty() {
        return Err(Failure::io(format!("{}: no manifests found", path.display())));
    }
    Ok(samples)
}

fn categories(path: Option<&Path>) -> Result<CategoryList, Failure> {
    match path {
        None => Ok(CategoryList::builtin()),
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| Failure::io(format!("{}: {e}", p.display())))?;
            Ok(CategoryList::from_csv(f)?)
        }
    }
}

fn gen_bench(args: GenBench) -> Result<(), Failure> {
    let cats = categories(args.categories.as_deref())?;
    for task in args.task.tasks() {
        let samples = generate_task(task, &cats, args.seed)?;
        let path = manifest_path(&args.out, task);
        save_manifest(&samples, &path)?;
        println!("{}: {} samples", path.display(), samples.len());
    }
    Ok(())
}

fn resolve_config(args: &Evaluate) -> Result<RunConfig, Failure> {
    let file = match args.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from)) {
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(|e| Failure::io(format!("{}: {e}", p.display())))?;
            Some(Overrides::parse(&text)?)
        }
        None => None,
    };
    let flags = Overrides {
        threshold: args.threshold,
        min_points: args.min_points,
        benchmark: args.benchmark.clone(),
        records: args.records.clone(),
        out: args.out.clone(),
        parallelism: args.parallelism,
        seed: args.seed,
    };
    Ok(RunConfig::resolve(flags, file)?)
}

fn evaluate(args: Evaluate) -> Result<(), Failure> {
    let cfg = resolve_config(&args)?;
    let samples = load_benchmark(&cfg.benchmark)?;
    fs::read_dir(&cfg.records).map_err(|e| Failure::io(format!("{}: {e}", cfg.records.display())))?;
    let store = RecordStore::new(&cfg.records);
    let results = evaluate_all(&samples, &store, &cfg.eval(), cfg.parallelism)?;

    let mut buf = Vec::new();
    write_results(&results, &mut buf).map_err(Failure::io)?;
    let results_path = cfg.out.join("results.jsonl");
    write_text(&results_path, &String::from_utf8(buf).expect("results are UTF-8"))?;
    write_text(&cfg.out.join("run_config.txt"), &cfg.dump())?;

    if let Some(dir) = &args.dump_points {
        dump_all_points(&samples, &store, &cfg, dir)?;
    }

    let failed: Vec<_> = results.iter().filter(|r| r.score.diagnostics.failure.is_some()).collect();
    let missing = failed
        .iter()
        .filter(|r| r.score.diagnostics.failure.as_deref().is_some_and(|f| f.starts_with("missing")))
        .count();
    let mean = results.iter().map(|r| r.score.final_score).sum::<f64>() / results.len().max(1) as f64;
    println!("{}: {} samples, mean final {mean:.2}", results_path.display(), results.len());
    if !failed.is_empty() {
        eprintln!("warning: {} samples scored 0 on failure ({missing} without records)", failed.len());
    }
    Ok(())
}

fn dump_all_points(samples: &[BenchmarkSample], store: &RecordStore, cfg: &RunConfig, dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?;
    let scene_cfg = SceneConfig { min_points: cfg.min_points };
    for s in samples {
        let Ok(Some(rec)) = store.load(&s.id) else {
            continue;
        };
        let cats: Vec<(String, usize)> = s.spec.categories.iter().map(|c| (c.name.clone(), c.count)).collect();
        let Ok(depth) = rec.load_depth() else {
            continue;
        };
        let Ok(scene) = reconstruct_with_depth(&rec, &depth, &cats, &scene_cfg) else {
            continue;
        };
        let path = dir.join(format!("{}.xyz", s.id));
        let mut f = io::BufWriter::new(
            fs::File::create(&path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?,
        );
        dump_points(&rec, &depth, &scene, &mut f)
            .and_then(|_| f.flush())
            .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn report(args: Report) -> Result<(), Failure> {
    let benchmark = args.benchmark.as_deref().map(load_benchmark).transpose()?;
    let mut runs = Vec::new();
    for spec in &args.runs {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| Failure::schema(format!("--run {spec:?}: expected MODEL=RESULTS")))?;
        let path = Path::new(path);
        if !path.exists() {
            return Err(Failure::io(format!("{}: no such file", path.display())));
        }
        let results = load_results(path)?;
        for task in [Task::Generation, Task::Editing] {
            let mine: Vec<_> = results.iter().filter(|r| r.task == task).cloned().collect();
            if mine.is_empty() {
                continue;
            }
            let run = match &benchmark {
                Some(b) => ModelRun::against(name, task, mine, b),
                None => ModelRun::new(name, task, mine),
            };
            if !run.missing.is_empty() {
                eprintln!("warning: {name} {}: {} samples missing, scored 0", task.name(), run.missing.len());
            }
            runs.push(run);
        }
    }
    for run in &runs {
        write_run_report(run, &args.out)?;
    }
    let path = write_leaderboard(&runs, &args.out)?;
    let text = fs::read_to_string(&path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    print!("{text}");
    Ok(())
}

fn align(args: Align) -> Result<(), Failure> {
    let results = load_results(&args.results)?;
    let f = fs::File::open(&args.labels).map_err(|e| Failure::io(format!("{}: {e}", args.labels.display())))?;
    let labels = read_labels(f)?;
    let r = agreement(&labels, &results)?;
    if let Some(out) = &args.out {
        write_text(&out.join("agreement.json"), &r.to_json())?;
        write_text(&out.join("agreement.csv"), &r.to_csv())?;
    }
    print!("{}", r.to_csv());
    if !r.no_consensus.is_empty() {
        eprintln!("warning: {} samples without a majority label were excluded", r.no_consensus.len());
    }
    Ok(())
}

/// Grid case ids carry the expected outcome.
fn grid_case(s: &BenchmarkSample, conforming: bool) -> BenchmarkSample {
    let tag = if conforming { "conforming" } else { "violating" };
    let mut c = s.clone();
    c.id = format!("{}-{tag}", s.id);
    c.source_image_id = s.source_image_id.as_ref().map(|id| format!("{id}-{tag}"));
    c
}

fn synth(args: Synth) -> Result<(), Failure> {
    let cats = CategoryList::builtin();
    if let Some(path) = &args.benchmark {
        let samples = load_benchmark(path)?;
        render_oracle_run(&samples, &cats, &args.out, args.seed, true, args.parallelism)?;
        println!("{}: {} perfect-generator records", args.out.display(), samples.len());
        return Ok(());
    }
    if !args.grid {
        return Err(Failure::schema("synth needs --grid or --benchmark"));
    }
    let mut expected = String::from("sample_id,expected_final\n");
    for task in args.task.tasks() {
        let mut seen = std::collections::BTreeSet::new();
        let firsts: Vec<BenchmarkSample> = generate_task(task, &cats, args.seed)?
            .into_iter()
            .filter(|s| seen.insert((s.sub_domain, s.template_index)))
            .collect();
        let mut cases = Vec::new();
        for (i, s) in firsts.iter().enumerate() {
            for conforming in [true, false] {
                let c = grid_case(s, conforming);
                let seed = args.seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                let case = render_target(&c.spec, &cats, seed, conforming)?;
                let r = case.render(&c.id, c.source_image_id.as_deref(), seed)?;
                let write = |x: &spacegauge::synth::Rendered| x.write(&args.out).map_err(|e| Failure::io(e.to_string()));
                write(&r.target)?;
                if let Some(src) = &r.source {
                    write(src)?;
                }
                expected.push_str(&format!("{},{}\n", c.id, if conforming { 100 } else { 0 }));
                cases.push(c);
            }
        }
        save_manifest(&cases, &manifest_path(&args.out.join("benchmark"), task))?;
        println!("{} {}: {} oracle cases", args.out.display(), task.name(), cases.len());
    }
    write_text(&args.out.join("expected.csv"), &expected)
}

fn validate(args: Validate) -> Result<(), Failure> {
    let nested = args.records.join("records");
    let dir = if nested.is_dir() { nested } else { args.records.clone() };
    let entries = fs::read_dir(&dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut bad = 0;
    for f in &files {
        match load_record(f) {
            Ok(_) => println!("ok {}", f.display()),
            Err(e) => {
                bad += 1;
                let kind = if matches!(e, PerceptionError::Io { .. }) { "unreadable" } else { "invalid" };
                println!("{kind} {}: {e}", f.display());
            }
        }
    }
    println!("{} records, {bad} invalid", files.len());
    if bad > 0 {
        return Err(Failure::schema(format!("{bad} of {} records failed validation", files.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenBench(a) => gen_bench(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => report(a),
        Command::Align(a) => align(a),
        Command::Synth(a) => synth(a),
        Command::Validate(a) => validate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
