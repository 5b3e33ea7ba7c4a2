use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use humer_core::augment::{augment_samples, AugmentOptions};
use humer_core::corpus::{save_jsonl, split, Dataset, SplitSpec};
use humer_core::cparse::parse_function;
use humer_core::curriculum::{evaluate, plan, CurriculumPlan};
use humer_core::difficulty::{
    score_dataset, DifficultyScore, ScoringConfig, Strategy, TrainBudget,
};
use humer_core::experiment::{
    read_manifest, replay, report, report_csv, report_table, run_on, sweep, write_json, DataSource,
    Grid, RunConfig,
};
use humer_core::metrics::{analyze, MetricsRecord};
use humer_core::minieval::{equivalent_with_budget, Verdict, DEFAULT_BUDGET};
use humer_core::model::{restore, serve, ClassifierSpec, ModelState, ServeOptions};
use humer_core::synthetic::SyntheticConfig;
use humer_core::{Error, ErrorClass, Result};

const EXIT_DIVERGED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

/// Curriculum training for source-code vulnerability classifiers.
#[derive(Parser, Debug)]
#[command(name = "humer", version)]
struct Cli {
    /// Worker threads for parallel stages (defaults to all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a JSONL corpus (or generate a synthetic one) and optionally split it.
    Ingest(IngestArgs),
    /// Per-function SLOC, cyclomatic complexity, Halstead volume and MI.
    Metrics(MetricsArgs),
    /// Difficulty score for every sample.
    Score(ScoreArgs),
    /// Split sorted difficulty scores into buckets.
    Plan(PlanArgs),
    /// Semantics-preserving variants of every sample.
    Augment(AugmentArgs),
    /// Run a baseline or curriculum experiment end to end.
    Train(TrainArgs),
    /// Evaluate a saved model on a labeled corpus.
    Evaluate(EvaluateArgs),
    /// Run the baseline plus every grid cell.
    Sweep(SweepArgs),
    /// Tabulate metrics and deltas from run manifests.
    Report(ReportArgs),
    /// Compare two functions on random inputs with the reference interpreter.
    CheckEquivalence(EquivArgs),
    /// Serve the reference classifier over the line-JSON bridge protocol.
    #[command(hide = true)]
    ServeReference(ServeArgs),
}

#[derive(Args, Debug, Clone)]
struct SeedArg {
    /// Base seed.
    #[arg(long, env = "HUMER_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// JSONL corpus with `id`, `code`, `label` per line.
    #[arg(long, value_name = "PATH", conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Generate a planted-pattern corpus of this many samples instead.
    #[arg(long, value_name = "N")]
    synthetic: Option<usize>,
}

impl DataArgs {
    fn source(&self, seed: u64) -> Result<DataSource> {
        match (&self.input, self.synthetic) {
            (Some(path), _) => Ok(DataSource::Jsonl { path: path.clone() }),
            (None, Some(samples)) => Ok(DataSource::Synthetic(SyntheticConfig {
                samples,
                seed,
                ..Default::default()
            })),
            (None, None) => Err(Error::Config("give --input or --synthetic".into())),
        }
    }

    fn load(&self, seed: u64) -> Result<Dataset> {
        self.source(seed)?.load()
    }
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    seed: SeedArg,
    /// Write the validated corpus here.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write train/valid/test JSONL files into this directory.
    #[arg(long, value_name = "DIR")]
    split_dir: Option<PathBuf>,
    /// Shuffle without preserving the class ratio in each split.
    #[arg(long)]
    no_stratify: bool,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Single C files to measure instead of a corpus.
    #[arg(long = "file", value_name = "PATH")]
    files: Vec<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
    /// JSONL output path (stdout when absent).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum StrategyArg {
    Code,
    Model,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Code => Strategy::Code,
            StrategyArg::Model => Strategy::Model,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct SpecArgs {
    /// Classifier spec as JSON (`{"kind": "reference", ...}` or
    /// `{"kind": "external", "command": [...]}`); the reference model otherwise.
    #[arg(long, value_name = "PATH")]
    spec: Option<PathBuf>,
    /// Maximum epochs per training call.
    #[arg(long, value_name = "N", default_value_t = 10)]
    max_epochs: usize,
}

impl SpecArgs {
    fn spec(&self, seed: u64) -> Result<ClassifierSpec> {
        match &self.spec {
            Some(path) => {
                let mut value: serde_json::Value = read_config(path)?;
                if let Some(obj) = value.as_object_mut() {
                    obj.entry("seed").or_insert(seed.into());
                }
                serde_json::from_value(value)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            }
            None => Ok(ClassifierSpec::reference(seed)),
        }
    }

    fn budget(&self) -> TrainBudget {
        TrainBudget {
            max_epochs: self.max_epochs,
            ..TrainBudget::default()
        }
    }
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// Number of submodels for the model strategy.
    #[arg(long)]
    m: Option<usize>,
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlanArgs {
    /// Scores written by `score`.
    #[arg(long, value_name = "PATH")]
    scores: PathBuf,
    /// Number of buckets.
    #[arg(long = "buckets", value_name = "N")]
    n: usize,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    seed: SeedArg,
    /// Use the reversed-condition form of R1.
    #[arg(long)]
    reverse_condition: bool,
    /// Maximum hard variants per function.
    #[arg(long, default_value_t = AugmentOptions::default().max_hard)]
    max_hard: usize,
    /// JSONL output path (stdout when absent).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Run configuration as JSON; flags below fill in what it leaves out.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// Difficulty strategy; the random-order baseline when absent.
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long = "buckets", value_name = "N")]
    n: Option<usize>,
    /// Fine-tune on variants of mispredicted samples after each stage.
    #[arg(long)]
    augment: bool,
    #[arg(long)]
    no_stratify: bool,
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    seed: SeedArg,
    /// Run directories are created here, one per config hash.
    #[arg(long, value_name = "DIR", default_value = "runs")]
    out: PathBuf,
    /// Re-run a recorded manifest and check it reproduces.
    #[arg(long, value_name = "MANIFEST", conflicts_with_all = ["config", "input", "synthetic"])]
    replay: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Model state written by `train`.
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    seed: SeedArg,
}

/// Sweep configuration file: a base run plus the grid.
#[derive(Debug, Serialize, Deserialize)]
struct SweepFile {
    base: RunConfig,
    #[serde(default)]
    grid: Grid,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// `{"base": RunConfig, "grid": Grid}` as JSON.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long = "buckets", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, value_name = "DIR", default_value = "sweep")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Manifest files, or directories searched for `manifest.json`.
    #[arg(required = true, value_name = "PATH")]
    manifests: Vec<PathBuf>,
    /// Also write the rows as CSV.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EquivArgs {
    left: PathBuf,
    right: PathBuf,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[command(flatten)]
    seed: SeedArg,
    /// Do not advertise snapshot/restore.
    #[arg(long)]
    no_snapshot: bool,
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            Box::new(BufWriter::new(
                fs::File::create(p).map_err(|e| Error::io(p, e))?,
            ))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_lines<T: Serialize>(path: Option<&Path>, items: &[T]) -> Result<()> {
    let mut out = output(path)?;
    let display = path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf);
    for item in items {
        let line = serde_json::to_string(item).expect("record serializes");
        writeln!(out, "{line}").map_err(|e| Error::io(&display, e))?;
    }
    out.flush().map_err(|e| Error::io(&display, e))
}

fn write_value<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    match path {
        Some(p) => write_json(p, value),
        None => {
            println!(
                "{}",
                serde_json::to_string_pretty(value).expect("value serializes")
            );
            Ok(())
        }
    }
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let data = a.data.load(a.seed.seed)?;
    let (pos, neg) = data.class_counts();
    println!(
        "{}: {} samples ({pos} vulnerable, {neg} normal)",
        data.name,
        data.len()
    );
    if let Some(out) = &a.out {
        save_jsonl(&data, out)?;
    }
    if let Some(dir) = &a.split_dir {
        let spec = SplitSpec {
            stratify: !a.no_stratify,
            ..SplitSpec::with_seed(a.seed.seed)
        };
        let (train, valid, test) = split(&data, &spec)?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, part) in [("train", &train), ("valid", &valid), ("test", &test)] {
            save_jsonl(part, dir.join(format!("{name}.jsonl")))?;
            println!("{name}: {}", part.len());
        }
    }
    Ok(())
}

fn cmd_metrics(a: &MetricsArgs) -> Result<()> {
    let mut records = Vec::new();
    if a.files.is_empty() {
        for s in a.data.load(a.seed.seed)?.iter() {
            records.push(MetricsRecord::new(s.id.clone(), &analyze(&s.code)?));
        }
    } else {
        for f in &a.files {
            let code = fs::read_to_string(f).map_err(|e| Error::io(f, e))?;
            records.push(MetricsRecord::new(
                f.display().to_string(),
                &analyze(&code)?,
            ));
        }
    }
    write_lines(a.out.as_deref(), &records)
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let data = a.data.load(a.seed.seed)?;
    let cfg = ScoringConfig {
        strategy: a.strategy.into(),
        m: a.m,
        spec: a.spec.spec(a.seed.seed)?,
        seed: a.seed.seed,
        budget: a.spec.budget(),
    };
    let scores = score_dataset(&data, &cfg)?;
    write_value(a.out.as_deref(), &scores)
}

fn cmd_plan(a: &PlanArgs) -> Result<()> {
    let text = fs::read_to_string(&a.scores).map_err(|e| Error::io(&a.scores, e))?;
    let scores: Vec<DifficultyScore> = serde_json::from_str(&text)
        .map_err(|e| Error::Manifest(format!("{}: {e}", a.scores.display())))?;
    let p: CurriculumPlan = plan(&scores, a.n)?;
    write_value(a.out.as_deref(), &p)
}

fn cmd_augment(a: &AugmentArgs) -> Result<()> {
    let data = a.data.load(a.seed.seed)?;
    let opts = AugmentOptions {
        reverse_condition: a.reverse_condition,
        max_hard: a.max_hard,
    };
    let variants = augment_samples(&data.samples, &opts);
    info!("{} variants from {} samples", variants.len(), data.len());
    write_lines(a.out.as_deref(), &variants)
}

fn train_config(a: &TrainArgs) -> Result<RunConfig> {
    let seed = a.seed.seed;
    let mut cfg = match &a.config {
        Some(path) => read_config::<RunConfig>(path)?,
        None => RunConfig::baseline(a.data.source(seed)?, a.spec.spec(seed)?, seed),
    };
    if a.config.is_some() && (a.data.input.is_some() || a.data.synthetic.is_some()) {
        cfg.data = a.data.source(seed)?;
    }
    if a.config.is_none() {
        cfg.budget = a.spec.budget();
        cfg.split.stratify = !a.no_stratify;
    }
    if let Some(s) = a.strategy {
        cfg.strategy = Some(s.into());
    }
    cfg.m = a.m.or(cfg.m);
    cfg.n = a.n.or(cfg.n);
    cfg.augment |= a.augment;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    if let Some(path) = &a.replay {
        let manifest = read_manifest(path)?;
        let again = replay(&manifest)?;
        println!("replay of {} reproduced the recorded run", path.display());
        println!(
            "{}",
            serde_json::to_string_pretty(&again.evaluation).expect("serializes")
        );
        return Ok(());
    }
    let cfg = train_config(a)?;
    let data = cfg.data.load()?;
    let (mut model, manifest) = run_on(&cfg, &data)?;
    let dir = a.out.join(cfg.hash());
    write_json(&dir.join("config.json"), &cfg)?;
    write_json(&dir.join("manifest.json"), &manifest)?;
    write_json(&dir.join("model.json"), &model.snapshot()?)?;
    println!("{}: {}", cfg.label(), dir.display());
    println!(
        "{}",
        serde_json::to_string_pretty(&manifest.evaluation).expect("serializes")
    );
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let text = fs::read_to_string(&a.model).map_err(|e| Error::io(&a.model, e))?;
    let state: ModelState = serde_json::from_str(&text)
        .map_err(|e| Error::Manifest(format!("{}: {e}", a.model.display())))?;
    let mut model = restore(&state)?;
    let data = a.data.load(a.seed.seed)?;
    let metrics = evaluate(model.as_mut(), &data)?;
    write_value(None, &metrics)
}

/// Returns whether every cell succeeded.
fn cmd_sweep(a: &SweepArgs, jobs: usize) -> Result<bool> {
    let seed = a.seed.seed;
    let (base, mut grid) = match &a.config {
        Some(path) => {
            let f: SweepFile = read_config(path)?;
            (f.base, f.grid)
        }
        None => {
            let mut base = RunConfig::baseline(a.data.source(seed)?, a.spec.spec(seed)?, seed);
            base.budget = a.spec.budget();
            (base, Grid::default())
        }
    };
    if let Some(ms) = &a.m {
        grid.ms = ms.clone();
    }
    if let Some(ns) = &a.n {
        grid.ns = ns.clone();
    }
    let result = sweep(&base, &grid, Some(&a.out), jobs)?;
    write_json(&a.out.join("sweep.json"), &result)?;
    let rows = report(&result.manifests())?;
    fs::write(a.out.join("report.csv"), report_csv(&rows)?)
        .map_err(|e| Error::io(a.out.join("report.csv"), e))?;
    print!("{}", report_table(&rows));
    let failed: Vec<_> = std::iter::once(&result.baseline)
        .chain(&result.cells)
        .filter_map(|c| c.error.as_ref().map(|e| format!("{}: {e}", c.label)))
        .collect();
    for f in &failed {
        eprintln!("failed cell {f}");
    }
    Ok(failed.is_empty())
}

fn find_manifests(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(path, err)))
            .collect::<Result<_>>()?;
        entries.sort();
        for e in entries {
            if e.is_dir() {
                find_manifests(&e, out)?;
            } else if e.file_name().is_some_and(|n| n == "manifest.json") {
                out.push(e);
            }
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let mut paths = Vec::new();
    for p in &a.manifests {
        find_manifests(p, &mut paths)?;
    }
    let manifests = paths
        .iter()
        .map(|p| read_manifest(p))
        .collect::<Result<Vec<_>>>()?;
    let rows = report(&manifests)?;
    print!("{}", report_table(&rows));
    if let Some(path) = &a.csv {
        fs::write(path, report_csv(&rows)?).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Returns whether the two functions agreed on every trial.
fn cmd_check_equivalence(a: &EquivArgs) -> Result<bool> {
    let parse = |p: &Path| -> Result<_> {
        let code = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        Ok(parse_function(&code)?)
    };
    let (l, r) = (parse(&a.left)?, parse(&a.right)?);
    match equivalent_with_budget(&l, &r, a.trials, a.seed.seed, a.budget)? {
        Verdict::Equivalent { trials } => {
            println!("equivalent on {trials} trials");
            Ok(true)
        }
        Verdict::Diverged {
            witness,
            left,
            right,
        } => {
            println!("diverged on inputs {witness:?}");
            println!("left:  {:?} {:?}", left.outcome, left.events);
            println!("right: {:?} {:?}", right.outcome, right.events);
            Ok(false)
        }
    }
}

fn cmd_serve(a: &ServeArgs) -> Result<()> {
    let opts = ServeOptions {
        snapshot: !a.no_snapshot,
    };
    serve(
        &ClassifierSpec::reference(a.seed.seed),
        opts,
        io::stdin().lock(),
        io::stdout().lock(),
    )
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(a)?,
        Command::Metrics(a) => cmd_metrics(a)?,
        Command::Score(a) => cmd_score(a)?,
        Command::Plan(a) => cmd_plan(a)?,
        Command::Augment(a) => cmd_augment(a)?,
        Command::Train(a) => cmd_train(a)?,
        Command::Evaluate(a) => cmd_evaluate(a)?,
        Command::Sweep(a) => {
            if !cmd_sweep(a, jobs)? {
                return Ok(ExitCode::from(EXIT_RUNTIME));
            }
        }
        Command::Report(a) => cmd_report(a)?,
        Command::CheckEquivalence(a) => {
            if !cmd_check_equivalence(a)? {
                return Ok(ExitCode::from(EXIT_DIVERGED));
            }
        }
        Command::ServeReference(a) => cmd_serve(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => EXIT_CONFIG,
                ErrorClass::Data => EXIT_DATA,
                ErrorClass::Runtime => EXIT_RUNTIME,
            })
        }
    }
}
