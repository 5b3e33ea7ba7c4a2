//! Run configurations, the sweep grid and result tables.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::AugmentOptions;
use crate::corpus::{ingest_jsonl, split, Dataset, SplitSpec};
use crate::curriculum::{
    evaluate, plan, run_baseline, run_curriculum, CurriculumConfig, MetricsReport, RunKind,
    RunManifest,
};
use crate::difficulty::{score_dataset, ScoringConfig, Strategy, TrainBudget};
use crate::error::{Error, Result};
use crate::model::{Classifier, ClassifierSpec};
use crate::synthetic::{generate, SyntheticConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Jsonl { path: PathBuf },
    Synthetic(SyntheticConfig),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Jsonl { path } => ingest_jsonl(path),
            DataSource::Synthetic(cfg) => generate(cfg),
        }
    }
}

fn default_fine_tune_epochs() -> usize {
    2
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitSpec,
    /// `None` runs the random-order baseline.
    #[serde(default)]
    pub strategy: Option<Strategy>,
    #[serde(default, rename = "M")]
    pub m: Option<usize>,
    #[serde(default, rename = "N")]
    pub n: Option<usize>,
    #[serde(default)]
    pub augment: bool,
    pub spec: ClassifierSpec,
    /// Seed for the submodel partition.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budget: TrainBudget,
    #[serde(default = "default_fine_tune_epochs")]
    pub fine_tune_epochs: usize,
    #[serde(default)]
    pub include_originals: bool,
    #[serde(default)]
    pub augment_options: AugmentOptions,
}

impl RunConfig {
    pub fn baseline(data: DataSource, spec: ClassifierSpec, seed: u64) -> Self {
        RunConfig {
            data,
            split: SplitSpec::with_seed(seed),
            strategy: None,
            m: None,
            n: None,
            augment: false,
            spec,
            seed,
            budget: TrainBudget::default(),
            fine_tune_epochs: default_fine_tune_epochs(),
            include_originals: false,
            augment_options: AugmentOptions::default(),
        }
    }

    pub fn curriculum(
        &self,
        strategy: Strategy,
        m: Option<usize>,
        n: usize,
        augment: bool,
    ) -> Self {
        RunConfig {
            strategy: Some(strategy),
            m,
            n: Some(n),
            augment,
            ..self.clone()
        }
    }

    pub fn as_baseline(&self) -> Self {
        RunConfig {
            strategy: None,
            m: None,
            n: None,
            augment: false,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        match (self.strategy, self.m, self.n) {
            (None, None, None) if !self.augment => {}
            (None, ..) => return bad("the baseline takes no M, N or augment"),
            (Some(_), _, None) => return bad("curriculum runs require N"),
            (Some(_), _, Some(n)) if n < 2 => return bad("N must be at least 2"),
            (Some(Strategy::Code), Some(_), _) => return bad("the code strategy forbids M"),
            (Some(Strategy::Model), None, _) => return bad("the model strategy requires M"),
            (Some(Strategy::Model), Some(m), _) if m < 2 => return bad("M must be at least 2"),
            _ => {}
        }
        if self.budget.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match (self.strategy, self.m, self.n) {
            (None, ..) => "baseline".to_string(),
            (Some(Strategy::Code), _, Some(n)) => {
                format!("code N={n} aug={}", u8::from(self.augment))
            }
            (Some(s), m, n) => format!(
                "{s} M={} N={} aug={}",
                m.map_or("-".into(), |m| m.to_string()),
                n.map_or("-".into(), |n| n.to_string()),
                u8::from(self.augment)
            ),
        }
    }

    /// Short content hash of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn training(&self) -> CurriculumConfig {
        CurriculumConfig {
            spec: self.spec.clone(),
            budget: self.budget,
            augment: self.augment,
            fine_tune_epochs: self.fine_tune_epochs,
            include_originals: self.include_originals,
            augment_options: self.augment_options,
        }
    }
}

/// Runs `cfg` on an already loaded dataset.
pub fn run_on(cfg: &RunConfig, data: &Dataset) -> Result<(Box<dyn Classifier>, RunManifest)> {
    cfg.validate()?;
    let (train, valid, test) = split(data, &cfg.split)?;
    let training = cfg.training();
    let (mut c, mut manifest) = match (cfg.strategy, cfg.n) {
        (Some(strategy), Some(n)) => {
            let scoring = ScoringConfig {
                strategy,
                m: cfg.m,
                spec: cfg.spec.clone(),
                seed: cfg.seed,
                budget: cfg.budget,
            };
            let scores = score_dataset(&train, &scoring)?;
            let p = plan(&scores, n)?;
            run_curriculum(&p, &train, &valid, &training)?
        }
        _ => run_baseline(&train, &valid, &training)?,
    };
    manifest.evaluation = Some(evaluate(c.as_mut(), &test)?);
    manifest.config = Some(cfg.clone());
    Ok((c, manifest))
}

pub fn run_experiment(cfg: &RunConfig) -> Result<(Box<dyn Classifier>, RunManifest)> {
    cfg.validate()?;
    run_on(cfg, &cfg.data.load()?)
}

/// Re-runs a manifest's configuration and checks that every recorded
/// number comes out the same.
pub fn replay(manifest: &RunManifest) -> Result<RunManifest> {
    let cfg = manifest
        .config
        .as_ref()
        .ok_or_else(|| Error::Manifest("manifest has no run configuration".into()))?;
    let (_, again) = run_experiment(cfg)?;
    if serde_json::to_value(&again).ok() != serde_json::to_value(manifest).ok() {
        return Err(Error::Manifest(format!(
            "replay of {} diverged from the recorded run",
            cfg.label()
        )));
    }
    Ok(again)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    #[serde(rename = "M")]
    pub ms: Vec<usize>,
    #[serde(rename = "N")]
    pub ns: Vec<usize>,
    pub strategies: Vec<Strategy>,
    pub augment: Vec<bool>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            ms: vec![3, 5, 10],
            ns: vec![3, 5, 10],
            strategies: vec![Strategy::Model, Strategy::Code],
            augment: vec![false, true],
        }
    }
}

impl Grid {
    /// Curriculum cells, baseline excluded: model cells over M x N, code
    /// cells over N, each with every augment setting.
    pub fn cells(&self, base: &RunConfig) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for &strategy in &self.strategies {
            let ms: Vec<Option<usize>> = match strategy {
                Strategy::Model => self.ms.iter().copied().map(Some).collect(),
                Strategy::Code => vec![None],
            };
            for &m in &ms {
                for &n in &self.ns {
                    for &aug in &self.augment {
                        out.push(base.curriculum(strategy, m, n, aug));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub label: String,
    pub config: RunConfig,
    pub run_dir: Option<PathBuf>,
    pub manifest: Option<RunManifest>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub baseline: CellResult,
    pub cells: Vec<CellResult>,
}

impl SweepReport {
    pub fn manifests(&self) -> Vec<RunManifest> {
        std::iter::once(&self.baseline)
            .chain(&self.cells)
            .filter_map(|c| c.manifest.clone())
            .collect()
    }
}

fn run_cell(cfg: RunConfig, data: &Dataset, out_dir: Option<&Path>) -> CellResult {
    let label = cfg.label();
    let run_dir = out_dir.map(|d| d.join(cfg.hash()));
    let result = run_on(&cfg, data).and_then(|(_, manifest)| {
        if let Some(dir) = &run_dir {
            write_json(&dir.join("manifest.json"), &manifest)?;
        }
        Ok(manifest)
    });
    match result {
        Ok(manifest) => {
            info!("{label}: done");
            CellResult {
                label,
                config: cfg,
                run_dir,
                manifest: Some(manifest),
                error: None,
            }
        }
        Err(e) => {
            warn!("{label}: {e}");
            CellResult {
                label,
                config: cfg,
                run_dir,
                manifest: None,
                error: Some(e.to_string()),
            }
        }
    }
}

/// Runs the baseline and every grid cell, at most `jobs` at a time. A
/// failing cell is recorded and the rest continue.
pub fn sweep(
    base: &RunConfig,
    grid: &Grid,
    out_dir: Option<&Path>,
    jobs: usize,
) -> Result<SweepReport> {
    let data = base.data.load()?;
    let cells = grid.cells(base);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let (baseline, cells) = pool.install(|| {
        rayon::join(
            || run_cell(base.as_baseline(), &data, out_dir),
            || {
                cells
                    .into_par_iter()
                    .map(|c| run_cell(c, &data, out_dir))
                    .collect::<Vec<_>>()
            },
        )
    });
    Ok(SweepReport { baseline, cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub d_accuracy: f64,
    pub d_recall: f64,
    pub d_precision: f64,
    pub d_f1: f64,
    /// Mean difficulty per bucket, `;`-separated, easiest first.
    pub bucket_means: String,
}

fn row_label(m: &RunManifest) -> String {
    match &m.config {
        Some(c) => c.label(),
        None => match m.kind {
            RunKind::Baseline => "baseline".to_string(),
            RunKind::Curriculum => "curriculum".to_string(),
        },
    }
}

/// One row per evaluated manifest with deltas against the first baseline
/// manifest (or the first manifest when there is none).
pub fn report(manifests: &[RunManifest]) -> Result<Vec<ReportRow>> {
    let evaluated: Vec<(&RunManifest, MetricsReport)> = manifests
        .iter()
        .map(|m| {
            m.evaluation
                .map(|e| (m, e))
                .ok_or_else(|| Error::Manifest(format!("{} has no evaluation", row_label(m))))
        })
        .collect::<Result<_>>()?;
    let reference = evaluated
        .iter()
        .find(|(m, _)| m.kind == RunKind::Baseline)
        .or(evaluated.first())
        .map(|(_, e)| *e)
        .ok_or_else(|| Error::Manifest("no manifests to report".into()))?;
    Ok(evaluated
        .iter()
        .map(|(m, e)| ReportRow {
            label: row_label(m),
            accuracy: e.accuracy,
            recall: e.recall,
            precision: e.precision,
            f1: e.f1,
            d_accuracy: e.accuracy - reference.accuracy,
            d_recall: e.recall - reference.recall,
            d_precision: e.precision - reference.precision,
            d_f1: e.f1 - reference.f1,
            bucket_means: m
                .plan
                .as_ref()
                .map(|p| {
                    p.buckets
                        .iter()
                        .map(|b| format!("{:.4}", b.mean_difficulty))
                        .collect::<Vec<_>>()
                        .join(";")
                })
                .unwrap_or_default(),
        })
        .collect())
}

pub fn report_table(rows: &[ReportRow]) -> String {
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(5);
    let mut out = format!(
        "{:<width$}  {:>8} {:>8} {:>9} {:>8}  {:>8} {:>8} {:>8} {:>8}\n",
        "run", "Accuracy", "Recall", "Precision", "F1", "dAcc", "dRec", "dPrec", "dF1"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<width$}  {:>8.3} {:>8.3} {:>9.3} {:>8.3}  {:>+8.3} {:>+8.3} {:>+8.3} {:>+8.3}\n",
            r.label,
            r.accuracy,
            r.recall,
            r.precision,
            r.f1,
            r.d_accuracy,
            r.d_recall,
            r.d_precision,
            r.d_f1
        ));
    }
    out
}

pub fn report_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Manifest(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Manifest(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| Error::Manifest(e.to_string())))
        .collect()
}
