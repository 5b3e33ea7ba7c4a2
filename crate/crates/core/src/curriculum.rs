//! Bucket planning and staged easy-to-hard training.

use std::collections::{HashMap, HashSet};

use log::info;
use serde::{Deserialize, Serialize};

use crate::augment::{augment_samples, AugmentOptions};
use crate::corpus::{Dataset, FunctionSample};
use crate::difficulty::{sort_scores, DifficultyScore, Strategy, TrainBudget};
use crate::error::{Error, Result};
use crate::experiment::RunConfig;
use crate::model::{mean_log_loss, new_classifier, Classifier, ClassifierSpec, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub ids: Vec<String>,
    pub size: usize,
    pub mean_difficulty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumPlan {
    pub strategy: Strategy,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    /// Easiest first.
    pub buckets: Vec<Bucket>,
}

impl CurriculumPlan {
    pub fn n(&self) -> usize {
        self.buckets.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.buckets
            .iter()
            .flat_map(|b| b.ids.iter().map(String::as_str))
    }
}

/// Sizes of `n` near-equal contiguous slices of `len` items; earlier
/// slices take the remainder.
pub fn bucket_sizes(len: usize, n: usize) -> Vec<usize> {
    (0..n).map(|i| len / n + usize::from(i < len % n)).collect()
}

pub fn plan(scores: &[DifficultyScore], n: usize) -> Result<CurriculumPlan> {
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 buckets, got {n}")));
    }
    if scores.len() < n {
        return Err(Error::TooSmall {
            needed: n,
            have: scores.len(),
        });
    }
    let mut sorted = scores.to_vec();
    sort_scores(&mut sorted);
    let mut buckets = Vec::with_capacity(n);
    let mut rest = sorted.as_slice();
    for size in bucket_sizes(sorted.len(), n) {
        let (head, tail) = rest.split_at(size);
        rest = tail;
        buckets.push(Bucket {
            ids: head.iter().map(|s| s.sample_id.clone()).collect(),
            size,
            mean_difficulty: head.iter().map(|s| s.value).sum::<f64>() / size as f64,
        });
    }
    Ok(CurriculumPlan {
        strategy: scores[0].strategy,
        m: scores[0].m,
        buckets,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumConfig {
    pub spec: ClassifierSpec,
    pub budget: TrainBudget,
    pub augment: bool,
    pub fine_tune_epochs: usize,
    /// Fine-tune on the mispredicted originals as well as their variants.
    pub include_originals: bool,
    pub augment_options: AugmentOptions,
}

impl CurriculumConfig {
    pub fn new(spec: ClassifierSpec, augment: bool) -> Self {
        CurriculumConfig {
            spec,
            budget: TrainBudget::default(),
            augment,
            fine_tune_epochs: 2,
            include_originals: false,
            augment_options: AugmentOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// 1-based.
    pub stage: usize,
    pub train_size: usize,
    pub train: TrainReport,
    pub mispredicted: Vec<String>,
    /// Variant ids in the error book.
    pub error_book: Vec<String>,
    pub fine_tune: TrainReport,
    /// Mean log loss on the validation split after the stage; recorded
    /// for inspection only.
    pub valid_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    Baseline,
    Curriculum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: RunKind,
    /// Full configuration of the run, when driven from a [`RunConfig`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
    pub training: CurriculumConfig,
    pub plan: Option<CurriculumPlan>,
    pub stages: Vec<StageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<MetricsReport>,
}

fn stage_data(
    name: String,
    by_id: &HashMap<&str, &FunctionSample>,
    ids: &[&str],
) -> Result<Dataset> {
    let samples =
        ids.iter()
            .map(|id| {
                by_id.get(id).map(|s| (*s).clone()).ok_or_else(|| {
                    Error::Config(format!("plan id {id:?} is not in the training set"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
    Dataset::new(name, samples)
}

/// Trains one stage and, when enabled, fine-tunes on the error book.
fn run_stage(
    c: &mut dyn Classifier,
    stage: usize,
    data: &Dataset,
    valid: &Dataset,
    cfg: &CurriculumConfig,
    augment: bool,
) -> Result<StageRecord> {
    let train = c.train(data, cfg.budget.max_epochs, &cfg.budget.policy)?;
    let preds = c.predict_all(&data.samples)?;
    let wrong: Vec<&FunctionSample> = data
        .iter()
        .zip(&preds)
        .filter(|(s, p)| p.predicted_label != s.label)
        .map(|(s, _)| s)
        .collect();
    let mut error_book = Vec::new();
    let mut fine_tune = TrainReport::empty();
    if augment && !wrong.is_empty() {
        let originals: Vec<FunctionSample> = wrong.iter().map(|s| (*s).clone()).collect();
        let mut book: Vec<FunctionSample> = augment_samples(&originals, &cfg.augment_options)
            .iter()
            .map(|v| v.to_sample())
            .collect();
        error_book = book.iter().map(|s| s.id.clone()).collect();
        if cfg.include_originals {
            book.extend(originals);
        }
        if !book.is_empty() {
            let book = Dataset::new(format!("error-book-{stage}"), book)?;
            fine_tune = c.fine_tune(&book, cfg.fine_tune_epochs)?;
        }
    }
    let valid_loss = if valid.is_empty() {
        None
    } else {
        Some(mean_log_loss(c, valid)?)
    };
    info!(
        "stage {stage}: {} samples, {} epochs, {} mispredicted, {} variants",
        data.len(),
        train.epochs_run,
        wrong.len(),
        error_book.len()
    );
    Ok(StageRecord {
        stage,
        train_size: data.len(),
        train,
        mispredicted: wrong.iter().map(|s| s.id.clone()).collect(),
        error_book,
        fine_tune,
        valid_loss,
    })
}

/// Stage `k` trains the same classifier on buckets `1..=k`.
pub fn run_curriculum(
    plan: &CurriculumPlan,
    train: &Dataset,
    valid: &Dataset,
    cfg: &CurriculumConfig,
) -> Result<(Box<dyn Classifier>, RunManifest)> {
    let planned: HashSet<&str> = plan.ids().collect();
    if planned.len() != train.len() || train.iter().any(|s| !planned.contains(s.id.as_str())) {
        return Err(Error::Config(
            "curriculum plan does not cover exactly the training set".into(),
        ));
    }
    let by_id: HashMap<&str, &FunctionSample> = train.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut c = new_classifier(&cfg.spec)?;
    let mut ids: Vec<&str> = Vec::with_capacity(train.len());
    let mut stages = Vec::with_capacity(plan.n());
    for (k, bucket) in plan.buckets.iter().enumerate() {
        ids.extend(bucket.ids.iter().map(String::as_str));
        let data = stage_data(format!("stage-{}", k + 1), &by_id, &ids)?;
        stages.push(run_stage(
            c.as_mut(),
            k + 1,
            &data,
            valid,
            cfg,
            cfg.augment,
        )?);
    }
    Ok((
        c,
        RunManifest {
            kind: RunKind::Curriculum,
            config: None,
            training: cfg.clone(),
            plan: Some(plan.clone()),
            stages,
            evaluation: None,
        },
    ))
}

/// Random-order training on the whole set in one stage, no error book.
pub fn run_baseline(
    train: &Dataset,
    valid: &Dataset,
    cfg: &CurriculumConfig,
) -> Result<(Box<dyn Classifier>, RunManifest)> {
    let mut c = new_classifier(&cfg.spec)?;
    let stage = run_stage(c.as_mut(), 1, train, valid, cfg, false)?;
    let mut training = cfg.clone();
    training.augment = false;
    Ok((
        c,
        RunManifest {
            kind: RunKind::Baseline,
            config: None,
            training,
            plan: None,
            stages: vec![stage],
            evaluation: None,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    /// Set when the named ratio had a zero denominator and was reported as 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

impl MetricsReport {
    pub fn from_counts(tp: usize, tn: usize, fp: usize, fn_: usize) -> Self {
        let div = |a: f64, b: f64| if b > 0.0 { (a / b, false) } else { (0.0, true) };
        let total = (tp + tn + fp + fn_) as f64;
        let (accuracy, _) = div((tp + tn) as f64, total);
        let (precision, precision_undefined) = div(tp as f64, (tp + fp) as f64);
        let (recall, recall_undefined) = div(tp as f64, (tp + fn_) as f64);
        let (f1, f1_undefined) = div(2.0 * precision * recall, precision + recall);
        MetricsReport {
            tp,
            tn,
            fp,
            fn_,
            accuracy,
            recall,
            precision,
            f1,
            precision_undefined,
            recall_undefined,
            f1_undefined,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn evaluate(c: &mut dyn Classifier, test: &Dataset) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::EmptyData {
            context: test.name.clone(),
        });
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (s, p) in test.iter().zip(c.predict_all(&test.samples)?) {
        match (s.label, p.predicted_label) {
            (1, 1) => tp += 1,
            (0, 0) => tn += 1,
            (0, _) => fp += 1,
            _ => fn_ += 1,
        }
    }
    Ok(MetricsReport::from_counts(tp, tn, fp, fn_))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(values: &[f64]) -> Vec<DifficultyScore> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| DifficultyScore {
                sample_id: format!("s{i:02}"),
                value: *v,
                strategy: Strategy::Code,
                m: None,
            })
            .collect()
    }

    #[test]
    fn slicing_rule() {
        let p = plan(&scores(&[10., 9., 8., 7., 6., 5., 4., 3., 2., 1.]), 5).unwrap();
        let first: Vec<_> = p.buckets.iter().map(|b| b.ids.clone()).collect();
        assert_eq!(first[0], ["s09", "s08"]);
        assert_eq!(first[4], ["s01", "s00"]);
        let sizes: Vec<_> = plan(&scores(&[0.0; 10]), 3)
            .unwrap()
            .buckets
            .iter()
            .map(|b| b.size)
            .collect();
        assert_eq!(sizes, [4, 3, 3]);
    }

    #[test]
    fn equal_scores_follow_ids() {
        let p = plan(&scores(&[1.0; 4]), 2).unwrap();
        assert_eq!(p.buckets[0].ids, ["s00", "s01"]);
    }

    #[test]
    fn plan_errors() {
        assert!(plan(&scores(&[1.0; 4]), 1).is_err());
        assert!(plan(&scores(&[1.0; 2]), 3).is_err());
    }

    #[test]
    fn metric_formulas() {
        let m = MetricsReport::from_counts(800, 0, 300, 0);
        assert!((m.precision - 0.727).abs() < 5e-4);
        let perfect = MetricsReport::from_counts(3, 4, 0, 0);
        assert_eq!(
            (
                perfect.accuracy,
                perfect.recall,
                perfect.precision,
                perfect.f1
            ),
            (1.0, 1.0, 1.0, 1.0)
        );
        let none = MetricsReport::from_counts(0, 5, 0, 0);
        assert!(none.precision_undefined && none.recall_undefined && none.f1_undefined);
        assert_eq!(none.f1, 0.0);
    }
}
