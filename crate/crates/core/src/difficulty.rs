//! Per-sample difficulty scores.
//!
//! The model-based score splits the training set into `M` uniform subsets,
//! trains one submodel per subset, and scores each sample by how
//! confidently the submodels that never saw it get it right, weighted by
//! each submodel's self-test correct rate. Lower is easier.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{partition_uniform, Dataset, FunctionSample};
use crate::error::{Error, Result};
use crate::metrics::code_difficulty;
use crate::model::{new_classifier, Classifier, ClassifierSpec, ConvergencePolicy, THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Code,
    Model,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Code => "code",
            Strategy::Model => "model",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "code" => Ok(Strategy::Code),
            "model" => Ok(Strategy::Model),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyScore {
    #[serde(rename = "id")]
    pub sample_id: String,
    #[serde(rename = "DS")]
    pub value: f64,
    pub strategy: Strategy,
    /// Number of submodels for the model strategy.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

/// Confusion counts of a submodel tested on its own training subset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmodelStats {
    pub subset_index: usize,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl SubmodelStats {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `TP / (TP + FP)`, undefined without positive predictions.
    pub fn pos_rate(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// `TN / (TN + FN)`, undefined without negative predictions.
    pub fn neg_rate(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fn_)
    }

    /// Correct rate used to weight confidence on samples of `label`;
    /// an undefined rate weighs nothing.
    pub fn weight_for(&self, label: u8) -> f64 {
        if label == 1 {
            self.pos_rate()
        } else {
            self.neg_rate()
        }
        .unwrap_or(0.0)
    }

    pub fn record(&mut self, label: u8, predicted: u8) {
        match (label, predicted) {
            (1, 1) => self.tp += 1,
            (0, 0) => self.tn += 1,
            (0, _) => self.fp += 1,
            _ => self.fn_ += 1,
        }
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Difficulty of a sample owned by submodel `owner`, given every
/// submodel's correct-rate weight for the sample's label and its predicted
/// probability. The owner's entries are ignored.
pub fn ds_from(label: u8, owner: usize, weights: &[f64], probs: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), probs.len());
    let confidence = |p: f64| {
        if label == 1 {
            p - THRESHOLD
        } else {
            THRESHOLD - p
        }
    };
    -weights
        .iter()
        .zip(probs)
        .enumerate()
        .filter(|&(i, _)| i != owner)
        .map(|(_, (w, p))| w * confidence(*p))
        .sum::<f64>()
}

pub struct Submodel {
    pub classifier: Box<dyn Classifier>,
    pub stats: SubmodelStats,
    pub subset: Dataset,
}

/// Training budget shared by submodels and the main model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainBudget {
    pub max_epochs: usize,
    pub policy: ConvergencePolicy,
}

impl Default for TrainBudget {
    fn default() -> Self {
        TrainBudget {
            max_epochs: 10,
            policy: ConvergencePolicy::default(),
        }
    }
}

/// Seed for the `i`-th submodel, derived from the base spec seed.
pub fn submodel_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add((i as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

pub fn train_submodels(
    train: &Dataset,
    m: usize,
    spec: &ClassifierSpec,
    seed: u64,
    budget: &TrainBudget,
) -> Result<Vec<Submodel>> {
    if m < 2 {
        return Err(Error::Config(format!("M must be at least 2, got {m}")));
    }
    let subsets = partition_uniform(train, m, seed)?;
    if let Some(bad) = subsets.iter().find(|d| !d.has_both_classes()) {
        return Err(Error::SingleClass {
            context: bad.name.clone(),
        });
    }
    subsets
        .into_par_iter()
        .enumerate()
        .map(|(i, subset)| {
            let mut classifier = new_classifier(&spec.with_seed(submodel_seed(spec.seed, i)))?;
            classifier.train(&subset, budget.max_epochs, &budget.policy)?;
            let mut stats = SubmodelStats {
                subset_index: i,
                ..Default::default()
            };
            for (s, p) in subset.iter().zip(classifier.predict_all(&subset.samples)?) {
                stats.record(s.label, p.predicted_label);
            }
            Ok(Submodel {
                classifier,
                stats,
                subset,
            })
        })
        .collect()
}

/// Scores every sample of every subset against the submodels that did not
/// train on it. Output is in subset order.
pub fn model_scores(submodels: &mut [Submodel]) -> Result<Vec<DifficultyScore>> {
    let m = submodels.len();
    // probs[i][j] = predictions of submodel i on subset j
    let subsets: Vec<Dataset> = submodels.iter().map(|s| s.subset.clone()).collect();
    let probs: Vec<Vec<Vec<f64>>> = submodels
        .par_iter_mut()
        .enumerate()
        .map(|(i, sm)| {
            subsets
                .iter()
                .enumerate()
                .map(|(j, d)| {
                    if i == j {
                        Ok(vec![THRESHOLD; d.len()])
                    } else {
                        Ok(sm
                            .classifier
                            .predict_all(&d.samples)?
                            .into_iter()
                            .map(|p| p.probability)
                            .collect())
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (j, d) in subsets.iter().enumerate() {
        for (k, s) in d.iter().enumerate() {
            let weights: Vec<f64> = submodels
                .iter()
                .map(|sm| sm.stats.weight_for(s.label))
                .collect();
            let ps: Vec<f64> = (0..m).map(|i| probs[i][j][k]).collect();
            out.push(DifficultyScore {
                sample_id: s.id.clone(),
                value: ds_from(s.label, j, &weights, &ps),
                strategy: Strategy::Model,
                m: Some(m),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub strategy: Strategy,
    /// Submodel count; required for the model strategy, forbidden otherwise.
    pub m: Option<usize>,
    pub spec: ClassifierSpec,
    pub seed: u64,
    pub budget: TrainBudget,
}

impl ScoringConfig {
    pub fn code() -> Self {
        ScoringConfig {
            strategy: Strategy::Code,
            m: None,
            spec: ClassifierSpec::reference(0),
            seed: 0,
            budget: TrainBudget::default(),
        }
    }

    pub fn model(m: usize, spec: ClassifierSpec, seed: u64) -> Self {
        ScoringConfig {
            strategy: Strategy::Model,
            m: Some(m),
            spec,
            seed,
            budget: TrainBudget::default(),
        }
    }
}

/// Sorts ascending by difficulty, ties broken by sample id.
pub fn sort_scores(scores: &mut [DifficultyScore]) {
    scores.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then_with(|| a.sample_id.cmp(&b.sample_id))
    });
}

/// One score per training sample, sorted by (difficulty, id).
pub fn score_dataset(train: &Dataset, cfg: &ScoringConfig) -> Result<Vec<DifficultyScore>> {
    let mut scores = match (cfg.strategy, cfg.m) {
        (Strategy::Code, None) => train
            .samples
            .par_iter()
            .map(code_difficulty)
            .collect::<Result<Vec<_>>>()?,
        (Strategy::Code, Some(_)) => {
            return Err(Error::Config("the code strategy takes no M".into()))
        }
        (Strategy::Model, None) => {
            return Err(Error::Config("the model strategy requires M".into()))
        }
        (Strategy::Model, Some(m)) => {
            let mut subs = train_submodels(train, m, &cfg.spec, cfg.seed, &cfg.budget)?;
            model_scores(&mut subs)?
        }
    };
    sort_scores(&mut scores);
    Ok(scores)
}

/// Convenience for a single sample given explicit submodel outputs.
pub fn model_difficulty(
    sample: &FunctionSample,
    owner: usize,
    stats: &[SubmodelStats],
    probs: &[f64],
) -> DifficultyScore {
    let weights: Vec<f64> = stats.iter().map(|s| s.weight_for(sample.label)).collect();
    DifficultyScore {
        sample_id: sample.id.clone(),
        value: ds_from(sample.label, owner, &weights, probs),
        strategy: Strategy::Model,
        m: Some(stats.len()),
    }
}
