//! Classifier contract shared by the trainers and difficulty scoring, a
//! built-in hashed bag-of-tokens logistic regression, and a line-delimited
//! JSON bridge to classifiers living in another process.

mod bridge;
mod reference;

use serde::{Deserialize, Serialize};

pub use bridge::{serve, ExternalClassifier, ServeOptions};
pub use reference::{
    featurize, logistic_objective, Objective, ReferenceClassifier, ReferenceParams, ReferenceState,
    SparseVec,
};

use crate::corpus::{Dataset, FunctionSample};
use crate::error::Result;

/// Decision threshold: strictly greater means vulnerable.
pub const THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub kind: ModelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelKind {
    Reference(ReferenceParams),
    External {
        /// Program and arguments.
        command: Vec<String>,
    },
}

impl ClassifierSpec {
    pub fn reference(seed: u64) -> Self {
        ClassifierSpec {
            seed,
            kind: ModelKind::Reference(ReferenceParams::default()),
        }
    }

    pub fn external(seed: u64, command: Vec<String>) -> Self {
        ClassifierSpec {
            seed,
            kind: ModelKind::External { command },
        }
    }

    /// Same model, different shuffle seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        ClassifierSpec {
            seed,
            kind: self.kind.clone(),
        }
    }
}

/// Stop when the epoch loss fails to improve on the previous epoch by more
/// than `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePolicy {
    pub epsilon: f64,
}

impl Default for ConvergencePolicy {
    fn default() -> Self {
        ConvergencePolicy { epsilon: 1e-4 }
    }
}

impl ConvergencePolicy {
    /// Whether the last recorded epoch counts as converged.
    pub fn converged(&self, losses: &[f64]) -> bool {
        match losses {
            [.., prev, last] => *last >= *prev - self.epsilon,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss after each epoch.
    pub epoch_losses: Vec<f64>,
    pub epochs_run: usize,
    pub converged: bool,
}

impl TrainReport {
    pub fn empty() -> Self {
        TrainReport {
            epoch_losses: Vec::new(),
            epochs_run: 0,
            converged: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    pub predicted_label: u8,
}

impl Prediction {
    pub fn from_probability(p: f64) -> Self {
        Prediction {
            probability: p,
            predicted_label: u8::from(p > THRESHOLD),
        }
    }
}

/// Serialized classifier state; see [`restore`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelState {
    Reference(ReferenceState),
    External { spec: ClassifierSpec, state: String },
}

pub trait Classifier: Send {
    fn spec(&self) -> &ClassifierSpec;

    /// Trains until `max_epochs` or until `policy` reports convergence.
    fn train(
        &mut self,
        data: &Dataset,
        max_epochs: usize,
        policy: &ConvergencePolicy,
    ) -> Result<TrainReport>;

    /// Continues from the current state for exactly `epochs` epochs.
    fn fine_tune(&mut self, data: &Dataset, epochs: usize) -> Result<TrainReport>;

    fn predict(&mut self, sample: &FunctionSample) -> Result<Prediction>;

    fn predict_all(&mut self, samples: &[FunctionSample]) -> Result<Vec<Prediction>> {
        samples.iter().map(|s| self.predict(s)).collect()
    }

    fn snapshot(&mut self) -> Result<ModelState>;
}

pub fn new_classifier(spec: &ClassifierSpec) -> Result<Box<dyn Classifier>> {
    match &spec.kind {
        ModelKind::Reference(_) => Ok(Box::new(ReferenceClassifier::new(spec.clone())?)),
        ModelKind::External { .. } => Ok(Box::new(ExternalClassifier::launch(spec.clone())?)),
    }
}

pub fn restore(state: &ModelState) -> Result<Box<dyn Classifier>> {
    match state {
        ModelState::Reference(s) => Ok(Box::new(ReferenceClassifier::from_state(s.clone())?)),
        ModelState::External { spec, state } => {
            let mut c = ExternalClassifier::launch(spec.clone())?;
            c.restore(state)?;
            Ok(Box::new(c))
        }
    }
}

/// Mean binary cross-entropy of the classifier on `data`.
pub fn mean_log_loss(c: &mut dyn Classifier, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let preds = c.predict_all(&data.samples)?;
    let total: f64 = preds
        .iter()
        .zip(&data.samples)
        .map(|(p, s)| {
            let q = p.probability.clamp(1e-12, 1.0 - 1e-12);
            if s.is_vulnerable() {
                -q.ln()
            } else {
                -(1.0 - q).ln()
            }
        })
        .sum();
    Ok(total / data.len() as f64)
}
