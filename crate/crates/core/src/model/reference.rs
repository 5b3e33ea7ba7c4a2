use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    Classifier, ClassifierSpec, ConvergencePolicy, ModelKind, ModelState, Prediction, TrainReport,
};
use crate::corpus::{Dataset, FunctionSample};
use crate::cparse::{lex, TokenKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceParams {
    pub feature_dim: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for ReferenceParams {
    fn default() -> Self {
        ReferenceParams {
            feature_dim: 32768,
            learning_rate: 0.1,
            l2: 1e-4,
        }
    }
}

/// Sorted `(index, value)` pairs with unique indices.
pub type SparseVec = Vec<(usize, f64)>;

fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Hashed bag of identifier, keyword and operator tokens, L2-normalized.
/// Code that does not lex falls back to whitespace-separated words.
pub fn featurize(code: &str, dim: usize) -> SparseVec {
    let words: Vec<String> = match lex(code) {
        Ok(tokens) => tokens
            .into_iter()
            .filter(|t| {
                matches!(
                    t.kind,
                    TokenKind::Identifier | TokenKind::Keyword | TokenKind::Operator
                )
            })
            .map(|t| t.text)
            .collect(),
        Err(_) => code.split_whitespace().map(str::to_string).collect(),
    };
    let mut counts = std::collections::BTreeMap::new();
    for w in &words {
        *counts
            .entry((fnv1a(w) % dim as u64) as usize)
            .or_insert(0.0) += 1.0;
    }
    let norm = counts.values().map(|c: &f64| c * c).sum::<f64>().sqrt();
    counts.into_iter().map(|(i, c)| (i, c / norm)).collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-log p(y | z)` computed without overflow.
fn log_loss(z: f64, y: f64) -> f64 {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus - y * z
}

/// Full-batch regularized objective and its analytic gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub loss: f64,
    pub grad_weights: Vec<f64>,
    pub grad_bias: f64,
}

/// `mean(logloss(w.x + b, y)) + l2/2 |w|^2`, the quantity SGD descends.
pub fn logistic_objective(
    weights: &[f64],
    bias: f64,
    features: &[SparseVec],
    labels: &[u8],
    l2: f64,
) -> Objective {
    let n = features.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad_weights: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut grad_bias = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let y = f64::from(y);
        let z = x.iter().map(|&(i, v)| weights[i] * v).sum::<f64>() + bias;
        loss += log_loss(z, y) / n;
        let g = (sigmoid(z) - y) / n;
        for &(i, v) in x {
            grad_weights[i] += g * v;
        }
        grad_bias += g;
    }
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    Objective {
        loss,
        grad_weights,
        grad_bias,
    }
}

/// Serialized form of a [`ReferenceClassifier`]. Weights are stored
/// unscaled together with the lazy decay factor so a restored model
/// reproduces predictions bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceState {
    pub spec: ClassifierSpec,
    pub weights: Vec<(usize, f64)>,
    pub scale: f64,
    pub bias: f64,
    pub epochs_seen: u64,
}

/// Logistic regression over hashed token counts, trained by plain SGD
/// with L2 decay applied lazily through a shared scale factor.
#[derive(Debug, Clone)]
pub struct ReferenceClassifier {
    spec: ClassifierSpec,
    params: ReferenceParams,
    weights: Vec<f64>,
    scale: f64,
    bias: f64,
    epochs_seen: u64,
}

impl ReferenceClassifier {
    pub fn new(spec: ClassifierSpec) -> Result<Self> {
        let ModelKind::Reference(params) = &spec.kind else {
            return Err(Error::Config("not a reference classifier spec".into()));
        };
        if params.feature_dim == 0
            || params.learning_rate.is_nan()
            || params.learning_rate <= 0.0
            || params.l2.is_nan()
            || params.l2 < 0.0
        {
            return Err(Error::Config(format!(
                "reference classifier needs feature_dim > 0, learning_rate > 0, l2 >= 0 (got {params:?})"
            )));
        }
        if params.learning_rate * params.l2 >= 1.0 {
            return Err(Error::Config("learning_rate * l2 must be below 1".into()));
        }
        Ok(ReferenceClassifier {
            params: params.clone(),
            weights: vec![0.0; params.feature_dim],
            spec,
            scale: 1.0,
            bias: 0.0,
            epochs_seen: 0,
        })
    }

    pub fn from_state(state: ReferenceState) -> Result<Self> {
        let mut c = ReferenceClassifier::new(state.spec)?;
        for (i, w) in state.weights {
            *c.weights
                .get_mut(i)
                .ok_or_else(|| Error::Manifest(format!("weight index {i} out of range")))? = w;
        }
        c.scale = state.scale;
        c.bias = state.bias;
        c.epochs_seen = state.epochs_seen;
        Ok(c)
    }

    pub fn state(&self) -> ReferenceState {
        ReferenceState {
            spec: self.spec.clone(),
            weights: self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| (i, *w))
                .collect(),
            scale: self.scale,
            bias: self.bias,
            epochs_seen: self.epochs_seen,
        }
    }

    /// Effective weight vector.
    pub fn weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w * self.scale).collect()
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn params(&self) -> &ReferenceParams {
        &self.params
    }

    pub fn featurize(&self, code: &str) -> SparseVec {
        featurize(code, self.params.feature_dim)
    }

    fn logit(&self, x: &SparseVec) -> f64 {
        self.scale * x.iter().map(|&(i, v)| self.weights[i] * v).sum::<f64>() + self.bias
    }

    fn sgd_step(&mut self, x: &SparseVec, y: f64) {
        let lr = self.params.learning_rate;
        let g = sigmoid(self.logit(x)) - y;
        self.scale *= 1.0 - lr * self.params.l2;
        if self.scale < 1e-9 {
            for w in &mut self.weights {
                *w *= self.scale;
            }
            self.scale = 1.0;
        }
        for &(i, v) in x {
            self.weights[i] -= lr * g * v / self.scale;
        }
        self.bias -= lr * g;
    }

    fn mean_loss(&self, xs: &[(SparseVec, f64)]) -> f64 {
        xs.iter()
            .map(|(x, y)| log_loss(self.logit(x), *y))
            .sum::<f64>()
            / xs.len() as f64
    }

    /// Runs one shuffled SGD pass and returns the post-epoch training loss.
    fn epoch(&mut self, xs: &[(SparseVec, f64)]) -> f64 {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.spec.seed ^ self.epochs_seen.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        );
        order.shuffle(&mut rng);
        for i in order {
            self.sgd_step(&xs[i].0, xs[i].1);
        }
        self.epochs_seen += 1;
        self.mean_loss(xs)
    }

    fn encode(&self, data: &Dataset) -> Vec<(SparseVec, f64)> {
        data.iter()
            .map(|s| (self.featurize(&s.code), f64::from(s.label)))
            .collect()
    }
}

impl Classifier for ReferenceClassifier {
    fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    fn train(
        &mut self,
        data: &Dataset,
        max_epochs: usize,
        policy: &ConvergencePolicy,
    ) -> Result<TrainReport> {
        if data.is_empty() {
            return Err(Error::EmptyData {
                context: data.name.clone(),
            });
        }
        if !data.has_both_classes() {
            return Err(Error::SingleClass {
                context: data.name.clone(),
            });
        }
        if max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        let xs = self.encode(data);
        let mut report = TrainReport::empty();
        for _ in 0..max_epochs {
            report.epoch_losses.push(self.epoch(&xs));
            report.epochs_run += 1;
            if policy.converged(&report.epoch_losses) {
                report.converged = true;
                break;
            }
        }
        Ok(report)
    }

    fn fine_tune(&mut self, data: &Dataset, epochs: usize) -> Result<TrainReport> {
        let mut report = TrainReport::empty();
        if data.is_empty() || epochs == 0 {
            return Ok(report);
        }
        let xs = self.encode(data);
        for _ in 0..epochs {
            report.epoch_losses.push(self.epoch(&xs));
            report.epochs_run += 1;
        }
        Ok(report)
    }

    fn predict(&mut self, sample: &FunctionSample) -> Result<Prediction> {
        Ok(Prediction::from_probability(sigmoid(
            self.logit(&self.featurize(&sample.code)),
        )))
    }

    fn snapshot(&mut self) -> Result<ModelState> {
        Ok(ModelState::Reference(self.state()))
    }
}
