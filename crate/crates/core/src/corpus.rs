//! Labeled function corpus: JSONL ingestion, splitting and partitioning.
//!
//! All orderings derived here are deterministic given a seed. Iteration order
//! of a [`Dataset`] is its ingestion order, and every downstream tie-break
//! leans on that.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VULNERABLE: u8 = 1;
pub const NORMAL: u8 = 0;

/// One labeled source function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSample {
    pub id: String,
    pub code: String,
    /// 1 = vulnerable, 0 = normal.
    pub label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<String>,
}

impl FunctionSample {
    pub fn new(id: impl Into<String>, code: impl Into<String>, label: u8) -> Self {
        FunctionSample {
            id: id.into(),
            code: code.into(),
            label,
            project: None,
        }
    }

    pub fn is_vulnerable(&self) -> bool {
        self.label == VULNERABLE
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub samples: Vec<FunctionSample>,
}

impl Dataset {
    /// Builds a dataset, enforcing the sample invariants (unique ids,
    /// binary labels, non-blank code).
    pub fn new(name: impl Into<String>, samples: Vec<FunctionSample>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            validate_sample(s).map_err(|message| Error::Jsonl {
                line: i + 1,
                message,
            })?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId {
                    id: s.id.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Dataset {
            name: name.into(),
            samples,
        })
    }

    /// Subset in the given order. Ids must come from this dataset, so the
    /// invariants carry over.
    fn pick_indices(&self, name: String, indices: &[usize]) -> Dataset {
        Dataset {
            name,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, FunctionSample> {
        self.samples.iter()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.samples.iter().map(|s| s.id.as_str()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&FunctionSample> {
        self.samples.iter().find(|s| s.id == id)
    }

    /// (positives, negatives)
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.samples.iter().filter(|s| s.is_vulnerable()).count();
        (pos, self.samples.len() - pos)
    }

    pub fn has_both_classes(&self) -> bool {
        let (pos, neg) = self.class_counts();
        pos > 0 && neg > 0
    }

    /// Keeps the samples whose id is in `ids`, in dataset order.
    pub fn select(&self, name: impl Into<String>, ids: &HashSet<&str>) -> Dataset {
        Dataset {
            name: name.into(),
            samples: self
                .samples
                .iter()
                .filter(|s| ids.contains(s.id.as_str()))
                .cloned()
                .collect(),
        }
    }
}

fn validate_sample(s: &FunctionSample) -> std::result::Result<(), String> {
    if s.label > 1 {
        return Err(format!("label must be 0 or 1, got {}", s.label));
    }
    if s.code.trim().is_empty() {
        return Err(format!("sample {:?} has empty code", s.id));
    }
    if s.id.is_empty() {
        return Err("empty id".to_string());
    }
    Ok(())
}

#[derive(Deserialize)]
struct RawLine {
    id: Option<serde_json::Value>,
    code: Option<serde_json::Value>,
    label: Option<serde_json::Value>,
    project: Option<String>,
}

fn parse_line(line_no: usize, line: &str) -> Result<FunctionSample> {
    let bad = |message: String| Error::Jsonl {
        line: line_no,
        message,
    };
    let raw: RawLine =
        serde_json::from_str(line).map_err(|e| bad(format!("malformed JSON: {e}")))?;
    let id = match raw.id {
        Some(serde_json::Value::String(s)) => s,
        Some(_) => return Err(bad("key \"id\" must be a string".into())),
        None => return Err(bad("missing required key \"id\"".into())),
    };
    let code = match raw.code {
        Some(serde_json::Value::String(s)) => s,
        Some(_) => return Err(bad("key \"code\" must be a string".into())),
        None => return Err(bad("missing required key \"code\"".into())),
    };
    let label = match raw.label {
        Some(serde_json::Value::Number(n)) => match n.as_u64() {
            Some(v @ 0..=1) => v as u8,
            _ => return Err(bad(format!("label must be 0 or 1, got {n}"))),
        },
        Some(other) => return Err(bad(format!("label must be 0 or 1, got {other}"))),
        None => return Err(bad("missing required key \"label\"".into())),
    };
    let sample = FunctionSample {
        id,
        code,
        label,
        project: raw.project,
    };
    validate_sample(&sample).map_err(bad)?;
    Ok(sample)
}

/// Reads a JSONL dataset. Blank lines are skipped; line numbers in errors
/// are 1-based physical lines.
pub fn ingest_jsonl(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    read_jsonl(BufReader::new(file), name).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_jsonl(reader: impl BufRead, name: impl Into<String>) -> Result<Dataset> {
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let sample = parse_line(line_no, &line)?;
        if !seen.insert(sample.id.clone()) {
            return Err(Error::DuplicateId {
                id: sample.id,
                line: line_no,
            });
        }
        samples.push(sample);
    }
    Ok(Dataset {
        name: name.into(),
        samples,
    })
}

pub fn write_jsonl(dataset: &Dataset, mut out: impl Write) -> std::io::Result<()> {
    for s in &dataset.samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_jsonl(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl(dataset, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Train/validation/test proportions as integer parts (8:1:1 by default).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_parts: u32,
    pub valid_parts: u32,
    pub test_parts: u32,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub stratify: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_parts: 8,
            valid_parts: 1,
            test_parts: 1,
            seed: 0,
            stratify: true,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec {
            seed,
            ..SplitSpec::default()
        }
    }

    /// (train, valid, test) sizes for `n` samples: floor for valid and test,
    /// remainder to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let total = (self.train_parts + self.valid_parts + self.test_parts) as u128;
        let valid = (n as u128 * self.valid_parts as u128 / total) as usize;
        let test = (n as u128 * self.test_parts as u128 / total) as usize;
        (n - valid - test, valid, test)
    }

    fn validate(&self) -> Result<()> {
        if self.train_parts == 0 || self.valid_parts == 0 || self.test_parts == 0 {
            return Err(Error::Config(
                "split fractions must all be positive".to_string(),
            ));
        }
        Ok(())
    }
}

pub const MIN_SPLIT_SIZE: usize = 10;

/// Stratified ordering of `indices`: each class is shuffled on its own and
/// the two are merged so that every class sits at evenly spaced quantiles.
/// Any contiguous window then carries close to the global class ratio.
fn stratified_order(d: &Dataset, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) =
        (0..d.len()).partition(|&i| d.samples[i].is_vulnerable());
    pos.shuffle(rng);
    neg.shuffle(rng);
    let (np, nn) = (pos.len() as u128, neg.len() as u128);
    let mut out = Vec::with_capacity(d.len());
    let (mut i, mut j) = (0usize, 0usize);
    while i < pos.len() || j < neg.len() {
        let take_pos = if i == pos.len() {
            false
        } else if j == neg.len() {
            true
        } else {
            // compare quantiles (2i+1)/(2np) <= (2j+1)/(2nn)
            (2 * i as u128 + 1) * nn <= (2 * j as u128 + 1) * np
        };
        if take_pos {
            out.push(pos[i]);
            i += 1;
        } else {
            out.push(neg[j]);
            j += 1;
        }
    }
    out
}

/// Splits into (train, valid, test). Pieces are disjoint, exhaustive, and
/// preserve the dataset's original relative order within each piece.
pub fn split(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    if d.len() < MIN_SPLIT_SIZE {
        return Err(Error::TooSmall {
            needed: MIN_SPLIT_SIZE,
            have: d.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let order = if spec.stratify {
        stratified_order(d, &mut rng)
    } else {
        let mut idx: Vec<usize> = (0..d.len()).collect();
        idx.shuffle(&mut rng);
        idx
    };
    let (_, n_valid, n_test) = spec.sizes(d.len());
    let mut valid: Vec<usize> = order[..n_valid].to_vec();
    let mut test: Vec<usize> = order[n_valid..n_valid + n_test].to_vec();
    let mut train: Vec<usize> = order[n_valid + n_test..].to_vec();
    valid.sort_unstable();
    test.sort_unstable();
    train.sort_unstable();
    Ok((
        d.pick_indices(format!("{}.train", d.name), &train),
        d.pick_indices(format!("{}.valid", d.name), &valid),
        d.pick_indices(format!("{}.test", d.name), &test),
    ))
}

/// Splits into `m` subsets whose sizes differ by at most one, dealing each
/// class round-robin so per-subset class counts stay within one of the
/// stratified ideal.
pub fn partition_uniform(d: &Dataset, m: usize, seed: u64) -> Result<Vec<Dataset>> {
    if m < 2 {
        return Err(Error::Config(format!("partition needs m >= 2, got {m}")));
    }
    if d.len() < m {
        return Err(Error::TooSmall {
            needed: m,
            have: d.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) =
        (0..d.len()).partition(|&i| d.samples[i].is_vulnerable());
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (k, idx) in pos.into_iter().chain(neg).enumerate() {
        buckets[k % m].push(idx);
    }
    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(i, mut idx)| {
            idx.sort_unstable();
            d.pick_indices(format!("{}.part{}", d.name, i), &idx)
        })
        .collect())
}
