//! Linear classifier training: multinomial logistic regression by accelerated
//! full-batch gradient descent, and one-vs-rest linear SVM by subgradient
//! descent on the hinge loss. Both are deterministic for a given seed and
//! independent of input sample order.

use std::cmp::Ordering;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{softmax, FeatureVector, LinearModel, ModelKind};
use crate::proto::LabelSet;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("sample {index} has {actual} features, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, actual: usize },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: FeatureVector,
    pub label: usize,
}

impl Sample {
    pub fn new(features: impl Into<FeatureVector>, label: usize) -> Self {
        Self {
            features: features.into(),
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// L2 penalty on weights (biases are not penalized).
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    /// `None` trains full-batch; otherwise seeded shuffled mini-batches.
    pub batch_size: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 300,
            seed: 0,
            batch_size: None,
        }
    }
}

/// Mean cross-entropy plus `lambda/2 |W|^2`, and its gradient, for a weight
/// matrix laid out like [`LinearModel::weights`].
pub fn logistic_loss_and_grad(weights: &[f64], rows: usize, dim: usize, data: &[Sample], lambda: f64) -> (f64, Vec<f64>) {
    let cols = dim + 1;
    let mut grad = vec![0.0; weights.len()];
    let mut loss = 0.0;
    let n = data.len() as f64;
    let mut scores = vec![0.0; rows];
    for s in data {
        let x = s.features.as_slice();
        for (r, sc) in scores.iter_mut().enumerate() {
            let row = &weights[r * cols..(r + 1) * cols];
            *sc = row[..dim].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + row[dim];
        }
        let p = softmax(&scores);
        loss -= p[s.label].max(f64::MIN_POSITIVE).ln();
        for r in 0..rows {
            let g = (p[r] - if r == s.label { 1.0 } else { 0.0 }) / n;
            let grow = &mut grad[r * cols..(r + 1) * cols];
            for (gw, v) in grow[..dim].iter_mut().zip(x) {
                *gw += g * v;
            }
            grow[dim] += g;
        }
    }
    loss /= n;
    for r in 0..rows {
        for c in 0..dim {
            let i = r * cols + c;
            loss += 0.5 * lambda * weights[i] * weights[i];
            grad[i] += lambda * weights[i];
        }
    }
    (loss, grad)
}

fn canonical_order(a: &Sample, b: &Sample) -> Ordering {
    a.label.cmp(&b.label).then_with(|| {
        a.features
            .as_slice()
            .iter()
            .zip(b.features.as_slice())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

fn max_sq_norm(data: &[Sample]) -> f64 {
    data.iter()
        .map(|s| s.features.as_slice().iter().map(|v| v * v).sum::<f64>() + 1.0)
        .fold(0.0, f64::max)
}

pub fn train(kind: ModelKind, labels: &LabelSet, data: &[Sample], cfg: &TrainConfig) -> Result<LinearModel, TrainError> {
    let dim = data
        .first()
        .map(|s| s.features.len())
        .ok_or_else(|| TrainError::DegenerateDataset("no samples".into()))?;
    let mut counts = vec![0usize; labels.len()];
    for (i, s) in data.iter().enumerate() {
        if s.features.len() != dim {
            return Err(TrainError::DimensionMismatch {
                index: i,
                expected: dim,
                actual: s.features.len(),
            });
        }
        if s.label >= labels.len() {
            return Err(TrainError::UnknownLabel(s.label.to_string()));
        }
        counts[s.label] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(TrainError::DegenerateDataset(format!("{present} class(es) present, need 2")));
    }

    let mut sorted = data.to_vec();
    sorted.sort_by(canonical_order);

    let weights = match kind {
        ModelKind::LogisticRegression => fit_logistic(labels.len(), dim, &sorted, cfg),
        ModelKind::SvmLinear => fit_svm(labels.len(), dim, &sorted, cfg),
    };
    LinearModel::new(kind, labels.clone(), dim, weights).map_err(|e| TrainError::DegenerateDataset(e.to_string()))
}

fn batches(n: usize, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    match cfg.batch_size {
        None => vec![idx],
        Some(b) => {
            idx.shuffle(rng);
            idx.chunks(b.max(1)).map(<[usize]>::to_vec).collect()
        }
    }
}

fn fit_logistic(rows: usize, dim: usize, data: &[Sample], cfg: &TrainConfig) -> Vec<f64> {
    let step = 1.0 / (0.5 * max_sq_norm(data) + cfg.lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = vec![0.0; rows * (dim + 1)];
    let mut prev = w.clone();
    let mut t = 1.0f64;
    for _ in 0..cfg.epochs {
        for batch in batches(data.len(), cfg, &mut rng) {
            let subset: Vec<Sample> = batch.iter().map(|&i| data[i].clone()).collect();
            // Nesterov look-ahead point
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let beta = (t - 1.0) / t_next;
            let look: Vec<f64> = w.iter().zip(&prev).map(|(a, b)| a + beta * (a - b)).collect();
            let (_, g) = logistic_loss_and_grad(&look, rows, dim, &subset, cfg.lambda);
            prev = std::mem::replace(&mut w, look.iter().zip(&g).map(|(x, gx)| x - step * gx).collect());
            t = t_next;
        }
    }
    w
}

fn fit_svm(rows: usize, dim: usize, data: &[Sample], cfg: &TrainConfig) -> Vec<f64> {
    let cols = dim + 1;
    let eta0 = 1.0 / max_sq_norm(data);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let schedule = (0..cfg.epochs)
        .map(|_| batches(data.len(), cfg, &mut rng))
        .collect::<Vec<_>>();
    let mut out = vec![0.0; rows * cols];
    let objective = |w: &[f64], class: usize| {
        let hinge: f64 = data
            .iter()
            .map(|s| {
                let y = if s.label == class { 1.0 } else { -1.0 };
                let m = w[..dim].iter().zip(s.features.as_slice()).map(|(a, b)| a * b).sum::<f64>() + w[dim];
                (1.0 - y * m).max(0.0)
            })
            .sum::<f64>()
            / data.len() as f64;
        hinge + 0.5 * cfg.lambda * w[..dim].iter().map(|v| v * v).sum::<f64>()
    };
    for class in 0..rows {
        let mut w = vec![0.0; cols];
        let mut best = (objective(&w, class), w.clone());
        let mut t = 0usize;
        for epoch in &schedule {
            for batch in epoch {
                t += 1;
                let eta = eta0 / (t as f64).sqrt();
                let mut g = vec![0.0; cols];
                for &i in batch {
                    let s = &data[i];
                    let y = if s.label == class { 1.0 } else { -1.0 };
                    let x = s.features.as_slice();
                    let m = w[..dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[dim];
                    if y * m < 1.0 {
                        for (gc, v) in g[..dim].iter_mut().zip(x) {
                            *gc -= y * v;
                        }
                        g[dim] -= y;
                    }
                }
                let n = batch.len() as f64;
                for c in 0..cols {
                    let reg = if c < dim { cfg.lambda * w[c] } else { 0.0 };
                    w[c] -= eta * (g[c] / n + reg);
                }
            }
            let obj = objective(&w, class);
            if obj < best.0 {
                best = (obj, w.clone());
            }
        }
        out[class * cols..(class + 1) * cols].copy_from_slice(&best.1);
    }
    out
}

#[derive(Serialize, Deserialize)]
struct DatasetLine {
    label: String,
    features: Vec<f64>,
}

/// Reads a JSON Lines dataset of `{"label": name, "features": [..]}`.
pub fn load_dataset(path: impl AsRef<Path>, labels: &LabelSet) -> Result<Vec<Sample>, TrainError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetLine = serde_json::from_str(&line).map_err(|source| TrainError::Json { line: i + 1, source })?;
        let label = labels.index_of(&rec.label).ok_or(TrainError::UnknownLabel(rec.label))?;
        out.push(Sample::new(rec.features, label));
    }
    Ok(out)
}

pub fn save_dataset(path: impl AsRef<Path>, labels: &LabelSet, data: &[Sample]) -> Result<(), TrainError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in data {
        let rec = DatasetLine {
            label: labels.name(s.label).ok_or_else(|| TrainError::UnknownLabel(s.label.to_string()))?.to_string(),
            features: s.features.as_slice().to_vec(),
        };
        serde_json::to_writer(&mut w, &rec).map_err(|source| TrainError::Json { line: 0, source })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
