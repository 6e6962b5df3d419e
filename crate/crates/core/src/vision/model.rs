use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FeatureVector, HogParams, NeutralState, VisionError};
use crate::geom::Rect;
use crate::proto::LabelSet;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SvmLinear,
    LogisticRegression,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model format version {0}")]
    Version(u32),
    #[error("malformed model: {0}")]
    Malformed(String),
}

/// One weight row per label; the last column of each row is the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub kind: ModelKind,
    pub label_set: LabelSet,
    /// HOG geometry the model was trained on; absent for plain feature-space models.
    pub geometry: Option<HogParams>,
    dimension: usize,
    weights: Vec<f64>,
    /// Population neutral descriptor used to seed runtime neutral estimation.
    pub neutral_prior: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    kind: ModelKind,
    #[serde(default)]
    geometry: Option<HogParams>,
    label_set: LabelSet,
    weights: WeightMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    neutral_prior: Option<Vec<f64>>,
}

impl LinearModel {
    pub fn new(kind: ModelKind, label_set: LabelSet, dimension: usize, weights: Vec<f64>) -> Result<Self, ModelError> {
        let m = Self {
            kind,
            label_set,
            geometry: None,
            dimension,
            weights,
            neutral_prior: None,
        };
        m.check()?;
        Ok(m)
    }

    pub fn zeros(kind: ModelKind, label_set: LabelSet, dimension: usize) -> Self {
        let n = label_set.len() * (dimension + 1);
        Self::new(kind, label_set, dimension, vec![0.0; n]).expect("consistent shape")
    }

    pub fn with_geometry(mut self, geometry: HogParams) -> Self {
        self.geometry = Some(geometry);
        self
    }

    fn check(&self) -> Result<(), ModelError> {
        if self.weights.len() != self.label_set.len() * (self.dimension + 1) {
            return Err(ModelError::Malformed(format!(
                "{} weights for {} labels x {} columns",
                self.weights.len(),
                self.label_set.len(),
                self.dimension + 1
            )));
        }
        if !self.weights.iter().all(|w| w.is_finite()) {
            return Err(ModelError::Malformed("non-finite weight".into()));
        }
        if let Some(g) = &self.geometry {
            if g.dimension() != self.dimension {
                return Err(ModelError::Malformed(format!(
                    "geometry implies {} features, weights have {}",
                    g.dimension(),
                    self.dimension
                )));
            }
        }
        if let Some(p) = &self.neutral_prior {
            if p.len() != self.dimension {
                return Err(ModelError::Malformed("neutral prior length".into()));
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn rows(&self) -> usize {
        self.label_set.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn row(&self, label: usize) -> &[f64] {
        let cols = self.dimension + 1;
        &self.weights[label * cols..(label + 1) * cols]
    }

    /// Raw scores `W x + b`.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dimension;
        (0..self.rows())
            .map(|r| {
                let row = self.row(r);
                row[..d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + row[d]
            })
            .collect()
    }

    /// A fresh neutral tracker seeded from the prior (or zeros).
    pub fn neutral_state(&self, learning_rate: f64, gate_confidence: f64) -> NeutralState {
        let est = self.neutral_prior.clone().unwrap_or_else(|| vec![0.0; self.dimension]);
        NeutralState::new(FeatureVector::new(est), learning_rate, gate_confidence)
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            kind: self.kind,
            geometry: self.geometry,
            label_set: self.label_set.clone(),
            weights: WeightMatrix {
                rows: self.rows(),
                cols: self.dimension + 1,
                data: self.weights.clone(),
            },
            neutral_prior: self.neutral_prior.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let file: ModelFile = serde_json::from_str(s)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Version(file.format_version));
        }
        if file.weights.rows != file.label_set.len() || file.weights.cols == 0 {
            return Err(ModelError::Malformed(format!(
                "{}x{} matrix for {} labels",
                file.weights.rows,
                file.weights.cols,
                file.label_set.len()
            )));
        }
        let m = Self {
            kind: file.kind,
            label_set: file.label_set,
            geometry: file.geometry,
            dimension: file.weights.cols - 1,
            weights: file.weights.data,
            neutral_prior: file.neutral_prior,
        };
        m.check()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Per-frame classifier output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionEstimate {
    pub sequence: u32,
    pub timestamp_us: u64,
    pub face: Option<Rect>,
    pub label: Option<usize>,
    pub confidence: f64,
    pub scores: Vec<f64>,
}

impl EmotionEstimate {
    pub fn no_face(sequence: u32, timestamp_us: u64) -> Self {
        Self {
            sequence,
            timestamp_us,
            face: None,
            label: None,
            confidence: 0.0,
            scores: Vec::new(),
        }
    }

    pub fn at(mut self, sequence: u32, timestamp_us: u64, face: Rect) -> Self {
        self.sequence = sequence;
        self.timestamp_us = timestamp_us;
        self.face = Some(face);
        self
    }
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Scores `features - neutral` with the model. Both kinds report a softmax
/// confidence; SVM scores are the one-vs-rest margins.
pub fn predict(model: &LinearModel, features: &FeatureVector, neutral: &NeutralState) -> Result<EmotionEstimate, VisionError> {
    let d = model.dimension();
    for len in [features.len(), neutral.estimate().len()] {
        if len != d {
            return Err(VisionError::DimensionMismatch { expected: d, actual: len });
        }
    }
    let centered: Vec<f64> = features
        .as_slice()
        .iter()
        .zip(neutral.estimate().as_slice())
        .map(|(f, n)| f - n)
        .collect();
    let scores = model.scores(&centered);
    let probs = softmax(&scores);
    let label = argmax(&scores);
    Ok(EmotionEstimate {
        sequence: 0,
        timestamp_us: 0,
        face: None,
        label,
        confidence: label.map_or(0.0, |l| probs[l]),
        scores,
    })
}
