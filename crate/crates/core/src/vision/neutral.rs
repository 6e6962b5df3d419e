use serde::{Deserialize, Serialize};

use super::{EmotionEstimate, FeatureVector, VisionError};

/// Runtime estimate of the subject's neutral descriptor: a gated exponential
/// moving average that only absorbs frames confidently classified neutral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeutralState {
    estimate: FeatureVector,
    samples_absorbed: u64,
    learning_rate: f64,
    gate_confidence: f64,
}

impl NeutralState {
    pub const DEFAULT_LEARNING_RATE: f64 = 0.05;
    pub const DEFAULT_GATE: f64 = 0.6;

    pub fn new(estimate: FeatureVector, learning_rate: f64, gate_confidence: f64) -> Self {
        assert!(learning_rate > 0.0 && learning_rate <= 1.0, "learning rate must lie in (0, 1]");
        Self {
            estimate,
            samples_absorbed: 0,
            learning_rate,
            gate_confidence,
        }
    }

    pub fn estimate(&self) -> &FeatureVector {
        &self.estimate
    }

    pub fn samples_absorbed(&self) -> u64 {
        self.samples_absorbed
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn gate_confidence(&self) -> f64 {
        self.gate_confidence
    }

    /// Replaces the estimate, e.g. with a calibrated subject neutral.
    pub fn reseed(&mut self, estimate: FeatureVector) {
        self.estimate = estimate;
        self.samples_absorbed = 0;
    }

    /// Absorbs `features` iff the estimate is the neutral label at or above the
    /// gate confidence. Returns whether the frame was absorbed.
    pub fn update(&mut self, features: &FeatureVector, estimate: &EmotionEstimate, neutral_label: usize) -> Result<bool, VisionError> {
        if features.len() != self.estimate.len() {
            return Err(VisionError::DimensionMismatch {
                expected: self.estimate.len(),
                actual: features.len(),
            });
        }
        if estimate.label != Some(neutral_label) || estimate.confidence < self.gate_confidence {
            return Ok(false);
        }
        let lr = self.learning_rate;
        let mut values = std::mem::take(&mut self.estimate).into_inner();
        for (e, f) in values.iter_mut().zip(features.as_slice()) {
            *e = (1.0 - lr) * *e + lr * f;
        }
        self.estimate = FeatureVector::new(values);
        self.samples_absorbed += 1;
        Ok(true)
    }
}
