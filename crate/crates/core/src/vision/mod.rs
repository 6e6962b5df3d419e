//! Host-side recognition: face localization, registration, lighting
//! normalization, HOG features, linear classification and runtime neutral
//! subtraction.

mod hog;
mod lighting;
mod locate;
mod model;
mod neutral;
mod pipeline;
mod registration;
mod train;

pub use hog::{hog, HogParams, L2HYS_CLIP};
pub use lighting::{difference_of_gaussians, gaussian_blur, gaussian_kernel, normalize_lighting, LightingParams};
pub use locate::{BlobLocator, EllipseFitLocator, FaceLocator, LocatorKind};
pub use model::{argmax, predict, softmax, EmotionEstimate, LinearModel, ModelError, ModelKind, MODEL_FORMAT_VERSION};
pub use neutral::NeutralState;
pub use pipeline::{describe_face, payload_to_source, FrameAnalysis, Recognizer, RecognizerConfig, StageTimings};
pub use registration::{register_face, RegistrationParams};
pub use train::{
    load_dataset, logistic_loss_and_grad, save_dataset, train, Sample, TrainConfig, TrainError,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Rect;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VisionError {
    #[error("empty image")]
    EmptyImage,
    #[error("degenerate face rectangle {0:?}")]
    DegenerateRectangle(Rect),
    #[error("face rectangle {0:?} outside the image")]
    RectangleOutOfBounds(Rect),
    #[error("window is {actual:?}, expected {expected:?}")]
    GeometryMismatch { expected: (u32, u32), actual: (u32, u32) },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Fixed-length descriptor.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}
