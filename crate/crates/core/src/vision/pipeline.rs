use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    hog, normalize_lighting, predict, register_face, EmotionEstimate, FeatureVector, FaceLocator, HogParams,
    LightingParams, LinearModel, LocatorKind, NeutralState, RegistrationParams, VisionError,
};
use crate::geom::Rect;
use crate::image::GrayImage;
use crate::proto::{FrameKind, FramePacket};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecognizerConfig {
    pub locator: LocatorKind,
    pub registration: RegistrationParams,
    pub lighting: LightingParams,
    pub neutral_learning_rate: f64,
    pub neutral_gate: f64,
}

impl Default for RecognizerConfig {
    fn default() -> Self {
        Self {
            locator: LocatorKind::default(),
            registration: RegistrationParams::default(),
            lighting: LightingParams::default(),
            neutral_learning_rate: NeutralState::DEFAULT_LEARNING_RATE,
            neutral_gate: NeutralState::DEFAULT_GATE,
        }
    }
}

/// Wall time spent per stage, microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub locate_us: u64,
    pub register_us: u64,
    pub normalize_us: u64,
    pub hog_us: u64,
    pub predict_us: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnalysis {
    /// Face geometry is reported in source coordinates.
    pub estimate: EmotionEstimate,
    pub features: Option<FeatureVector>,
    pub neutral_updated: bool,
    pub timings: StageTimings,
}

/// Registration, lighting normalization and HOG for a located face.
pub fn describe_face(img: &GrayImage, face: Rect, cfg: &RecognizerConfig, hog_params: &HogParams) -> Result<FeatureVector, VisionError> {
    let window = register_face(&img.to_float(), face, &cfg.registration)?;
    let norm = normalize_lighting(&window, &cfg.lighting)?;
    hog(&norm, hog_params)
}

/// Maps a rectangle in payload pixels back to source pixels.
pub fn payload_to_source(packet: &FramePacket, r: Rect) -> Rect {
    match packet.kind {
        FrameKind::FullFrame => {
            let sx = packet.source_width as f64 / packet.width.max(1) as f64;
            let sy = packet.source_height as f64 / packet.height.max(1) as f64;
            let x0 = (r.x as f64 * sx).round() as u32;
            let y0 = (r.y as f64 * sy).round() as u32;
            let x1 = (r.right() as f64 * sx).round() as u32;
            let y1 = (r.bottom() as f64 * sy).round() as u32;
            Rect::new(x0, y0, x1 - x0, y1 - y0).clamp_to(packet.source_width as u32, packet.source_height as u32)
        }
        FrameKind::FaceCrop => Rect::new(r.x + packet.crop_x as u32, r.y + packet.crop_y as u32, r.w, r.h),
    }
}

/// Per-session recognizer: owns the model, the locator and the neutral state.
pub struct Recognizer {
    model: LinearModel,
    hog: HogParams,
    neutral: NeutralState,
    locator: Box<dyn FaceLocator>,
    cfg: RecognizerConfig,
}

impl Recognizer {
    pub fn new(model: LinearModel, cfg: RecognizerConfig) -> Result<Self, VisionError> {
        let hog = model
            .geometry
            .ok_or_else(|| VisionError::InvalidParams("model carries no HOG geometry".into()))?;
        if hog.window != cfg.registration.window {
            return Err(VisionError::InvalidParams(format!(
                "registration window {} differs from model window {}",
                cfg.registration.window, hog.window
            )));
        }
        let neutral = model.neutral_state(cfg.neutral_learning_rate, cfg.neutral_gate);
        Ok(Self {
            locator: cfg.locator.build(),
            model,
            hog,
            neutral,
            cfg,
        })
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    pub fn neutral(&self) -> &NeutralState {
        &self.neutral
    }

    /// Drops everything learned at runtime and restarts from the model prior.
    pub fn reset_neutral(&mut self) {
        self.neutral = self.model.neutral_state(self.cfg.neutral_learning_rate, self.cfg.neutral_gate);
    }

    /// Runs one image through locate, register, normalize, HOG, predict and
    /// the neutral update. The face rectangle stays in image coordinates.
    pub fn analyze(&mut self, img: &GrayImage, sequence: u32, timestamp_us: u64) -> Result<FrameAnalysis, VisionError> {
        let mut t = StageTimings::default();
        let clock = Instant::now();
        let face = self.locator.locate(img);
        t.locate_us = clock.elapsed().as_micros() as u64;
        let Some(face) = face else {
            return Ok(FrameAnalysis {
                estimate: EmotionEstimate::no_face(sequence, timestamp_us),
                features: None,
                neutral_updated: false,
                timings: t,
            });
        };
        let clock = Instant::now();
        let window = register_face(&img.to_float(), face, &self.cfg.registration)?;
        t.register_us = clock.elapsed().as_micros() as u64;
        let clock = Instant::now();
        let norm = normalize_lighting(&window, &self.cfg.lighting)?;
        t.normalize_us = clock.elapsed().as_micros() as u64;
        let clock = Instant::now();
        let features = hog(&norm, &self.hog)?;
        t.hog_us = clock.elapsed().as_micros() as u64;
        let clock = Instant::now();
        let estimate = predict(&self.model, &features, &self.neutral)?.at(sequence, timestamp_us, face);
        let neutral_updated = self
            .neutral
            .update(&features, &estimate, self.model.label_set.neutral_index())?;
        t.predict_us = clock.elapsed().as_micros() as u64;
        Ok(FrameAnalysis {
            estimate,
            features: Some(features),
            neutral_updated,
            timings: t,
        })
    }

    /// [`Recognizer::analyze`] on a received frame, reporting the face in
    /// source coordinates.
    pub fn process(&mut self, packet: &FramePacket) -> Result<FrameAnalysis, VisionError> {
        let img = GrayImage::from_raw(packet.width as u32, packet.height as u32, packet.payload.clone())
            .ok_or(VisionError::EmptyImage)?;
        let mut out = self.analyze(&img, packet.sequence, packet.timestamp_us)?;
        out.estimate.face = out.estimate.face.map(|r| payload_to_source(packet, r));
        Ok(out)
    }
}
