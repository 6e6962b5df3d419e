use serde::{Deserialize, Serialize};

use crate::geom::Rect;
use crate::proto::MAX_FRAME_PAYLOAD;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CropConfig {
    pub alpha_center: f64,
    pub alpha_size: f64,
    /// Recenter once the smoothed centre drifts this fraction of the crop width.
    pub deadband_frac: f64,
    pub margin_factor: f64,
    /// Consecutive misses before falling back to full frames.
    pub lost_threshold: u32,
    /// Below this smoothed-centre speed (px/step) the estimate counts as settled.
    pub settle_speed: f64,
    /// Once settled, residual offsets larger than this (px) are corrected.
    pub settle_tolerance: f64,
    /// Upper bound on crop area so a crop always fits one datagram.
    pub max_crop_area: u64,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self {
            alpha_center: 0.3,
            alpha_size: 0.1,
            deadband_frac: 0.15,
            margin_factor: 1.8,
            lost_threshold: 15,
            settle_speed: 0.5,
            settle_tolerance: 0.5,
            max_crop_area: MAX_FRAME_PAYLOAD as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CropMode {
    FullFrame,
    FaceCrop,
}

/// Device-side face crop controller.
///
/// Face observations are smoothed by exponential moving averages. The crop
/// follows the smoothed centre through a deadband so small motion leaves the
/// frame still; once the estimate settles, remaining offsets are taken up in
/// one step. Every move of the crop lands on the current smoothed centre.
#[derive(Debug, Clone, PartialEq)]
pub struct CropState {
    cfg: CropConfig,
    source: (u32, u32),
    smoothed: Option<Smoothed>,
    anchor: (f64, f64),
    crop_size: (u32, u32),
    active_crop: Rect,
    mode: CropMode,
    frames_since_face: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Smoothed {
    center: (f64, f64),
    size: (f64, f64),
}

impl CropState {
    pub fn new(cfg: CropConfig, source_width: u32, source_height: u32) -> Self {
        assert!(cfg.alpha_center > 0.0 && cfg.alpha_center <= 1.0);
        assert!(cfg.alpha_size > 0.0 && cfg.alpha_size <= 1.0);
        Self {
            cfg,
            source: (source_width, source_height),
            smoothed: None,
            anchor: (source_width as f64 / 2.0, source_height as f64 / 2.0),
            crop_size: (source_width, source_height),
            active_crop: Rect::new(0, 0, source_width, source_height),
            mode: CropMode::FullFrame,
            frames_since_face: 0,
        }
    }

    pub fn config(&self) -> &CropConfig {
        &self.cfg
    }

    pub fn source(&self) -> (u32, u32) {
        self.source
    }

    pub fn mode(&self) -> CropMode {
        self.mode
    }

    pub fn active_crop(&self) -> Rect {
        self.active_crop
    }

    /// Commanded crop centre (before integer placement and border clamping).
    pub fn crop_center(&self) -> (f64, f64) {
        self.anchor
    }

    pub fn smoothed_center(&self) -> Option<(f64, f64)> {
        self.smoothed.map(|s| s.center)
    }

    pub fn smoothed_size(&self) -> Option<(f64, f64)> {
        self.smoothed.map(|s| s.size)
    }

    pub fn frames_since_face(&self) -> u32 {
        self.frames_since_face
    }

    /// Overrides the smoothed estimate and crop directly.
    pub fn seed(&mut self, center: (f64, f64), size: (f64, f64)) {
        self.smoothed = Some(Smoothed { center, size });
        self.anchor = center;
        self.crop_size = self.target_size(size);
        self.place();
        self.mode = CropMode::FaceCrop;
        self.frames_since_face = 0;
    }

    fn target_size(&self, size: (f64, f64)) -> (u32, u32) {
        let (sw, sh) = self.source;
        let mut w = (size.0 * self.cfg.margin_factor).round().clamp(1.0, sw as f64);
        let mut h = (size.1 * self.cfg.margin_factor).round().clamp(1.0, sh as f64);
        let area = w * h;
        let max = self.cfg.max_crop_area as f64;
        if area > max {
            let k = (max / area).sqrt();
            w = (w * k).floor().max(1.0);
            h = (h * k).floor().max(1.0);
            while w * h > max {
                if w >= h {
                    w -= 1.0;
                } else {
                    h -= 1.0;
                }
            }
        }
        (w as u32, h as u32)
    }

    fn place(&mut self) {
        let (sw, sh) = self.source;
        let (w, h) = self.crop_size;
        let x = (self.anchor.0 - w as f64 / 2.0).round().clamp(0.0, (sw - w) as f64) as u32;
        let y = (self.anchor.1 - h as f64 / 2.0).round().clamp(0.0, (sh - h) as f64) as u32;
        self.active_crop = Rect::new(x, y, w, h);
    }

    /// Feeds one face observation (source pixels) or a miss.
    pub fn update(&mut self, observation: Option<Rect>) {
        let Some(obs) = observation else {
            self.frames_since_face = self.frames_since_face.saturating_add(1);
            if self.smoothed.is_some() && self.frames_since_face >= self.cfg.lost_threshold {
                self.smoothed = None;
                self.mode = CropMode::FullFrame;
                self.crop_size = self.source;
                self.active_crop = Rect::new(0, 0, self.source.0, self.source.1);
            }
            return;
        };
        let obs_center = obs.center();
        let obs_size = (obs.w as f64, obs.h as f64);
        self.frames_since_face = 0;
        self.mode = CropMode::FaceCrop;
        let Some(prev) = self.smoothed else {
            self.seed(obs_center, obs_size);
            return;
        };
        let (ac, asz) = (self.cfg.alpha_center, self.cfg.alpha_size);
        let next = Smoothed {
            center: (
                prev.center.0 + ac * (obs_center.0 - prev.center.0),
                prev.center.1 + ac * (obs_center.1 - prev.center.1),
            ),
            size: (
                prev.size.0 + asz * (obs_size.0 - prev.size.0),
                prev.size.1 + asz * (obs_size.1 - prev.size.1),
            ),
        };
        self.smoothed = Some(next);

        let deviation = dist(next.center, self.anchor);
        let speed = dist(next.center, prev.center);
        let drifted = deviation > self.cfg.deadband_frac * self.crop_size.0 as f64;
        let settled = speed <= self.cfg.settle_speed && deviation > self.cfg.settle_tolerance;
        let target = self.target_size(next.size);
        let resize = (target.0 as f64 - self.crop_size.0 as f64).abs() > self.cfg.deadband_frac * self.crop_size.0 as f64
            || (target.1 as f64 - self.crop_size.1 as f64).abs() > self.cfg.deadband_frac * self.crop_size.1 as f64;
        if drifted || settled {
            self.anchor = next.center;
            self.crop_size = target;
        } else if resize {
            self.crop_size = target;
        } else {
            return;
        }
        self.place();
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}
