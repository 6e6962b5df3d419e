use serde::{Deserialize, Serialize};

use super::VisionError;
use crate::geom::Rect;
use crate::image::FloatImage;

/// Landmark-free registration: margin crop then bilinear resize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrationParams {
    /// Margin added on every side, as a fraction of the face size.
    pub margin: f64,
    pub window: u32,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self { margin: 0.1, window: 64 }
    }
}

pub fn register_face(img: &FloatImage, face: Rect, p: &RegistrationParams) -> Result<FloatImage, VisionError> {
    if face.is_empty() {
        return Err(VisionError::DegenerateRectangle(face));
    }
    if !face.fits_within(img.width(), img.height()) {
        return Err(VisionError::RectangleOutOfBounds(face));
    }
    let region = face.expand(p.margin, img.width(), img.height());
    Ok(img.crop(region).resize_bilinear(p.window, p.window))
}
