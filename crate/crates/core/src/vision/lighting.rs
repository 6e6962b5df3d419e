//! Illumination normalization: gamma, difference of Gaussians, then
//! two-stage robust contrast equalization with a tanh squash.

use serde::{Deserialize, Serialize};

use super::VisionError;
use crate::image::FloatImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LightingParams {
    pub gamma: f64,
    pub sigma_inner: f64,
    pub sigma_outer: f64,
    pub alpha: f64,
    pub tau: f64,
}

impl Default for LightingParams {
    fn default() -> Self {
        Self {
            gamma: 0.2,
            sigma_inner: 1.0,
            sigma_outer: 2.0,
            alpha: 0.1,
            tau: 10.0,
        }
    }
}

// Normalizers below this are treated as a flat field.
const FLAT_EPS: f64 = 1e-9;

/// Sampled Gaussian with radius `ceil(3 sigma)`, normalized to unit sum.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur with replicated borders.
pub fn gaussian_blur(img: &FloatImage, sigma: f64) -> FloatImage {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let (w, h) = (img.width(), img.height());
    let horiz = FloatImage::from_fn(w, h, |x, y| {
        k.iter()
            .enumerate()
            .map(|(i, kv)| kv * img.get_clamped(x as i64 + i as i64 - r, y as i64))
            .sum()
    });
    FloatImage::from_fn(w, h, |x, y| {
        k.iter()
            .enumerate()
            .map(|(i, kv)| kv * horiz.get_clamped(x as i64, y as i64 + i as i64 - r))
            .sum()
    })
}

/// Difference of Gaussians, inner minus outer.
pub fn difference_of_gaussians(img: &FloatImage, sigma_inner: f64, sigma_outer: f64) -> FloatImage {
    let a = gaussian_blur(img, sigma_inner);
    let b = gaussian_blur(img, sigma_outer);
    FloatImage::from_fn(img.width(), img.height(), |x, y| a.get(x, y) - b.get(x, y))
}

fn equalize(img: &mut FloatImage, alpha: f64, cap: Option<f64>) {
    let n = img.as_slice().len() as f64;
    let mean = img
        .as_slice()
        .iter()
        .map(|v| {
            let a = v.abs();
            cap.map_or(a, |c| a.min(c)).powf(alpha)
        })
        .sum::<f64>()
        / n;
    let norm = mean.powf(1.0 / alpha);
    let data = img.as_mut_slice();
    if norm < FLAT_EPS {
        data.iter_mut().for_each(|v| *v = 0.0);
    } else {
        data.iter_mut().for_each(|v| *v /= norm);
    }
}

/// Normalizes an intensity image (values on the 0..255 scale). Output keeps the
/// geometry and lies strictly inside `(-tau, tau)`.
pub fn normalize_lighting(img: &FloatImage, p: &LightingParams) -> Result<FloatImage, VisionError> {
    if img.is_empty() {
        return Err(VisionError::EmptyImage);
    }
    let gamma = img.map(|v| v.max(0.0).powf(p.gamma));
    let mut out = difference_of_gaussians(&gamma, p.sigma_inner, p.sigma_outer);
    equalize(&mut out, p.alpha, None);
    equalize(&mut out, p.alpha, Some(p.tau));
    let tau = p.tau;
    Ok(out.map(|v| tau * (v / tau).tanh()))
}
