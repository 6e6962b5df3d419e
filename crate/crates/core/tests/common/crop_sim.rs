//! Drives a crop controller along a scripted face path and records every step.

use sg_core::device::{CropConfig, CropMode, CropState};
use sg_core::Rect;

pub const SOURCE: (u32, u32) = (1280, 776);
pub const FACE: (u32, u32) = (100, 120);

#[derive(Debug, Clone, Copy)]
pub struct Step {
    pub face: Option<(f64, f64)>,
    pub smoothed: Option<(f64, f64)>,
    pub anchor: (f64, f64),
    pub crop: Rect,
    pub mode: CropMode,
}

pub fn face_rect(c: (f64, f64)) -> Rect {
    let x = (c.0 - FACE.0 as f64 / 2.0).round() as u32;
    let y = (c.1 - FACE.1 as f64 / 2.0).round() as u32;
    Rect::new(x, y, FACE.0, FACE.1)
}

/// Runs `steps` updates; `path(i)` gives the face centre at step `i`.
pub fn simulate(cfg: CropConfig, steps: usize, path: impl Fn(usize) -> Option<(f64, f64)>) -> Vec<Step> {
    let mut s = CropState::new(cfg, SOURCE.0, SOURCE.1);
    (0..steps)
        .map(|i| {
            let face = path(i);
            s.update(face.map(face_rect));
            Step { face: face.map(|c| face_rect(c).center()), smoothed: s.smoothed_center(), anchor: s.crop_center(), crop: s.active_crop(), mode: s.mode() }
        })
        .collect()
}

pub fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Largest excess of cumulative crop-centre travel over cumulative smoothed-centre
/// travel, over every prefix of the run (<= 0 means the jitter bound holds).
pub fn jitter_excess(steps: &[Step]) -> f64 {
    let (mut crop, mut smooth, mut worst) = (0.0, 0.0, f64::NEG_INFINITY);
    for w in steps.windows(2) {
        crop += dist(w[0].anchor, w[1].anchor);
        if let (Some(a), Some(b)) = (w[0].smoothed, w[1].smoothed) {
            smooth += dist(a, b);
        }
        worst = f64::max(worst, crop - smooth);
    }
    worst
}

/// Face jumps 200 px right after 30 steps, then holds for 60 steps.
pub fn teleport(i: usize) -> Option<(f64, f64)> {
    Some(if i < 30 { (500.0, 380.0) } else { (700.0, 380.0) })
}

/// Slow diagonal drift.
pub fn linear(i: usize) -> Option<(f64, f64)> {
    Some((300.0 + 2.0 * i as f64, 250.0 + 1.0 * i as f64))
}

/// Circle of radius 120 px, one lap per 240 steps.
pub fn circle(i: usize) -> Option<(f64, f64)> {
    let a = i as f64 * std::f64::consts::TAU / 240.0;
    Some((640.0 + 120.0 * a.cos(), 388.0 + 120.0 * a.sin()))
}
