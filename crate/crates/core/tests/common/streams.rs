//! Random and scripted estimate streams.

use rand::Rng;
use sg_core::vision::EmotionEstimate;
use sg_core::Rect;

pub const FRAME_US: u64 = 33_333;

pub fn estimate(seq: u32, t_us: u64, label: Option<usize>, confidence: f64) -> EmotionEstimate {
    EmotionEstimate {
        sequence: seq,
        timestamp_us: t_us,
        face: label.map(|_| Rect::new(100, 80, 60, 75)),
        label,
        confidence,
        scores: Vec::new(),
    }
}

/// A bursty stream: labels persist for random stretches, confidence varies,
/// faces drop out now and then, and frame spacing jitters.
pub fn random_stream(rng: &mut impl Rng, frames: usize, labels: usize) -> Vec<EmotionEstimate> {
    let mut out = Vec::with_capacity(frames);
    let mut t = rng.random_range(0..50_000u64);
    let mut label = rng.random_range(0..labels);
    for seq in 0..frames {
        if rng.random_bool(0.08) {
            label = rng.random_range(0..labels);
        }
        let present = !rng.random_bool(0.03);
        let conf = if rng.random_bool(0.85) { rng.random_range(0.6..1.0) } else { rng.random_range(0.1..0.7) };
        out.push(estimate(seq as u32, t, present.then_some(label), if present { conf } else { 0.0 }));
        t += rng.random_range(10_000..120_000u64);
    }
    out
}
