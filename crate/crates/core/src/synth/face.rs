use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::image::GrayImage;

/// Geometric expression parameters in face-normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expression {
    pub brow_raise: f64,
    /// Positive lowers the inner brow ends.
    pub brow_tilt: f64,
    pub eye_open: f64,
    /// Positive lifts the mouth corners.
    pub mouth_curve: f64,
    pub mouth_open: f64,
    pub mouth_width: f64,
    pub mouth_asym: f64,
    pub wrinkle: bool,
}

impl Expression {
    pub const NEUTRAL: Expression = Expression {
        brow_raise: 0.0,
        brow_tilt: 0.0,
        eye_open: 1.0,
        mouth_curve: 0.0,
        mouth_open: 0.0,
        mouth_width: 0.30,
        mouth_asym: 0.0,
        wrinkle: false,
    };

    /// Shape for one of the default label names; unknown names render neutral.
    pub fn for_label(name: &str) -> Expression {
        let n = Self::NEUTRAL;
        match name {
            "happy" => Expression { mouth_curve: 0.16, eye_open: 0.7, mouth_width: 0.38, ..n },
            "sad" => Expression { mouth_curve: -0.14, brow_tilt: -0.12, brow_raise: 0.03, mouth_width: 0.26, ..n },
            "angry" => Expression { brow_tilt: 0.16, brow_raise: -0.06, mouth_curve: -0.02, mouth_width: 0.22, ..n },
            "scared" => Expression { brow_raise: 0.11, brow_tilt: -0.07, eye_open: 1.7, mouth_open: 0.07, mouth_width: 0.28, ..n },
            "surprised" => Expression { brow_raise: 0.18, eye_open: 1.5, mouth_open: 0.17, mouth_width: 0.18, ..n },
            "disgust" => Expression { brow_raise: -0.05, brow_tilt: 0.07, mouth_curve: -0.08, mouth_asym: 0.07, wrinkle: true, ..n },
            "contempt" => Expression { mouth_asym: 0.16, mouth_curve: 0.04, ..n },
            _ => n,
        }
    }
}

/// Identity parameters: what makes one synthetic subject look unlike another.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceStyle {
    pub skin: u8,
    pub feature: u8,
    pub eye_spacing: f64,
    pub eye_height: f64,
    pub mouth_height: f64,
    pub stroke: f64,
}

impl Default for FaceStyle {
    fn default() -> Self {
        Self {
            skin: 215,
            feature: 55,
            eye_spacing: 0.36,
            eye_height: -0.15,
            mouth_height: 0.45,
            stroke: 0.055,
        }
    }
}

impl FaceStyle {
    pub fn random(rng: &mut impl Rng) -> Self {
        Self {
            skin: rng.random_range(195..=235),
            feature: rng.random_range(35..=75),
            eye_spacing: rng.random_range(0.32..0.40),
            eye_height: rng.random_range(-0.19..-0.11),
            mouth_height: rng.random_range(0.41..0.49),
            stroke: rng.random_range(0.045..0.065),
        }
    }
}

fn seg_dist(u: f64, v: f64, (ax, ay): (f64, f64), (bx, by): (f64, f64)) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let t = (((u - ax) * dx + (v - ay) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((u - ax - t * dx).powi(2) + (v - ay - t * dy).powi(2)).sqrt()
}

fn is_feature(u: f64, v: f64, e: &Expression, s: &FaceStyle) -> bool {
    // eyes
    for side in [-1.0, 1.0] {
        let du = (u - side * s.eye_spacing) / 0.12;
        let dv = (v - s.eye_height) / (0.065 * e.eye_open);
        if du * du + dv * dv <= 1.0 {
            return true;
        }
    }
    // brows
    let brow_y = s.eye_height - 0.2 - e.brow_raise;
    for side in [-1.0, 1.0] {
        let inner = (side * 0.12, brow_y + e.brow_tilt);
        let outer = (side * 0.56, brow_y - 0.02);
        if seg_dist(u, v, inner, outer) <= s.stroke * 0.6 {
            return true;
        }
    }
    // nose wrinkles
    if e.wrinkle {
        for side in [-1.0, 1.0] {
            if seg_dist(u, v, (side * 0.07, 0.08), (side * 0.16, 0.2)) <= s.stroke * 0.4 {
                return true;
            }
        }
    }
    // mouth
    let mw = e.mouth_width;
    if e.mouth_open > 0.0 {
        let du = u / (mw * 0.7);
        let dv = (v - s.mouth_height) / e.mouth_open;
        if du * du + dv * dv <= 1.0 {
            return true;
        }
    }
    if u.abs() <= mw {
        let r = u / mw;
        let centre = s.mouth_height - e.mouth_curve * (r * r - 0.5) - e.mouth_asym * r;
        if (v - centre).abs() <= s.stroke * 0.5 {
            return true;
        }
    }
    false
}

/// Draws a face ellipse with semi-axes `(ax, ay)` centred at `(cx, cy)`.
/// `noise` adds uniform sensor noise of that amplitude inside the face box.
pub fn render_face(img: &mut GrayImage, cx: f64, cy: f64, ax: f64, ay: f64, expr: &Expression, style: &FaceStyle, noise: u8, rng: &mut impl Rng) {
    let x0 = (cx - ax).floor().max(0.0) as u32;
    let y0 = (cy - ay).floor().max(0.0) as u32;
    let x1 = ((cx + ax).ceil() as u32 + 1).min(img.width());
    let y1 = ((cy + ay).ceil() as u32 + 1).min(img.height());
    for y in y0..y1 {
        for x in x0..x1 {
            let u = (x as f64 + 0.5 - cx) / ax;
            let v = (y as f64 + 0.5 - cy) / ay;
            if u * u + v * v > 1.0 {
                continue;
            }
            // soft top-left key light across the face
            let shade = -12.0 * (u + v) * 0.5;
            let base = if is_feature(u, v, expr, style) {
                style.feature as f64
            } else {
                style.skin as f64 + shade
            };
            let n = if noise > 0 {
                rng.random_range(-(noise as f64)..=noise as f64)
            } else {
                0.0
            };
            img.put(x, y, (base + n).round().clamp(0.0, 255.0) as u8);
        }
    }
}
