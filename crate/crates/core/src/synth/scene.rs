use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::face::{render_face, Expression, FaceStyle};
use crate::geom::Rect;
use crate::image::GrayImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Trajectory {
    Static { x: f64, y: f64 },
    /// Smooth figure-eight style motion.
    Lissajous { cx: f64, cy: f64, amp_x: f64, amp_y: f64, period_x_s: f64, period_y_s: f64 },
    /// Piecewise-constant positions: each `(t_ms, x, y)` holds until the next.
    Teleport { points: Vec<(u64, f64, f64)> },
}

impl Trajectory {
    pub fn position(&self, t_ms: f64) -> (f64, f64) {
        match self {
            Trajectory::Static { x, y } => (*x, *y),
            Trajectory::Lissajous { cx, cy, amp_x, amp_y, period_x_s, period_y_s } => {
                let t = t_ms / 1000.0;
                let tau = std::f64::consts::TAU;
                (cx + amp_x * (tau * t / period_x_s).sin(), cy + amp_y * (tau * t / period_y_s).sin())
            }
            Trajectory::Teleport { points } => points
                .iter()
                .rev()
                .find(|p| p.0 as f64 <= t_ms)
                .or(points.first())
                .map_or((0.0, 0.0), |p| (p.1, p.2)),
        }
    }
}

/// Expression held over `[start_ms, end_ms)`; `label: None` removes the face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptSegment {
    pub start_ms: u64,
    pub end_ms: u64,
    pub label: Option<String>,
}

impl ScriptSegment {
    pub fn new(start_ms: u64, end_ms: u64, label: Option<&str>) -> Self {
        Self {
            start_ms,
            end_ms,
            label: label.map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    /// Face ellipse semi-axes in native pixels.
    pub face_axes: (f64, f64),
    pub trajectory: Trajectory,
    pub script: Vec<ScriptSegment>,
    /// Script period; times wrap modulo this when set.
    pub repeat_ms: Option<u64>,
    pub neutral_label: String,
    pub style: FaceStyle,
    pub noise: u8,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: 1280,
            height: 776,
            seed: 7,
            face_axes: (60.0, 75.0),
            trajectory: Trajectory::Lissajous {
                cx: 640.0,
                cy: 388.0,
                amp_x: 160.0,
                amp_y: 80.0,
                period_x_s: 17.0,
                period_y_s: 11.0,
            },
            script: vec![
                ScriptSegment::new(2000, 4500, Some("happy")),
                ScriptSegment::new(6000, 8000, Some("surprised")),
                ScriptSegment::new(8600, 9100, None),
            ],
            repeat_ms: Some(10_000),
            neutral_label: "neutral".into(),
            style: FaceStyle::default(),
            noise: 3,
        }
    }
}

/// Ground truth for one rendered frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub face: Option<Rect>,
    pub label: Option<String>,
}

/// Textured background plus one moving, scripted face.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    cfg: SceneConfig,
    background: GrayImage,
}

fn background(width: u32, height: u32, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb6);
    let step = 16u32;
    let gw = width / step + 2;
    let gh = height / step + 2;
    let grid: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(0.0..40.0)).collect();
    GrayImage::from_fn(width, height, |x, y| {
        let fx = x as f64 / step as f64;
        let fy = y as f64 / step as f64;
        let (ix, iy) = (fx as u32, fy as u32);
        let (ax, ay) = (fx - ix as f64, fy - iy as f64);
        let g = |i: u32, j: u32| grid[(j * gw + i) as usize];
        let v = g(ix, iy) * (1.0 - ax) * (1.0 - ay)
            + g(ix + 1, iy) * ax * (1.0 - ay)
            + g(ix, iy + 1) * (1.0 - ax) * ay
            + g(ix + 1, iy + 1) * ax * ay;
        let ramp = 25.0 * x as f64 / width as f64;
        (50.0 + v + ramp + ((x ^ y) % 7) as f64) as u8
    })
}

impl SyntheticScene {
    pub fn new(cfg: SceneConfig) -> Self {
        let background = background(cfg.width, cfg.height, cfg.seed);
        Self { cfg, background }
    }

    pub fn config(&self) -> &SceneConfig {
        &self.cfg
    }

    pub fn geometry(&self) -> (u32, u32) {
        (self.cfg.width, self.cfg.height)
    }

    /// Script label at `t_ms`: `Some(None)` when the face is absent,
    /// `Some(Some(label))` otherwise.
    pub fn label_at(&self, t_ms: u64) -> Option<String> {
        let t = self.cfg.repeat_ms.map_or(t_ms, |p| t_ms % p.max(1));
        match self.cfg.script.iter().find(|s| s.start_ms <= t && t < s.end_ms) {
            Some(seg) => seg.label.clone(),
            None => Some(self.cfg.neutral_label.clone()),
        }
    }

    pub fn truth(&self, timestamp_us: u64) -> SceneTruth {
        let t_ms = timestamp_us as f64 / 1000.0;
        let Some(label) = self.label_at(timestamp_us / 1000) else {
            return SceneTruth { face: None, label: None };
        };
        let (cx, cy) = self.face_center(t_ms);
        let (ax, ay) = self.cfg.face_axes;
        let face = Rect::new((cx - ax).round() as u32, (cy - ay).round() as u32, (2.0 * ax).round() as u32, (2.0 * ay).round() as u32);
        SceneTruth {
            face: Some(face),
            label: Some(label),
        }
    }

    fn face_center(&self, t_ms: f64) -> (f64, f64) {
        let (x, y) = self.cfg.trajectory.position(t_ms);
        let (ax, ay) = self.cfg.face_axes;
        (
            x.clamp(ax + 1.0, self.cfg.width as f64 - ax - 1.0),
            y.clamp(ay + 1.0, self.cfg.height as f64 - ay - 1.0),
        )
    }

    pub fn render(&self, timestamp_us: u64) -> (GrayImage, SceneTruth) {
        let mut img = self.background.clone();
        let truth = self.truth(timestamp_us);
        if let Some(label) = &truth.label {
            let (cx, cy) = self.face_center(timestamp_us as f64 / 1000.0);
            let (ax, ay) = self.cfg.face_axes;
            let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed.wrapping_mul(0x9e37_79b9).wrapping_add(timestamp_us));
            render_face(&mut img, cx, cy, ax, ay, &Expression::for_label(label), &self.cfg.style, self.cfg.noise, &mut rng);
        }
        (img, truth)
    }
}
