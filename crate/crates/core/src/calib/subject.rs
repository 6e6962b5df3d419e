use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::synth::{scene_descriptor, ExpressionSpace, FaceStyle, SceneTrainingConfig, SubjectProfile};
use crate::vision::FeatureVector;

/// Produces acted expressions on request.
pub trait SubjectSimulator {
    fn act(&mut self, label: usize, count: usize) -> Vec<FeatureVector>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubjectKind {
    /// Acts exactly like the training population average.
    Ideal,
    /// A constant shift of every descriptor.
    Offset { magnitude: f64 },
    /// Noise inflated by `scale`.
    Noisy { scale: f64 },
    /// Acts label `i` as label `i + shift`.
    Permuted { shift: usize },
}

impl FromStr for SubjectKind {
    type Err = String;

    /// Accepts `ideal`, `offset[:m]`, `noisy[:k]`, `permuted[:s]`, with an optional `synthetic:` prefix.
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.strip_prefix("synthetic:").unwrap_or(s);
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let num = |d: f64| arg.map(|a| a.parse::<f64>().map_err(|e| format!("bad argument `{a}`: {e}"))).unwrap_or(Ok(d));
        match kind {
            "ideal" => Ok(SubjectKind::Ideal),
            "offset" => Ok(SubjectKind::Offset { magnitude: num(3.0)? }),
            "noisy" => Ok(SubjectKind::Noisy { scale: num(2.0)? }),
            "permuted" => Ok(SubjectKind::Permuted { shift: num(1.0)? as usize }),
            other => Err(format!("unknown subject kind `{other}`")),
        }
    }
}

/// Subject living in an [`ExpressionSpace`].
#[derive(Debug, Clone)]
pub struct FeatureSubject {
    space: ExpressionSpace,
    profile: SubjectProfile,
    rng: ChaCha8Rng,
}

impl FeatureSubject {
    pub fn new(space: ExpressionSpace, kind: SubjectKind, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = space.labels().len();
        let base = SubjectProfile { neutral: vec![0.0; space.dim()], noise_scale: 1.0, label_map: (0..n).collect() };
        let profile = match kind {
            SubjectKind::Ideal => base,
            SubjectKind::Offset { magnitude } => {
                let dir: Vec<f64> = (0..space.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                let offset: Vec<f64> = dir.iter().map(|v| v / norm * magnitude).collect();
                base.with_offset(&offset)
            }
            SubjectKind::Noisy { scale } => base.with_noise_scale(scale),
            SubjectKind::Permuted { shift } => base.with_shifted_labels(shift),
        };
        Self { space, profile, rng }
    }

    pub fn with_profile(space: ExpressionSpace, profile: SubjectProfile, seed: u64) -> Self {
        Self { space, profile, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn profile(&self) -> &SubjectProfile {
        &self.profile
    }
}

impl SubjectSimulator for FeatureSubject {
    fn act(&mut self, label: usize, count: usize) -> Vec<FeatureVector> {
        (0..count).map(|_| self.space.sample(label, &self.profile, &mut self.rng)).collect()
    }
}

/// Subject rendered through the synthetic face scene and described with the real HOG path.
#[derive(Debug, Clone)]
pub struct SceneSubject {
    cfg: SceneTrainingConfig,
    style: FaceStyle,
    noise: u8,
    shift: usize,
    rng: ChaCha8Rng,
}

impl SceneSubject {
    pub fn new(cfg: SceneTrainingConfig, kind: SubjectKind, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Self { cfg, style: FaceStyle::default(), noise: 3, shift: 0, rng: ChaCha8Rng::seed_from_u64(0) };
        match kind {
            SubjectKind::Ideal => {}
            // a new identity: its neutral face differs from every training identity
            SubjectKind::Offset { .. } => s.style = FaceStyle::random(&mut rng),
            SubjectKind::Noisy { scale } => s.noise = (3.0 * scale.max(1.0)).round().min(120.0) as u8,
            SubjectKind::Permuted { shift } => s.shift = shift,
        }
        s.rng = rng;
        s
    }
}

impl SubjectSimulator for SceneSubject {
    fn act(&mut self, label: usize, count: usize) -> Vec<FeatureVector> {
        let n = self.cfg.labels.len();
        let name = self.cfg.labels.name((label + self.shift) % n).unwrap_or("neutral").to_string();
        (0..count).map(|_| scene_descriptor(&name, &self.style, &self.cfg, self.noise, &mut self.rng)).collect()
    }
}
