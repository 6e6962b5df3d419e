use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::face::{render_face, Expression, FaceStyle};
use crate::geom::Rect;
use crate::image::GrayImage;
use crate::proto::LabelSet;
use crate::vision::{describe_face, train, FeatureVector, HogParams, LinearModel, ModelKind, RecognizerConfig, Sample, TrainConfig, TrainError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneTrainingConfig {
    pub labels: LabelSet,
    pub hog: HogParams,
    pub recognizer: RecognizerConfig,
    pub identities: usize,
    pub per_label: usize,
    pub neutral_reference: usize,
    /// Share of samples taken from a 4x downsampled full frame instead of a crop.
    pub full_frame_fraction: f64,
    /// Downsampling between native capture and full-frame transmission.
    pub full_frame_scale: u32,
    pub seed: u64,
}

impl Default for SceneTrainingConfig {
    fn default() -> Self {
        Self {
            labels: LabelSet::default(),
            hog: HogParams::default(),
            recognizer: RecognizerConfig::default(),
            identities: 6,
            per_label: 10,
            neutral_reference: 10,
            full_frame_fraction: 0.4,
            full_frame_scale: 4,
            seed: 11,
        }
    }
}

const CANVAS: (u32, u32) = (440, 400);

fn canvas(rng: &mut impl Rng) -> GrayImage {
    let base: u8 = rng.random_range(45..80);
    let phase: u32 = rng.random_range(0..50);
    GrayImage::from_fn(CANVAS.0, CANVAS.1, |x, y| {
        base + (((x + phase) / 9 * 13 + (y / 11) * 7) % 31) as u8 + (x * 20 / CANVAS.0) as u8
    })
}

// Renders one face and pushes it through locate + describe exactly as the host
// would see it, in either transmission mode.
fn sample_once(label: &str, style: &FaceStyle, cfg: &SceneTrainingConfig, noise: u8, rng: &mut impl Rng) -> Option<FeatureVector> {
    let mut img = canvas(rng);
    let ax = rng.random_range(52.0..68.0);
    let ay = ax * rng.random_range(1.15..1.35);
    let cx = CANVAS.0 as f64 / 2.0 + rng.random_range(-20.0..20.0);
    let cy = CANVAS.1 as f64 / 2.0 + rng.random_range(-20.0..20.0);
    render_face(&mut img, cx, cy, ax, ay, &Expression::for_label(label), style, noise, rng);
    let view = if rng.random_bool(cfg.full_frame_fraction) {
        let k = cfg.full_frame_scale;
        img.box_downsample(CANVAS.0 / k, CANVAS.1 / k)
    } else {
        let w = (3.6 * ax).min(CANVAS.0 as f64);
        let h = (3.6 * ay).min(CANVAS.1 as f64);
        let x = (cx - w / 2.0 + rng.random_range(-6.0..6.0)).clamp(0.0, CANVAS.0 as f64 - w);
        let y = (cy - h / 2.0 + rng.random_range(-6.0..6.0)).clamp(0.0, CANVAS.1 as f64 - h);
        img.crop(Rect::new(x as u32, y as u32, w as u32, h as u32))
    };
    let face = cfg.recognizer.locator.build().locate(&view)?;
    describe_face(&view, face, &cfg.recognizer, &cfg.hog).ok()
}

/// Descriptor of one freshly rendered face of `style` acting `label`, as the host would compute it.
pub fn scene_descriptor(label: &str, style: &FaceStyle, cfg: &SceneTrainingConfig, noise: u8, rng: &mut impl Rng) -> FeatureVector {
    loop {
        if let Some(f) = sample_once(label, style, cfg, noise, rng) {
            return f;
        }
    }
}

fn mean(vs: &[FeatureVector]) -> Vec<f64> {
    let mut m = vec![0.0; vs[0].len()];
    for v in vs {
        m.iter_mut().zip(v.as_slice()).for_each(|(a, b)| *a += b / vs.len() as f64);
    }
    m
}

/// Neutral-subtracted descriptors of rendered faces across several synthetic
/// identities, plus the population-mean neutral descriptor.
pub fn scene_training_set(cfg: &SceneTrainingConfig) -> (Vec<Sample>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let neutral_name = cfg.labels.name(cfg.labels.neutral_index()).unwrap_or("neutral").to_string();
    let mut data = Vec::new();
    let mut prior = vec![0.0; cfg.hog.dimension()];
    let ids = cfg.identities.max(1);
    for id in 0..ids {
        let style = if id == 0 { FaceStyle::default() } else { FaceStyle::random(&mut rng) };
        let reference: Vec<FeatureVector> = (0..cfg.neutral_reference.max(1)).map(|_| scene_descriptor(&neutral_name, &style, cfg, 3, &mut rng)).collect();
        let neutral = mean(&reference);
        prior.iter_mut().zip(&neutral).for_each(|(p, n)| *p += n / ids as f64);
        for (label, name) in cfg.labels.names().iter().enumerate() {
            for _ in 0..cfg.per_label {
                let f = scene_descriptor(name, &style, cfg, 3, &mut rng);
                let centred: Vec<f64> = f.as_slice().iter().zip(&neutral).map(|(a, b)| a - b).collect();
                data.push(Sample::new(centred, label));
            }
        }
    }
    (data, prior)
}

/// Generic samples from identities the model was not trained on.
pub fn scene_reference_set(cfg: &SceneTrainingConfig, seed: u64) -> Vec<Sample> {
    let cfg = SceneTrainingConfig { identities: 3, per_label: 10, seed, ..cfg.clone() };
    scene_training_set(&cfg).0
}

/// Trains a recognizer-ready model on [`scene_training_set`].
pub fn train_scene_model(cfg: &SceneTrainingConfig, kind: ModelKind, train_cfg: &TrainConfig) -> Result<LinearModel, TrainError> {
    let (data, prior) = scene_training_set(cfg);
    let mut model = train(kind, &cfg.labels, &data, train_cfg)?.with_geometry(cfg.hog);
    model.neutral_prior = Some(prior);
    Ok(model)
}
