use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::proto::LabelSet;
use crate::vision::{train, FeatureVector, LinearModel, ModelKind, Sample, TrainConfig, TrainError};

/// How one simulated person expresses: their neutral descriptor, how noisy
/// they are, and which prototype they actually produce when asked for a label.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectProfile {
    pub neutral: Vec<f64>,
    pub noise_scale: f64,
    pub label_map: Vec<usize>,
}

impl SubjectProfile {
    pub fn with_offset(mut self, offset: &[f64]) -> Self {
        self.neutral.iter_mut().zip(offset).for_each(|(n, o)| *n += o);
        self
    }

    pub fn with_noise_scale(mut self, k: f64) -> Self {
        self.noise_scale *= k;
        self
    }

    /// Requested label `i` is performed as prototype `(i + shift) % n`.
    pub fn with_shifted_labels(mut self, shift: usize) -> Self {
        let n = self.label_map.len();
        self.label_map = (0..n).map(|i| (i + shift) % n).collect();
        self
    }
}

/// Feature-space expression model: `subject neutral + prototype + noise`,
/// with the neutral prototype at the origin.
#[derive(Debug, Clone)]
pub struct ExpressionSpace {
    labels: LabelSet,
    dim: usize,
    prototypes: Vec<Vec<f64>>,
    noise: f64,
    subject_spread: f64,
}

impl ExpressionSpace {
    pub fn new(labels: LabelSet, dim: usize, separation: f64, noise: f64, subject_spread: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prototypes = (0..labels.len())
            .map(|l| {
                let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) * separation).collect();
                if l == labels.neutral_index() {
                    vec![0.0; dim]
                } else {
                    v
                }
            })
            .collect();
        Self {
            labels,
            dim,
            prototypes,
            noise,
            subject_spread,
        }
    }

    /// The reference benchmark space: 32 dimensions, prototype scale 1.5,
    /// unit noise, subject neutral spread 2.
    pub fn benchmark(seed: u64) -> Self {
        Self::new(LabelSet::default(), 32, 1.5, 1.0, 2.0, seed)
    }

    /// Trains a model on `subjects` random population members, with the population neutral as prior.
    pub fn train_model(&self, kind: ModelKind, subjects: usize, per_label: usize, seed: u64) -> Result<LinearModel, TrainError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (data, prior) = self.training_set(subjects, per_label, &mut rng);
        let mut model = train(kind, &self.labels, &data, &TrainConfig { seed, ..TrainConfig::default() })?;
        model.neutral_prior = Some(prior);
        Ok(model)
    }

    /// Fresh population samples, neutral-centred, for checking a model on generic data.
    pub fn reference_set(&self, subjects: usize, per_label: usize, seed: u64) -> Vec<Sample> {
        self.training_set(subjects, per_label, &mut ChaCha8Rng::seed_from_u64(seed)).0
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn prototype(&self, label: usize) -> &[f64] {
        &self.prototypes[label]
    }

    /// A random member of the population.
    pub fn subject(&self, rng: &mut impl Rng) -> SubjectProfile {
        SubjectProfile {
            neutral: (0..self.dim).map(|_| rng.sample::<f64, _>(StandardNormal) * self.subject_spread).collect(),
            noise_scale: 1.0,
            label_map: (0..self.labels.len()).collect(),
        }
    }

    pub fn sample(&self, label: usize, subject: &SubjectProfile, rng: &mut impl Rng) -> FeatureVector {
        let proto = &self.prototypes[subject.label_map[label]];
        let sigma = self.noise * subject.noise_scale;
        FeatureVector::new(
            subject
                .neutral
                .iter()
                .zip(proto)
                .map(|(n, p)| n + p + rng.sample::<f64, _>(StandardNormal) * sigma)
                .collect(),
        )
    }

    /// Neutral-subtracted population training data (each subject's true
    /// neutral removed) and the population-mean neutral as prior.
    pub fn training_set(&self, subjects: usize, per_label: usize, rng: &mut impl Rng) -> (Vec<Sample>, Vec<f64>) {
        let mut data = Vec::new();
        let mut prior = vec![0.0; self.dim];
        for _ in 0..subjects {
            let s = self.subject(rng);
            prior.iter_mut().zip(&s.neutral).for_each(|(p, n)| *p += n / subjects as f64);
            for label in 0..self.labels.len() {
                for _ in 0..per_label {
                    let f = self.sample(label, &s, rng);
                    let centred: Vec<f64> = f.as_slice().iter().zip(&s.neutral).map(|(a, b)| a - b).collect();
                    data.push(Sample::new(centred, label));
                }
            }
        }
        (data, prior)
    }
}
