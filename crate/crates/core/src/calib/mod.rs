//! Iterative per-subject calibration: request acted expressions, adapt the
//! model, measure held-out recall and decide what to ask for next.

mod subject;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::proto::LabelSet;
use crate::vision::{argmax, logistic_loss_and_grad, FeatureVector, LinearModel, Sample};

pub use subject::{FeatureSubject, SceneSubject, SubjectKind, SubjectSimulator};

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("label {label} has {count} sample(s), need at least 2")]
    InsufficientSamples { label: usize, count: usize },
    #[error("label index {0} not in the model's label set")]
    UnknownLabel(usize),
    #[error("sample for label {label} has dimension {actual}, model expects {expected}")]
    DimensionMismatch { label: usize, expected: usize, actual: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationPolicy {
    pub recall_target: f64,
    pub samples_per_request: usize,
    pub max_rounds: usize,
    pub holdout_fraction: f64,
}

impl Default for CalibrationPolicy {
    fn default() -> Self {
        Self { recall_target: 0.8, samples_per_request: 20, max_rounds: 5, holdout_fraction: 0.25 }
    }
}

impl CalibrationPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(format!("holdout_fraction {} not in (0,1)", self.holdout_fraction));
        }
        if !(self.recall_target > 0.0 && self.recall_target <= 1.0) {
            return Err(format!("recall_target {} not in (0,1]", self.recall_target));
        }
        if self.max_rounds == 0 || self.samples_per_request < 2 {
            return Err("max_rounds must be >= 1 and samples_per_request >= 2".into());
        }
        Ok(())
    }
}

/// How far one round may move the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptConfig {
    /// Fraction of the prototype margin deficit corrected through the class bias.
    pub prototype_rate: f64,
    /// Margin the subject's class prototype should clear.
    pub prototype_margin: f64,
    pub fine_tune_steps: usize,
    /// Strength of the pull back towards the base weights.
    pub anchor: f64,
    /// Largest accuracy drop allowed on the reference set, as a fraction.
    pub max_generic_drop: f64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self { prototype_rate: 0.5, prototype_margin: 1.0, fine_tune_steps: 30, anchor: 0.05, max_generic_drop: 0.10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRound {
    pub round_index: usize,
    pub requested_labels: Vec<usize>,
    /// Samples per label available to this round (accumulated).
    pub collected: BTreeMap<usize, usize>,
    pub per_label_recall: BTreeMap<usize, f64>,
    /// Fraction of the adaptation kept after the reference guard (1 = all of it).
    pub step_scale: f64,
    /// (base, adapted) accuracy on the reference set, when one was given.
    pub reference_accuracy: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "labels", rename_all = "snake_case")]
pub enum Decision {
    Converged,
    MaxRoundsReached,
    Request(Vec<usize>),
}

/// Labels still under target, weakest first; `Converged` when none are.
pub fn next_request(round: &CalibrationRound, policy: &CalibrationPolicy) -> Decision {
    let mut deficient: Vec<(usize, f64)> =
        round.per_label_recall.iter().filter(|(_, &r)| r < policy.recall_target).map(|(&l, &r)| (l, r)).collect();
    if deficient.is_empty() {
        return Decision::Converged;
    }
    if round.round_index + 1 >= policy.max_rounds {
        return Decision::MaxRoundsReached;
    }
    deficient.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Decision::Request(deficient.into_iter().map(|(l, _)| l).collect())
}

fn mean_of<'a>(vs: impl Iterator<Item = &'a FeatureVector>, dim: usize) -> Option<Vec<f64>> {
    let mut m = vec![0.0; dim];
    let mut n = 0usize;
    for v in vs {
        m.iter_mut().zip(v.as_slice()).for_each(|(a, b)| *a += b);
        n += 1;
    }
    (n > 0).then(|| m.into_iter().map(|v| v / n as f64).collect())
}

fn centred(v: &FeatureVector, neutral: &[f64]) -> Vec<f64> {
    v.as_slice().iter().zip(neutral).map(|(a, b)| a - b).collect()
}

/// Label predicted for raw features `x` by `model` under its neutral prior.
pub fn classify(model: &LinearModel, x: &FeatureVector) -> usize {
    let zero;
    let neutral = match &model.neutral_prior {
        Some(n) => n.as_slice(),
        None => {
            zero = vec![0.0; model.dimension()];
            &zero
        }
    };
    argmax(&model.scores(&centred(x, neutral))).unwrap_or(0)
}

/// Per-label recall of `model` on `samples`.
pub fn recall(model: &LinearModel, samples: &BTreeMap<usize, Vec<FeatureVector>>) -> BTreeMap<usize, f64> {
    samples
        .iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(&l, v)| (l, v.iter().filter(|x| classify(model, x) == l).count() as f64 / v.len() as f64))
        .collect()
}

/// Accuracy on already neutral-centred samples.
pub fn reference_accuracy(model: &LinearModel, reference: &[Sample]) -> f64 {
    if reference.is_empty() {
        return 1.0;
    }
    let hits = reference.iter().filter(|s| argmax(&model.scores(s.features.as_slice())) == Some(s.label)).count();
    hits as f64 / reference.len() as f64
}

type Split = (BTreeMap<usize, Vec<FeatureVector>>, BTreeMap<usize, Vec<FeatureVector>>);

/// Seeded per-label split into (adapt, holdout); each side gets at least one sample.
pub fn split(acted: &BTreeMap<usize, Vec<FeatureVector>>, holdout_fraction: f64, seed: u64) -> Split {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adapt = BTreeMap::new();
    let mut hold = BTreeMap::new();
    for (&label, v) in acted {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.shuffle(&mut rng);
        let h = ((v.len() as f64 * holdout_fraction).round() as usize).clamp(1, v.len() - 1);
        hold.insert(label, idx[..h].iter().map(|&i| v[i].clone()).collect());
        adapt.insert(label, idx[h..].iter().map(|&i| v[i].clone()).collect());
    }
    (adapt, hold)
}

/// One calibration round against `base`.
///
/// The neutral estimate is re-seeded from acted neutral samples when there are
/// any. Each class bias is then shifted towards clearing its subject prototype,
/// followed by a few cross-entropy steps anchored to the base weights.
/// With a non-empty `reference` (generic, neutral-centred samples) the weight
/// change is halved until accuracy there is within `max_generic_drop` of the base.
pub fn run_round(
    base: &LinearModel,
    policy: &CalibrationPolicy,
    adapt_cfg: &AdaptConfig,
    acted: &BTreeMap<usize, Vec<FeatureVector>>,
    reference: &[Sample],
    seed: u64,
) -> Result<(LinearModel, CalibrationRound), CalibrationError> {
    let dim = base.dimension();
    let rows = base.rows();
    for (&label, v) in acted {
        if label >= rows {
            return Err(CalibrationError::UnknownLabel(label));
        }
        if v.len() < 2 {
            return Err(CalibrationError::InsufficientSamples { label, count: v.len() });
        }
        if let Some(bad) = v.iter().find(|x| x.len() != dim) {
            return Err(CalibrationError::DimensionMismatch { label, expected: dim, actual: bad.len() });
        }
    }
    let (adapt, holdout) = split(acted, policy.holdout_fraction, seed);

    let mut model = base.clone();
    let neutral_label = base.label_set.neutral_index();
    let neutral = adapt
        .get(&neutral_label)
        .and_then(|v| mean_of(v.iter(), dim))
        .or_else(|| base.neutral_prior.clone())
        .unwrap_or_else(|| vec![0.0; dim]);
    model.neutral_prior = Some(neutral.clone());

    let cols = dim + 1;
    for (&label, v) in &adapt {
        let Some(proto) = mean_of(v.iter(), dim) else { continue };
        let s = model.scores(&centred(&FeatureVector::new(proto), &neutral));
        let rival = s.iter().enumerate().filter(|&(k, _)| k != label).map(|(_, &v)| v).fold(f64::NEG_INFINITY, f64::max);
        let deficit = (rival + adapt_cfg.prototype_margin - s[label]).max(0.0);
        model.weights_mut()[label * cols + dim] += adapt_cfg.prototype_rate * deficit;
    }

    let nref = &neutral;
    let data: Vec<Sample> = adapt.iter().flat_map(|(&l, v)| v.iter().map(move |x| Sample::new(centred(x, nref), l))).collect();
    if adapt_cfg.fine_tune_steps > 0 && !data.is_empty() {
        let max_sq = data.iter().map(|s| s.features.as_slice().iter().map(|v| v * v).sum::<f64>() + 1.0).fold(0.0, f64::max);
        let step = 1.0 / (0.5 * max_sq + adapt_cfg.anchor);
        let start: Vec<f64> = model.weights().to_vec();
        let w0 = base.weights();
        for _ in 0..adapt_cfg.fine_tune_steps {
            let (_, g) = logistic_loss_and_grad(model.weights(), rows, dim, &data, 0.0);
            let w = model.weights_mut();
            for i in 0..w.len() {
                let anchor_to = if i % cols == dim { start[i] } else { w0[i] };
                w[i] -= step * (g[i] + adapt_cfg.anchor * (w[i] - anchor_to));
            }
        }
    }

    let mut step_scale = 1.0;
    let mut reference_acc = None;
    if !reference.is_empty() {
        let before = reference_accuracy(base, reference);
        let adapted: Vec<f64> = model.weights().to_vec();
        let mut after = reference_accuracy(&model, reference);
        while after < before - adapt_cfg.max_generic_drop {
            step_scale = if step_scale > 1.0 / 64.0 { step_scale * 0.5 } else { 0.0 };
            let w0 = base.weights();
            for (i, w) in model.weights_mut().iter_mut().enumerate() {
                *w = w0[i] + step_scale * (adapted[i] - w0[i]);
            }
            after = reference_accuracy(&model, reference);
            if step_scale == 0.0 {
                break;
            }
        }
        reference_acc = Some((before, after));
    }

    let round = CalibrationRound {
        round_index: 0,
        requested_labels: acted.keys().copied().collect(),
        collected: acted.iter().map(|(&l, v)| (l, v.len())).collect(),
        per_label_recall: recall(&model, &holdout),
        step_scale,
        reference_accuracy: reference_acc,
    };
    Ok((model, round))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRound {
    pub round_index: usize,
    pub requested: Vec<String>,
    pub collected: BTreeMap<String, usize>,
    pub recall: Vec<(String, f64)>,
    pub decision: Decision,
    pub requested_next: Vec<String>,
    pub step_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_accuracy: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTranscript {
    pub policy: CalibrationPolicy,
    pub seed: u64,
    pub active_labels: Vec<String>,
    pub rounds: Vec<TranscriptRound>,
    pub outcome: Decision,
}

impl CalibrationTranscript {
    pub fn converged(&self) -> bool {
        self.outcome == Decision::Converged
    }
}

fn names(labels: &LabelSet, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| labels.name(i).unwrap_or("?").to_string()).collect()
}

/// Runs rounds until every active label reaches the recall target or the round budget is spent.
/// Samples accumulate across rounds; every round adapts from `base`.
pub fn run_calibration(
    base: &LinearModel,
    policy: &CalibrationPolicy,
    adapt_cfg: &AdaptConfig,
    active: &[usize],
    subject: &mut dyn SubjectSimulator,
    reference: &[Sample],
    seed: u64,
) -> Result<(LinearModel, CalibrationTranscript), CalibrationError> {
    let labels = &base.label_set;
    let mut transcript = CalibrationTranscript {
        policy: *policy,
        seed,
        active_labels: names(labels, active),
        rounds: Vec::new(),
        outcome: Decision::Converged,
    };
    if active.is_empty() {
        return Ok((base.clone(), transcript));
    }
    let mut acted: BTreeMap<usize, Vec<FeatureVector>> = BTreeMap::new();
    let mut requested: Vec<usize> = active.to_vec();
    let mut model = base.clone();
    for round_index in 0..policy.max_rounds {
        for &l in &requested {
            acted.entry(l).or_default().extend(subject.act(l, policy.samples_per_request));
        }
        let (adapted, mut round) = run_round(base, policy, adapt_cfg, &acted, reference, seed.wrapping_add(round_index as u64))?;
        round.round_index = round_index;
        round.requested_labels = requested.clone();
        let decision = next_request(&round, policy);
        let next = match &decision {
            Decision::Request(l) => l.clone(),
            _ => Vec::new(),
        };
        transcript.rounds.push(TranscriptRound {
            round_index,
            requested: names(labels, &requested),
            collected: round.collected.iter().map(|(&l, &n)| (labels.name(l).unwrap_or("?").to_string(), n)).collect(),
            recall: round.per_label_recall.iter().map(|(&l, &r)| (labels.name(l).unwrap_or("?").to_string(), r)).collect(),
            decision: decision.clone(),
            requested_next: names(labels, &next),
            step_scale: round.step_scale,
            reference_accuracy: round.reference_accuracy,
        });
        model = adapted;
        match decision {
            Decision::Request(next) => requested = next,
            d => {
                transcript.outcome = d;
                break;
            }
        }
    }
    Ok((model, transcript))
}
