//! Offset-subject benchmark for runtime neutral subtraction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sg_core::synth::ExpressionSpace;
use sg_core::vision::{predict, FeatureVector, ModelKind, NeutralState};

pub const OFFSET: f64 = 1.0;

#[derive(Debug, Clone, Copy)]
pub struct SeedResult {
    pub seed: u64,
    /// Neutral estimate learned at runtime from a mostly-neutral stream.
    pub converged: f64,
    /// No subtraction at all.
    pub plain: f64,
    /// Population prior only, never updated.
    pub prior: f64,
    pub absorbed: u64,
}

/// Trains on the population, then meets one subject carrying an extra constant
/// offset. 600 warm-up frames (two thirds neutral) drive the gated EMA; the
/// three variants are then scored on the same 400 held-out frames.
pub fn run(seed: u64) -> SeedResult {
    let space = ExpressionSpace::benchmark(seed);
    let model = space.train_model(ModelKind::LogisticRegression, 10, 30, seed).unwrap();
    let labels = space.labels().len();
    let n = space.labels().neutral_index();
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let subject = space.subject(&mut rng).with_offset(&vec![OFFSET; space.dim()]);
    let prior = model.neutral_state(NeutralState::DEFAULT_LEARNING_RATE, NeutralState::DEFAULT_GATE);
    let mut live = prior.clone();
    for i in 0..600 {
        let l = if i % 3 == 0 { rng.random_range(0..labels) } else { n };
        let f = space.sample(l, &subject, &mut rng);
        let e = predict(&model, &f, &live).unwrap();
        live.update(&f, &e, n).unwrap();
    }
    let zero = NeutralState::new(FeatureVector::zeros(space.dim()), 0.05, 0.6);
    let (mut a, mut b, mut c, mut total) = (0, 0, 0, 0);
    for l in 0..labels {
        for _ in 0..50 {
            let f = space.sample(l, &subject, &mut rng);
            a += (predict(&model, &f, &live).unwrap().label == Some(l)) as usize;
            b += (predict(&model, &f, &zero).unwrap().label == Some(l)) as usize;
            c += (predict(&model, &f, &prior).unwrap().label == Some(l)) as usize;
            total += 1;
        }
    }
    let t = total as f64;
    SeedResult { seed, converged: a as f64 / t, plain: b as f64 / t, prior: c as f64 / t, absorbed: live.samples_absorbed() }
}
