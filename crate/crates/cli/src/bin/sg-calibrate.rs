//! Iterative per-subject calibration against a simulated subject.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Parser;
use serde::Serialize;
use sg_cli::{init_logging, print_json, read_json};
use sg_core::calib::{run_calibration, CalibrationPolicy, CalibrationTranscript, FeatureSubject, SceneSubject, SubjectKind, SubjectSimulator};
use sg_core::engine::RunConfig;
use sg_core::synth::{scene_reference_set, ExpressionSpace, SceneTrainingConfig};
use sg_core::vision::{LinearModel, ModelKind};

#[derive(Parser)]
#[command(name = "sg-calibrate", about = "Calibrate a model to a simulated subject")]
struct Cli {
    /// Model file. Scene models (with HOG geometry) calibrate against rendered faces,
    /// feature-space models against the benchmark expression space.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Use a freshly trained benchmark feature-space model instead of --model.
    #[arg(long, conflicts_with = "model")]
    benchmark: bool,
    /// `synthetic:ideal|offset[:m]|noisy[:k]|permuted[:s]`.
    #[arg(long, default_value = "synthetic:ideal")]
    subject: SubjectKind,
    /// Policy JSON file.
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed of the benchmark expression space for feature-space models.
    #[arg(long, default_value_t = 1)]
    space_seed: u64,
    /// Labels to calibrate (names); all when omitted.
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<String>>,
    /// Where to write the calibrated model.
    #[arg(long)]
    out_model: Option<PathBuf>,
}

const REFERENCE_SEED: u64 = 0x5eed;

#[derive(Serialize)]
struct Output {
    subject: SubjectKind,
    transcript: CalibrationTranscript,
}

fn main() -> Result<()> {
    init_logging();
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let policy: CalibrationPolicy = match &cli.policy {
        Some(p) => read_json(p)?,
        None => cfg.calibrate.policy,
    };
    if let Err(e) = policy.validate() {
        bail!("invalid policy: {e}");
    }
    let space = ExpressionSpace::benchmark(cli.space_seed);
    let model = match (&cli.model, cli.benchmark) {
        (Some(p), _) => LinearModel::load(p)?,
        (None, true) => space.train_model(ModelKind::LogisticRegression, 10, 30, cli.space_seed)?,
        (None, false) => bail!("pass --model <file> or --benchmark"),
    };
    // generic data from people other than the subject, guarding against over-adaptation
    let reference_seed = cli.seed.wrapping_add(REFERENCE_SEED);
    let (mut subject, reference): (Box<dyn SubjectSimulator>, _) = if model.geometry.is_some() {
        let training = SceneTrainingConfig { labels: model.label_set.clone(), ..cfg.model.training.clone() };
        let reference = scene_reference_set(&training, reference_seed);
        (Box::new(SceneSubject::new(training, cli.subject, cli.seed)), reference)
    } else {
        if model.dimension() != space.dim() || model.label_set != *space.labels() {
            bail!("feature-space model does not match the benchmark space ({} dims)", space.dim());
        }
        let reference = space.reference_set(10, 20, reference_seed);
        (Box::new(FeatureSubject::new(space, cli.subject, cli.seed)), reference)
    };
    let active: Vec<usize> = match &cli.labels {
        None => (0..model.label_set.len()).collect(),
        Some(names) => names
            .iter()
            .filter(|n| !n.is_empty())
            .map(|n| model.label_set.index_of(n).ok_or_else(|| anyhow::anyhow!("unknown label `{n}`")))
            .collect::<Result<_>>()?,
    };
    let (adapted, transcript) = run_calibration(&model, &policy, &cfg.calibrate.adapt, &active, subject.as_mut(), &reference, cli.seed)?;
    if let Some(p) = cli.out_model {
        adapted.save(p)?;
    }
    print_json(&Output { subject: cli.subject, transcript })
}
