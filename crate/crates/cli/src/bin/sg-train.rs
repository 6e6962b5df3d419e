//! Trains an expression model and writes it as JSON.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, ValueEnum};
use serde_json::json;
use sg_cli::{init_logging, print_json, read_json};
use sg_core::proto::LabelSet;
use sg_core::synth::{train_scene_model, ExpressionSpace, SceneTrainingConfig};
use sg_core::vision::{load_dataset, train, ModelKind, TrainConfig};

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    /// Rendered synthetic faces through the full HOG path.
    Scene,
    /// The benchmark feature-space expression model.
    Benchmark,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Logistic,
    Svm,
}

#[derive(Parser)]
#[command(name = "sg-train", about = "Train an expression model")]
struct Cli {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "logistic")]
    kind: Kind,
    #[arg(long, value_enum, default_value = "scene")]
    source: Source,
    /// JSON Lines dataset of {label, features}; overrides --source.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Scene training configuration JSON.
    #[arg(long)]
    training: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    space_seed: u64,
}

fn main() -> Result<()> {
    init_logging();
    let cli = Cli::parse();
    let kind = match cli.kind {
        Kind::Logistic => ModelKind::LogisticRegression,
        Kind::Svm => ModelKind::SvmLinear,
    };
    let tc = TrainConfig { seed: cli.seed, ..TrainConfig::default() };
    let model = if let Some(path) = &cli.dataset {
        let labels = LabelSet::default();
        train(kind, &labels, &load_dataset(path, &labels)?, &tc)?
    } else {
        match cli.source {
            Source::Scene => {
                let sc: SceneTrainingConfig = match &cli.training {
                    Some(p) => read_json(p)?,
                    None => SceneTrainingConfig::default(),
                };
                train_scene_model(&sc, kind, &tc)?
            }
            Source::Benchmark => ExpressionSpace::benchmark(cli.space_seed).train_model(kind, 10, 30, cli.seed)?,
        }
    };
    model.save(&cli.out)?;
    print_json(&json!({
        "out": cli.out,
        "kind": model.kind,
        "dimension": model.dimension(),
        "labels": model.label_set.names(),
        "has_geometry": model.geometry.is_some(),
    }))
}
