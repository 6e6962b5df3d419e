#![allow(dead_code)]

pub mod crop_sim;
pub mod cue_oracle;
pub mod curate_oracle;
pub mod hog_oracle;
pub mod neutral_bench;
pub mod packets;
pub mod runs;
pub mod streams;

use std::sync::OnceLock;

use sg_core::synth::{train_scene_model, SceneTrainingConfig};
use sg_core::vision::{LinearModel, ModelKind, TrainConfig};

/// Scene model trained once per test binary.
pub fn scene_model() -> LinearModel {
    static MODEL: OnceLock<LinearModel> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            train_scene_model(&SceneTrainingConfig::default(), ModelKind::LogisticRegression, &TrainConfig::default())
                .expect("scene model trains")
        })
        .clone()
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}
