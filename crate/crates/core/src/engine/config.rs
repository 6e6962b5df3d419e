use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calib::{AdaptConfig, CalibrationPolicy};
use crate::device::{CaptureError, CaptureSource, DeviceConfig, DirectoryCapture};
use crate::engine::host::HostConfig;
use crate::net::LinkImpairment;
use crate::session::CurationParams;
use crate::synth::{train_scene_model, SceneConfig, SceneTrainingConfig, SyntheticScene};
use crate::vision::{LinearModel, ModelError, ModelKind, TrainConfig, TrainError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CaptureSpec {
    Synthetic(SceneConfig),
    Directory { path: PathBuf, #[serde(default)] looping: bool },
}

impl Default for CaptureSpec {
    fn default() -> Self {
        CaptureSpec::Synthetic(SceneConfig::default())
    }
}

impl FromStr for CaptureSpec {
    type Err = String;

    /// `synthetic` or `dir:<path>`.
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "synthetic" {
            Ok(CaptureSpec::Synthetic(SceneConfig::default()))
        } else if let Some(p) = s.strip_prefix("dir:") {
            Ok(CaptureSpec::Directory { path: p.into(), looping: false })
        } else {
            Err(format!("capture must be `synthetic` or `dir:<path>`, got `{s}`"))
        }
    }
}

impl CaptureSpec {
    pub fn open(&self) -> Result<Box<dyn CaptureSource>, CaptureError> {
        Ok(match self {
            CaptureSpec::Synthetic(cfg) => Box::new(SyntheticScene::new(cfg.clone())),
            CaptureSpec::Directory { path, looping } => Box::new(DirectoryCapture::open(path)?.looping(*looping)),
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("training: {0}")]
    Train(#[from] TrainError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    /// Model file; when absent a scene model is trained from `training`.
    pub path: Option<PathBuf>,
    pub kind: ModelKind,
    pub training: SceneTrainingConfig,
    pub train: TrainConfig,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { path: None, kind: ModelKind::LogisticRegression, training: SceneTrainingConfig::default(), train: TrainConfig::default() }
    }
}

impl ModelSection {
    pub fn load_or_train(&self) -> Result<LinearModel, ConfigError> {
        match &self.path {
            Some(p) => Ok(LinearModel::load(p)?),
            None => Ok(train_scene_model(&self.training, self.kind, &self.train)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkSection {
    pub host_bind: String,
    pub device_bind: String,
    /// Where the device sends frames when run on its own.
    pub host_addr: String,
    pub link: LinkImpairment,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            host_bind: "127.0.0.1:0".into(),
            device_bind: "127.0.0.1:0".into(),
            host_addr: "127.0.0.1:47000".into(),
            link: LinkImpairment::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionSection {
    pub root: PathBuf,
    /// Defaults to `session-<unix ms>`.
    pub id: Option<String>,
    pub max_bytes: Option<u64>,
}

impl Default for SessionSection {
    fn default() -> Self {
        Self { root: "sessions".into(), id: None, max_bytes: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrateSection {
    pub policy: CalibrationPolicy,
    pub adapt: AdaptConfig,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        Self { policy: CalibrationPolicy::default(), adapt: AdaptConfig::default() }
    }
}

/// The single JSON configuration shared by all subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub duration_s: f64,
    pub network: NetworkSection,
    pub capture: CaptureSpec,
    pub model: ModelSection,
    pub device: DeviceConfig,
    pub host: HostConfig,
    pub curate: CurationParams,
    pub session: SessionSection,
    pub calibrate: CalibrateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            duration_s: 10.0,
            network: NetworkSection::default(),
            capture: CaptureSpec::default(),
            model: ModelSection::default(),
            device: DeviceConfig::default(),
            host: HostConfig::default(),
            curate: CurationParams::default(),
            session: SessionSection::default(),
            calibrate: CalibrateSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let cfg: Self = serde_json::from_str(&text).map_err(|source| ConfigError::Json { path: path.into(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.duration_s > 0.0) {
            return Err(ConfigError::Invalid("duration_s must be positive".into()));
        }
        let loss = self.network.link.loss;
        if !(0.0..=1.0).contains(&loss) {
            return Err(ConfigError::Invalid(format!("loss {loss} not in [0,1]")));
        }
        for addr in [&self.network.host_bind, &self.network.device_bind, &self.network.host_addr] {
            addr.parse::<std::net::SocketAddr>().map_err(|e| ConfigError::Invalid(format!("address `{addr}`: {e}")))?;
        }
        if let Some(p) = &self.model.path {
            if !p.exists() {
                return Err(ConfigError::Invalid(format!("model file {} does not exist", p.display())));
            }
        }
        if let CaptureSpec::Directory { path, .. } = &self.capture {
            if !path.is_dir() {
                return Err(ConfigError::Invalid(format!("capture directory {} does not exist", path.display())));
            }
        }
        self.calibrate.policy.validate().map_err(ConfigError::Invalid)?;
        if !(self.device.nominal_fps > 0.0) {
            return Err(ConfigError::Invalid("device.nominal_fps must be positive".into()));
        }
        Ok(())
    }

    /// Applies the shared command-line overrides.
    pub fn apply_overrides(&mut self, seed: Option<u64>, duration_s: Option<f64>, loss: Option<f64>, latency_ms: Option<f64>) {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(d) = duration_s {
            self.duration_s = d;
        }
        if let Some(l) = loss {
            self.network.link.loss = l;
        }
        if let Some(l) = latency_ms {
            self.network.link.latency_ms = l;
        }
    }
}
