//! Host engine, run configuration and loopback end-to-end orchestration.

mod config;
mod e2e;
mod host;

pub use config::{CalibrateSection, CaptureSpec, ConfigError, ModelSection, NetworkSection, RunConfig, SessionSection};
pub use e2e::{run_e2e, MetricsReport, RunArtifacts, RunError};
pub use host::{FrameOutcome, Host, HostConfig, HostError, HostReport};
