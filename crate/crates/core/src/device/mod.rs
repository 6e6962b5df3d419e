//! Wearable-side agent: capture, dual-resolution transmission with a
//! smoothed face crop, thermal throttling and cue rendering.

mod agent;
mod capture;
mod crop;
mod render;
mod thermal;
mod transmit;

pub use agent::{percentile, run_device, DeviceConfig, DeviceError, DeviceReport, ExitReason, Pacing};
pub use capture::{load_gray, save_pgm, CaptureError, CaptureSource, DirectoryCapture};
pub use crop::{CropConfig, CropMode, CropState};
pub use render::{render_cue, CueRenderSpec, IndicatorGeometry, IndicatorStyle, Modality, RenderError, RenderInput, RenderRecord};
pub use thermal::{fps_factor, simulate_sustained_load, step_thermal, ThermalConfig, ThermalState, ThrottleSample};
pub use transmit::{downsample_factor, select_transmission, LOW_RES};
