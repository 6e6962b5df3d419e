use std::net::UdpSocket;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{run_device, CaptureError, DeviceError, DeviceReport, RenderRecord, ThrottleSample};
use crate::engine::config::{ConfigError, RunConfig};
use crate::engine::host::{Host, HostError, HostReport};
use crate::session::{save_plot, timeline, unix_ms, EmotionalMoment, SessionError, SessionWriter, WriterLimits};
use crate::vision::LinearModel;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("host: {0}")]
    Host(#[from] HostError),
    #[error("device: {0}")]
    Device(#[from] DeviceError),
    #[error("capture: {0}")]
    Capture(#[from] CaptureError),
    #[error("session: {0}")]
    Session(#[from] SessionError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("host thread panicked")]
    HostPanic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frames_sent: u64,
    pub frames_received: u64,
    pub frames_dropped: u64,
    pub frames_processed: u64,
    pub results_received: u64,
    pub mean_latency_ms: Option<f64>,
    pub p95_latency_ms: Option<f64>,
    pub achieved_fps: f64,
    pub fps_timeline: Vec<u32>,
    pub cues_fired: u64,
    pub cues_rendered: u64,
    pub throttle_timeline: Vec<ThrottleSample>,
    pub datagram_bound_violations: u64,
    pub session_dir: Option<PathBuf>,
    pub moments: Vec<EmotionalMoment>,
    pub device: DeviceReport,
    pub host: HostReport,
}

/// Output of [`run_e2e`] beyond the metrics.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub metrics: MetricsReport,
    pub render_log: Vec<RenderRecord>,
}

/// Runs host and device over loopback, records and curates the session.
pub fn run_e2e(cfg: &RunConfig, model: LinearModel) -> Result<RunArtifacts, RunError> {
    cfg.validate()?;
    let host_socket = UdpSocket::bind(&cfg.network.host_bind).map_err(HostError::Bind)?;
    let device_socket = UdpSocket::bind(&cfg.network.device_bind)?;
    let host_addr = host_socket.local_addr()?;

    let session_id = cfg.session.id.clone().unwrap_or_else(|| format!("session-{}", unix_ms()));
    let session_dir = cfg.session.root.join(&session_id);
    let snapshot = serde_json::to_value(cfg).unwrap_or_default();
    let writer = SessionWriter::create(&session_dir, &session_id, model.label_set.clone(), snapshot)?
        .with_limits(WriterLimits { max_bytes: cfg.session.max_bytes });

    let mut device_cfg = cfg.device.clone();
    device_cfg.label_set = model.label_set.clone();
    device_cfg.link = cfg.network.link;
    device_cfg.seed = cfg.seed;
    let mut host_cfg = cfg.host.clone();
    host_cfg.link = cfg.network.link;
    host_cfg.seed = cfg.seed.wrapping_add(0x5eed);

    let host = Host::new(model, host_cfg)?.with_session(writer);
    let stop = Arc::new(AtomicBool::new(false));
    let host_stop = stop.clone();
    let host_thread = std::thread::Builder::new().name("sg-host".into()).spawn(move || {
        let mut host = host;
        let served = host.serve(&host_socket, None, &host_stop);
        (host, served)
    })?;

    let mut capture = cfg.capture.open()?;
    let mut render_log = Vec::new();
    let device = run_device(
        &device_cfg,
        capture.as_mut(),
        &device_socket,
        host_addr,
        Duration::from_secs_f64(cfg.duration_s),
        &mut |r| render_log.push(r.clone()),
        None,
    );
    // let in-flight frames land before stopping the host
    std::thread::sleep(Duration::from_millis(150) + Duration::from_secs_f64((cfg.network.link.latency_ms + cfg.network.link.jitter_ms) / 1000.0));
    stop.store(true, Ordering::Relaxed);
    let (host, served) = host_thread.join().map_err(|_| RunError::HostPanic)?;
    let device = device?;
    served?;
    let host_report = host.finish(Some((device.elapsed_s * 1000.0).round() as u64))?;

    let tl = timeline(&session_dir, &cfg.curate)?;
    std::fs::write(session_dir.join("timeline.json"), serde_json::to_vec_pretty(&tl).unwrap_or_default())?;
    save_plot(&tl, &session_dir.join("timeline.png"))?;

    let metrics = MetricsReport {
        frames_sent: device.frames_sent,
        frames_received: host_report.frames_received,
        frames_dropped: device.frames_sent.saturating_sub(host_report.frames_received),
        frames_processed: host_report.frames_processed,
        results_received: device.results_received,
        mean_latency_ms: device.mean_latency_ms,
        p95_latency_ms: device.p95_latency_ms,
        achieved_fps: device.achieved_fps,
        fps_timeline: device.fps_timeline.clone(),
        cues_fired: host_report.cues_fired,
        cues_rendered: device.cues_rendered,
        throttle_timeline: device.throttle_timeline.clone(),
        datagram_bound_violations: device.datagram_bound_violations,
        session_dir: Some(session_dir),
        moments: tl.moments,
        device,
        host: host_report,
    };
    Ok(RunArtifacts { metrics, render_log })
}
