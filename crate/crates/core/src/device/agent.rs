use std::collections::HashMap;
use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cue::{CueEvent, IndicatorDebouncer};
use crate::device::capture::{CaptureError, CaptureSource};
use crate::device::crop::{CropConfig, CropMode, CropState};
use crate::device::render::{render_cue, CueRenderSpec, RenderError, RenderInput, RenderRecord};
use crate::device::thermal::{ThermalConfig, ThermalState, ThrottleSample};
use crate::device::transmit::{select_transmission, LOW_RES};
use crate::geom::Rect;
use crate::net::{ImpairedSender, LinkImpairment};
use crate::proto::{decode_packet, encode_frame, Command, LabelSet, Packet, ResultPacket, MAX_DATAGRAM, NO_LABEL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Pacing {
    /// Wall-clock frame timing.
    RealTime,
    /// Virtual timestamps; each frame waits for its result (or the timeout).
    Lockstep { result_timeout_ms: u64 },
}

impl Default for Pacing {
    fn default() -> Self {
        Pacing::RealTime
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceConfig {
    pub nominal_fps: f64,
    pub low_res: (u32, u32),
    pub crop: CropConfig,
    pub thermal: ThermalConfig,
    /// Seconds between thermal updates.
    pub thermal_step_s: f64,
    pub render: CueRenderSpec,
    pub label_set: LabelSet,
    pub indicator_debounce: usize,
    pub pacing: Pacing,
    pub link: LinkImpairment,
    pub seed: u64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            nominal_fps: 30.0,
            low_res: LOW_RES,
            crop: CropConfig::default(),
            thermal: ThermalConfig::default(),
            thermal_step_s: 1.0,
            render: CueRenderSpec::default(),
            label_set: LabelSet::default(),
            indicator_debounce: 2,
            pacing: Pacing::RealTime,
            link: LinkImpairment::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("socket: {0}")]
    Socket(#[from] io::Error),
    #[error("capture: {0}")]
    Capture(#[from] CaptureError),
    #[error("render: {0}")]
    Render(#[from] RenderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    DurationElapsed,
    StopCommand,
    CaptureExhausted,
    Interrupted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceReport {
    pub frames_sent: u64,
    pub frames_dropped_by_link: u64,
    pub full_frames: u64,
    pub crop_frames: u64,
    pub max_datagram_bytes: usize,
    pub datagram_bound_violations: u64,
    pub results_received: u64,
    pub results_unmatched: u64,
    pub packets_malformed: u64,
    pub latency_samples: usize,
    pub mean_latency_ms: Option<f64>,
    pub p95_latency_ms: Option<f64>,
    pub elapsed_s: f64,
    pub achieved_fps: f64,
    /// Frames sent in each whole second of the run.
    pub fps_timeline: Vec<u32>,
    pub throttle_timeline: Vec<ThrottleSample>,
    pub cues_rendered: u64,
    pub indicator_transitions: u64,
    pub exit: ExitReason,
}

/// Nearest-rank percentile of unsorted samples.
pub fn percentile(samples: &[f64], p: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    Some(v[rank.min(v.len()) - 1])
}

struct Agent<'a> {
    cfg: &'a DeviceConfig,
    crop: CropState,
    indicator: IndicatorDebouncer,
    sink: &'a mut dyn FnMut(&RenderRecord),
    in_flight: HashMap<u32, Instant>,
    latencies: Vec<f64>,
    last_applied: Option<u32>,
    report: DeviceReport,
    stop: bool,
}

impl Agent<'_> {
    fn handle_datagram(&mut self, bytes: &[u8], now_us: u64) -> Result<Option<u32>, DeviceError> {
        let res = match decode_packet(bytes) {
            Ok(Packet::Result(r)) => r,
            _ => {
                self.report.packets_malformed += 1;
                return Ok(None);
            }
        };
        let Some(sent_at) = self.in_flight.remove(&res.sequence) else {
            self.report.results_unmatched += 1;
            return Ok(None);
        };
        self.report.results_received += 1;
        self.latencies.push(sent_at.elapsed().as_secs_f64() * 1000.0);
        self.apply(&res, now_us)?;
        Ok(Some(res.sequence))
    }

    fn apply(&mut self, res: &ResultPacket, now_us: u64) -> Result<(), DeviceError> {
        if res.command == Command::StopActivity {
            self.stop = true;
        }
        if self.last_applied.is_some_and(|s| res.sequence <= s) {
            return Ok(());
        }
        self.last_applied = Some(res.sequence);
        let face = res.face_present.then(|| Rect::new(res.face_x as u32, res.face_y as u32, res.face_w as u32, res.face_h as u32));
        let face = face.filter(|r| !r.is_empty()).map(|r| {
            let (sw, sh) = self.crop.source();
            r.clamp_to(sw, sh)
        });
        self.crop.update(face);
        if let Some(ev) = self.indicator.step_presence(face.is_some(), face, now_us) {
            self.report.indicator_transitions += 1;
            for rec in render_cue(&self.cfg.render, &self.cfg.label_set, RenderInput::Indicator(&ev))? {
                (self.sink)(&rec);
            }
        }
        if res.label != NO_LABEL {
            let ev = CueEvent {
                label: res.label as usize,
                confidence: res.confidence_f64(),
                fired_at_us: now_us,
                first_sequence: res.sequence,
                last_sequence: res.sequence,
            };
            self.report.cues_rendered += 1;
            for rec in render_cue(&self.cfg.render, &self.cfg.label_set, RenderInput::Cue(&ev))? {
                (self.sink)(&rec);
            }
        }
        Ok(())
    }
}

/// Runs the device loop until `duration`, a stop command, exhausted capture or `interrupt`.
pub fn run_device(
    cfg: &DeviceConfig,
    capture: &mut dyn CaptureSource,
    socket: &UdpSocket,
    host: SocketAddr,
    duration: Duration,
    sink: &mut dyn FnMut(&RenderRecord),
    interrupt: Option<&AtomicBool>,
) -> Result<DeviceReport, DeviceError> {
    cfg.render.validate(&cfg.label_set)?;
    let (sw, sh) = capture.geometry();
    let mut sender = ImpairedSender::new(socket, cfg.link, cfg.seed)?;
    let mut thermal = ThermalState::new(cfg.thermal);
    let mut agent = Agent {
        cfg,
        crop: CropState::new(cfg.crop, sw, sh),
        indicator: IndicatorDebouncer::new(cfg.indicator_debounce),
        sink,
        in_flight: HashMap::new(),
        latencies: Vec::new(),
        last_applied: None,
        report: DeviceReport {
            frames_sent: 0,
            frames_dropped_by_link: 0,
            full_frames: 0,
            crop_frames: 0,
            max_datagram_bytes: 0,
            datagram_bound_violations: 0,
            results_received: 0,
            results_unmatched: 0,
            packets_malformed: 0,
            latency_samples: 0,
            mean_latency_ms: None,
            p95_latency_ms: None,
            elapsed_s: 0.0,
            achieved_fps: 0.0,
            fps_timeline: Vec::new(),
            throttle_timeline: Vec::new(),
            cues_rendered: 0,
            indicator_transitions: 0,
            exit: ExitReason::DurationElapsed,
        },
        stop: false,
    };

    let start = Instant::now();
    let lockstep = match cfg.pacing {
        Pacing::RealTime => None,
        Pacing::Lockstep { result_timeout_ms } => Some(Duration::from_millis(result_timeout_ms)),
    };
    let mut virtual_s = 0.0f64;
    let mut next_due = start;
    let mut fps_factor = 1.0;
    let mut frames_since_thermal = 0u64;
    let mut last_thermal_us = 0u64;
    let mut buf = vec![0u8; MAX_DATAGRAM + 1];
    let mut seq: u32 = 0;

    let now_us = |virtual_s: f64| if lockstep.is_some() { (virtual_s * 1e6).round() as u64 } else { start.elapsed().as_micros() as u64 };

    loop {
        if interrupt.is_some_and(|f| f.load(Ordering::Relaxed)) {
            agent.report.exit = ExitReason::Interrupted;
            break;
        }
        if agent.stop {
            agent.report.exit = ExitReason::StopCommand;
            break;
        }
        let ts = now_us(virtual_s);
        if ts >= duration.as_micros() as u64 {
            break;
        }

        let thermal_step_us = (cfg.thermal_step_s * 1e6) as u64;
        while ts >= last_thermal_us + thermal_step_us {
            last_thermal_us += thermal_step_us;
            fps_factor = thermal.step(frames_since_thermal, cfg.thermal_step_s);
            frames_since_thermal = 0;
            agent.report.throttle_timeline.push(ThrottleSample {
                t_s: last_thermal_us as f64 / 1e6,
                temperature: thermal.temperature,
                fps_factor,
            });
        }

        let Some(frame) = capture.capture(ts)? else {
            agent.report.exit = ExitReason::CaptureExhausted;
            break;
        };
        let packet = select_transmission(&agent.crop, &frame, cfg.low_res, seq, ts);
        match packet.kind {
            crate::proto::FrameKind::FullFrame => agent.report.full_frames += 1,
            crate::proto::FrameKind::FaceCrop => agent.report.crop_frames += 1,
        }
        debug_assert_eq!(packet.kind == crate::proto::FrameKind::FullFrame, agent.crop.mode() == CropMode::FullFrame);
        let bytes = match encode_frame(&packet) {
            Ok(b) => b,
            Err(e) => {
                log::warn!("frame {seq} not encodable: {e}");
                agent.report.datagram_bound_violations += 1;
                seq = seq.wrapping_add(1);
                continue;
            }
        };
        if bytes.len() > MAX_DATAGRAM {
            agent.report.datagram_bound_violations += 1;
        }
        agent.report.max_datagram_bytes = agent.report.max_datagram_bytes.max(bytes.len());
        agent.in_flight.insert(seq, Instant::now());
        if !sender.send_to(&bytes, host)? {
            agent.report.frames_dropped_by_link += 1;
        }
        agent.report.frames_sent += 1;
        frames_since_thermal += 1;
        let second = (ts / 1_000_000) as usize;
        if agent.report.fps_timeline.len() <= second {
            agent.report.fps_timeline.resize(second + 1, 0);
        }
        agent.report.fps_timeline[second] += 1;

        let period = Duration::from_secs_f64(1.0 / (cfg.nominal_fps * fps_factor));
        match lockstep {
            Some(timeout) => {
                let deadline = Instant::now() + timeout;
                loop {
                    let left = deadline.saturating_duration_since(Instant::now());
                    if left.is_zero() {
                        break;
                    }
                    socket.set_read_timeout(Some(left))?;
                    match socket.recv_from(&mut buf) {
                        Ok((n, _)) => {
                            if agent.handle_datagram(&buf[..n], ts)? == Some(seq) {
                                break;
                            }
                        }
                        Err(e) if is_timeout(&e) => break,
                        Err(e) => return Err(e.into()),
                    }
                }
                agent.in_flight.remove(&seq);
                virtual_s += period.as_secs_f64();
            }
            None => {
                next_due += period;
                loop {
                    let now = Instant::now();
                    if now >= next_due || agent.stop {
                        break;
                    }
                    socket.set_read_timeout(Some(next_due - now))?;
                    match socket.recv_from(&mut buf) {
                        Ok((n, _)) => {
                            agent.handle_datagram(&buf[..n], start.elapsed().as_micros() as u64)?;
                        }
                        Err(e) if is_timeout(&e) => break,
                        Err(e) => return Err(e.into()),
                    }
                }
                if Instant::now() > next_due + period {
                    // fell behind; do not burst to catch up
                    next_due = Instant::now();
                }
                prune(&mut agent.in_flight, Duration::from_secs(2));
            }
        }
        seq = seq.wrapping_add(1);
    }

    let elapsed = match lockstep {
        Some(_) => virtual_s,
        None => start.elapsed().as_secs_f64(),
    };
    drop(sender);
    let mut report = agent.report;
    report.elapsed_s = elapsed;
    report.achieved_fps = if elapsed > 0.0 { report.frames_sent as f64 / elapsed } else { 0.0 };
    report.latency_samples = agent.latencies.len();
    if !agent.latencies.is_empty() {
        report.mean_latency_ms = Some(agent.latencies.iter().sum::<f64>() / agent.latencies.len() as f64);
        report.p95_latency_ms = percentile(&agent.latencies, 95.0);
    }
    Ok(report)
}

fn prune(in_flight: &mut HashMap<u32, Instant>, max_age: Duration) {
    if in_flight.len() > 256 {
        in_flight.retain(|_, t| t.elapsed() < max_age);
    }
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
}
