use std::collections::VecDeque;
use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cue::{CueEvent, CueFilter, CueFilterConfig, IndicatorDebouncer, IndicatorEvent};
use crate::device::percentile;
use crate::net::{ImpairedSender, LinkImpairment};
use crate::proto::{
    confidence_to_fixed, decode_packet, encode_result, Command, FramePacket, Packet, ResultPacket, MAX_DATAGRAM, NO_LABEL,
};
use crate::session::{SessionError, SessionEvent, SessionMeta, SessionWriter};
use crate::vision::{EmotionEstimate, LinearModel, Recognizer, RecognizerConfig, StageTimings, VisionError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HostConfig {
    pub recognizer: RecognizerConfig,
    pub cue: CueFilterConfig,
    pub indicator_debounce: usize,
    /// Frames older than the newest pending frame by more than this are dropped.
    pub stale_ms: u64,
    /// Receive buffer bound; the oldest frames go first when it overflows.
    pub max_pending: usize,
    pub record_frames: bool,
    /// Send stop-activity with the result of this many processed frames.
    pub stop_after_frames: Option<u64>,
    /// Exit after this long without traffic (once traffic has been seen).
    pub idle_timeout_ms: Option<u64>,
    pub link: LinkImpairment,
    pub seed: u64,
}

impl Default for HostConfig {
    fn default() -> Self {
        Self {
            recognizer: RecognizerConfig::default(),
            cue: CueFilterConfig::default(),
            indicator_debounce: 2,
            stale_ms: 100,
            max_pending: 32,
            record_frames: true,
            stop_after_frames: None,
            idle_timeout_ms: None,
            link: LinkImpairment::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum HostError {
    #[error("bind: {0}")]
    Bind(io::Error),
    #[error("socket: {0}")]
    Socket(#[from] io::Error),
    #[error("model: {0}")]
    Model(#[from] VisionError),
    #[error("session: {0}")]
    Session(#[from] SessionError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HostReport {
    pub frames_received: u64,
    pub frames_processed: u64,
    pub frames_stale_dropped: u64,
    pub frames_overflow_dropped: u64,
    pub frames_out_of_order: u64,
    pub malformed: u64,
    pub processing_errors: u64,
    pub recording_errors: u64,
    pub results_sent: u64,
    pub results_dropped_by_link: u64,
    pub faces_detected: u64,
    pub cues_fired: u64,
    pub indicator_events: u64,
    pub neutral_samples_absorbed: u64,
    pub mean_stage_us: StageTimings,
    pub mean_process_ms: Option<f64>,
    pub p95_process_ms: Option<f64>,
    pub elapsed_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub session: Option<SessionMeta>,
}

/// Everything the host derived from one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub estimate: EmotionEstimate,
    pub cue: Option<CueEvent>,
    pub indicator: Option<IndicatorEvent>,
    pub result: ResultPacket,
}

/// Per-session host engine.
pub struct Host {
    cfg: HostConfig,
    recognizer: Recognizer,
    filter: CueFilter,
    indicator: IndicatorDebouncer,
    session: Option<SessionWriter>,
    pending_command: Command,
    last_sequence: Option<u32>,
    report: HostReport,
    stage_sum: [u64; 5],
    process_ms: Vec<f64>,
}

impl Host {
    pub fn new(model: LinearModel, cfg: HostConfig) -> Result<Self, HostError> {
        let neutral = model.label_set.neutral_index();
        let recognizer = Recognizer::new(model, cfg.recognizer.clone())?;
        Ok(Self {
            filter: CueFilter::new(cfg.cue.clone(), neutral),
            indicator: IndicatorDebouncer::new(cfg.indicator_debounce),
            recognizer,
            cfg,
            session: None,
            pending_command: Command::None,
            last_sequence: None,
            report: HostReport::default(),
            stage_sum: [0; 5],
            process_ms: Vec::new(),
        })
    }

    pub fn with_session(mut self, writer: SessionWriter) -> Self {
        self.session = Some(writer);
        self
    }

    pub fn recognizer(&self) -> &Recognizer {
        &self.recognizer
    }

    pub fn report(&self) -> &HostReport {
        &self.report
    }

    /// Queues a command for the next result. Recalibrate also restarts neutral learning.
    pub fn issue_command(&mut self, command: Command) {
        if command == Command::Recalibrate {
            self.recognizer.reset_neutral();
        }
        self.pending_command = command;
    }

    /// Full per-frame pipeline: recognize, filter, record, build the reply.
    pub fn handle_frame(&mut self, packet: &FramePacket) -> FrameOutcome {
        let clock = Instant::now();
        let estimate = match self.recognizer.process(packet) {
            Ok(a) => {
                let t = a.timings;
                for (s, v) in self.stage_sum.iter_mut().zip([t.locate_us, t.register_us, t.normalize_us, t.hog_us, t.predict_us]) {
                    *s += v;
                }
                log::trace!(
                    "frame {} stages us: locate {} register {} normalize {} hog {} predict {}",
                    packet.sequence,
                    t.locate_us,
                    t.register_us,
                    t.normalize_us,
                    t.hog_us,
                    t.predict_us
                );
                self.report.neutral_samples_absorbed += a.neutral_updated as u64;
                a.estimate
            }
            Err(e) => {
                log::debug!("frame {}: {e}", packet.sequence);
                self.report.processing_errors += 1;
                EmotionEstimate::no_face(packet.sequence, packet.timestamp_us)
            }
        };
        self.report.faces_detected += estimate.face.is_some() as u64;
        let cue = self.filter.step(&estimate);
        let indicator = self.indicator.step(&estimate);
        self.report.cues_fired += cue.is_some() as u64;
        self.report.indicator_events += indicator.is_some() as u64;
        self.record(packet, &estimate, cue.as_ref(), indicator.as_ref());

        self.report.frames_processed += 1;
        if self.cfg.stop_after_frames.is_some_and(|n| self.report.frames_processed >= n) {
            self.pending_command = Command::StopActivity;
        }
        let mut result = ResultPacket::empty(packet.sequence);
        if let Some(f) = estimate.face {
            result.face_present = true;
            result.face_x = f.x.min(u16::MAX as u32) as u16;
            result.face_y = f.y.min(u16::MAX as u32) as u16;
            result.face_w = f.w.min(u16::MAX as u32) as u16;
            result.face_h = f.h.min(u16::MAX as u32) as u16;
        }
        if let Some(c) = &cue {
            result.label = c.label as u8;
            result.confidence = confidence_to_fixed(c.confidence);
        } else {
            result.label = NO_LABEL;
            result.confidence = confidence_to_fixed(estimate.confidence);
        }
        result.command = std::mem::replace(&mut self.pending_command, Command::None);
        self.process_ms.push(clock.elapsed().as_secs_f64() * 1000.0);
        FrameOutcome { estimate, cue, indicator, result }
    }

    fn record(&mut self, packet: &FramePacket, e: &EmotionEstimate, cue: Option<&CueEvent>, ind: Option<&IndicatorEvent>) {
        let Some(w) = self.session.as_mut() else { return };
        let mut go = || -> Result<(), SessionError> {
            if self.cfg.record_frames {
                w.record_frame(packet)?;
            }
            w.record_event(&SessionEvent::Estimate(e.clone()))?;
            if let Some(c) = cue {
                w.record_event(&SessionEvent::Cue(c.clone()))?;
            }
            if let Some(i) = ind {
                w.record_event(&SessionEvent::Indicator(i.clone()))?;
            }
            Ok(())
        };
        if let Err(e) = go() {
            log::warn!("recording frame {}: {e}", packet.sequence);
            self.report.recording_errors += 1;
        }
    }

    /// Serves frames from `socket` until `duration`, `stop`, or the idle timeout.
    pub fn serve(&mut self, socket: &UdpSocket, duration: Option<Duration>, stop: &AtomicBool) -> Result<(), HostError> {
        let start = Instant::now();
        let mut sender = ImpairedSender::new(socket, self.cfg.link, self.cfg.seed)?;
        let mut buf = vec![0u8; MAX_DATAGRAM + 1];
        let mut pending: VecDeque<(FramePacket, SocketAddr)> = VecDeque::new();
        let mut last_traffic: Option<Instant> = None;
        loop {
            if stop.load(Ordering::Relaxed) || duration.is_some_and(|d| start.elapsed() >= d) {
                break;
            }
            if let (Some(t), Some(idle)) = (last_traffic, self.cfg.idle_timeout_ms) {
                if t.elapsed() >= Duration::from_millis(idle) {
                    break;
                }
            }
            socket.set_read_timeout(Some(Duration::from_millis(10)))?;
            let mut got = match socket.recv_from(&mut buf) {
                Ok(x) => Some(x),
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => None,
                Err(e) if e.kind() == io::ErrorKind::ConnectionReset => None,
                Err(e) => return Err(e.into()),
            };
            socket.set_nonblocking(true)?;
            while let Some((n, from)) = got {
                last_traffic = Some(Instant::now());
                match decode_packet(&buf[..n]) {
                    Ok(Packet::Frame(f)) => {
                        self.report.frames_received += 1;
                        if pending.len() >= self.cfg.max_pending.max(1) {
                            pending.pop_front();
                            self.report.frames_overflow_dropped += 1;
                        }
                        pending.push_back((f, from));
                    }
                    _ => self.report.malformed += 1,
                }
                got = match socket.recv_from(&mut buf) {
                    Ok(x) => Some(x),
                    Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut | io::ErrorKind::ConnectionReset) => None,
                    Err(e) => {
                        socket.set_nonblocking(false)?;
                        return Err(e.into());
                    }
                };
            }
            socket.set_nonblocking(false)?;
            if pending.is_empty() {
                continue;
            }

            let newest = pending.iter().map(|(f, _)| f.timestamp_us).max().unwrap_or(0);
            let horizon = newest.saturating_sub(self.cfg.stale_ms * 1000);
            let mut batch: Vec<(FramePacket, SocketAddr)> = pending.drain(..).collect();
            batch.sort_by_key(|(f, _)| f.sequence);
            for (frame, from) in batch {
                if frame.timestamp_us < horizon {
                    self.report.frames_stale_dropped += 1;
                    continue;
                }
                if self.last_sequence.is_some_and(|s| frame.sequence <= s) {
                    self.report.frames_out_of_order += 1;
                    continue;
                }
                self.last_sequence = Some(frame.sequence);
                let out = self.handle_frame(&frame);
                let bytes = encode_result(&out.result).expect("host builds valid results");
                if sender.send_to(&bytes, from)? {
                    self.report.results_sent += 1;
                } else {
                    self.report.results_dropped_by_link += 1;
                }
            }
        }
        self.report.elapsed_s += start.elapsed().as_secs_f64();
        Ok(())
    }

    /// Closes the session (if any) and returns the final report.
    pub fn finish(mut self, duration_ms: Option<u64>) -> Result<HostReport, HostError> {
        let n = self.report.frames_processed.max(1);
        let s = self.stage_sum;
        self.report.mean_stage_us = StageTimings {
            locate_us: s[0] / n,
            register_us: s[1] / n,
            normalize_us: s[2] / n,
            hog_us: s[3] / n,
            predict_us: s[4] / n,
        };
        if !self.process_ms.is_empty() {
            self.report.mean_process_ms = Some(self.process_ms.iter().sum::<f64>() / self.process_ms.len() as f64);
            self.report.p95_process_ms = percentile(&self.process_ms, 95.0);
        }
        if let Some(mut w) = self.session.take() {
            self.report.session = Some(w.close(duration_ms)?);
        }
        Ok(self.report)
    }
}
