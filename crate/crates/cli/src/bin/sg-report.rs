//! Summarizes a recorded session: traffic, recognition and cue statistics.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;
use serde::Serialize;
use sg_cli::{init_logging, print_json};
use sg_core::proto::FrameKind;
use sg_core::session::{curate, CurationParams, EmotionalMoment, SessionEvent, SessionMeta, SessionReader, SessionStatus};

#[derive(Parser)]
#[command(name = "sg-report", about = "Report pipeline statistics of a recorded session")]
struct Cli {
    #[arg(long)]
    session: PathBuf,
}

#[derive(Serialize)]
struct Report {
    meta: SessionMeta,
    frames: usize,
    full_frames: usize,
    crop_frames: usize,
    bytes: u64,
    /// Frames per whole second of session time.
    fps_timeline: Vec<u32>,
    mean_fps: Option<f64>,
    estimates: usize,
    face_present_fraction: Option<f64>,
    label_histogram: BTreeMap<String, usize>,
    cues: Vec<(f64, String, f64)>,
    indicator_transitions: usize,
    moments: Vec<EmotionalMoment>,
}

fn main() -> Result<()> {
    init_logging();
    let cli = Cli::parse();
    let r = SessionReader::open(&cli.session)?;
    let meta = r.meta().clone();
    let labels = meta.label_set.clone();
    let frames = r.frames();
    let mut fps = Vec::new();
    for f in frames {
        let s = (f.timestamp_us / 1_000_000) as usize;
        if fps.len() <= s {
            fps.resize(s + 1, 0u32);
        }
        fps[s] += 1;
    }
    let span_s = match (frames.first(), frames.last()) {
        (Some(a), Some(b)) if b.timestamp_us > a.timestamp_us => Some((b.timestamp_us - a.timestamp_us) as f64 / 1e6),
        _ => None,
    };
    let events = if meta.status == SessionStatus::Deleted { Vec::new() } else { r.events()? };
    let mut estimates = Vec::new();
    let mut cues = Vec::new();
    let mut transitions = 0;
    for e in events {
        match e {
            SessionEvent::Estimate(e) => estimates.push(e),
            SessionEvent::Cue(c) => cues.push((c.fired_at_us as f64 / 1000.0, labels.name(c.label).unwrap_or("?").to_string(), c.confidence)),
            SessionEvent::Indicator(_) => transitions += 1,
        }
    }
    let mut hist = BTreeMap::new();
    for e in &estimates {
        if let Some(l) = e.label {
            *hist.entry(labels.name(l).unwrap_or("?").to_string()).or_insert(0) += 1;
        }
    }
    let with_face = estimates.iter().filter(|e| e.face.is_some()).count();
    let moments = curate(&estimates, &labels, &CurationParams::default(), Some(meta.duration_ms * 1000));
    print_json(&Report {
        frames: frames.len(),
        full_frames: frames.iter().filter(|f| f.kind == FrameKind::FullFrame).count(),
        crop_frames: frames.iter().filter(|f| f.kind == FrameKind::FaceCrop).count(),
        bytes: frames.iter().map(|f| f.payload_len()).sum(),
        fps_timeline: fps,
        mean_fps: span_s.map(|s| (frames.len() - 1) as f64 / s),
        estimates: estimates.len(),
        face_present_fraction: (!estimates.is_empty()).then(|| with_face as f64 / estimates.len() as f64),
        label_histogram: hist,
        cues,
        indicator_transitions: transitions,
        moments,
        meta,
    })
}
