//! Loopback run helpers shared by the end-to-end and acceptance tests.

use std::path::Path;
use std::sync::{Mutex, MutexGuard};

use sg_core::device::Pacing;
use sg_core::engine::{run_e2e, RunArtifacts, RunConfig};
use sg_core::synth::{SceneConfig, ScriptSegment};
use sg_core::engine::CaptureSpec;
use sg_core::session::{timeline, EmotionalMoment, SessionReader, SessionEvent};

/// Loopback runs take turns: real-time ones measure wall-clock rates.
pub fn run_lock() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

pub fn config(root: &Path, id: &str, duration_s: f64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.duration_s = duration_s;
    cfg.session.root = root.to_path_buf();
    cfg.session.id = Some(id.into());
    cfg
}

pub fn lockstep(cfg: &mut RunConfig, timeout_ms: u64) {
    cfg.device.pacing = Pacing::Lockstep { result_timeout_ms: timeout_ms };
}

/// A scene in which no face ever appears.
pub fn empty_scene(cfg: &mut RunConfig) {
    let scene = SceneConfig { script: vec![ScriptSegment::new(0, 10_000, None)], ..SceneConfig::default() };
    cfg.capture = CaptureSpec::Synthetic(scene);
}

pub fn run(cfg: &RunConfig) -> RunArtifacts {
    run_e2e(cfg, super::scene_model()).expect("run completes")
}

/// Scripted expression segments `(label, start_ms, end_ms)` that fall inside `duration_ms`.
pub fn scripted_segments(scene: &SceneConfig, duration_ms: u64) -> Vec<(String, f64, f64)> {
    let period = scene.repeat_ms.unwrap_or(duration_ms);
    let mut out = Vec::new();
    let mut base = 0;
    while base < duration_ms {
        for s in &scene.script {
            let Some(label) = &s.label else { continue };
            if label == &scene.neutral_label || base + s.end_ms > duration_ms {
                continue;
            }
            out.push((label.clone(), (base + s.start_ms) as f64, (base + s.end_ms) as f64));
        }
        base += period;
    }
    out
}

/// Largest start/end error between scripted segments and curated moments
/// (infinite when a segment has no moment of its label).
pub fn alignment_error(segments: &[(String, f64, f64)], moments: &[EmotionalMoment]) -> f64 {
    let mut worst: f64 = 0.0;
    for (label, start, end) in segments {
        let best = moments
            .iter()
            .filter(|m| &m.label_name == label)
            .map(|m| (m.start_ms - start).abs().max((m.end_ms - end).abs()))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(best);
    }
    if moments.len() != segments.len() {
        return f64::INFINITY;
    }
    worst
}

/// Checks a recorded session is readable and consistent; returns (frames, estimates).
pub fn check_session(dir: &Path) -> Result<(usize, usize), String> {
    let r = SessionReader::open(dir).map_err(|e| e.to_string())?;
    if !r.meta().closed {
        return Err("session not closed".into());
    }
    let frames = r.frames();
    if frames.windows(2).any(|w| w[1].sequence <= w[0].sequence || w[1].timestamp_us < w[0].timestamp_us) {
        return Err("frame index not increasing".into());
    }
    for i in [0, frames.len() / 2, frames.len().saturating_sub(1)] {
        if i < frames.len() {
            r.read_frame(i).map_err(|e| e.to_string())?;
        }
    }
    let events = r.events().map_err(|e| e.to_string())?;
    let estimates = events.iter().filter(|e| matches!(e, SessionEvent::Estimate(_))).count();
    timeline(dir, &Default::default()).map_err(|e| e.to_string())?;
    Ok((frames.len(), estimates))
}
