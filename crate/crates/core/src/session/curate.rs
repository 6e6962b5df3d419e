use serde::{Deserialize, Serialize};

use crate::proto::LabelSet;
use crate::vision::EmotionEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationParams {
    pub min_duration_ms: u64,
    pub merge_gap_ms: u64,
    pub top_k: usize,
    pub confidence_floor: f64,
}

impl Default for CurationParams {
    fn default() -> Self {
        Self { min_duration_ms: 1000, merge_gap_ms: 500, top_k: 10, confidence_floor: 0.65 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionalMoment {
    pub label: usize,
    pub label_name: String,
    pub start_ms: f64,
    pub end_ms: f64,
    pub mean_confidence: f64,
    pub score: f64,
    pub rank: usize,
}

impl EmotionalMoment {
    pub fn duration_ms(&self) -> f64 {
        self.end_ms - self.start_ms
    }
}

#[derive(Debug, Clone)]
struct Interval {
    label: usize,
    start_us: u64,
    end_us: u64,
    conf_sum: f64,
    frames: usize,
}

/// Extracts ranked emotional moments from a time-ordered estimate stream.
///
/// Each estimate covers the time until the next one; the last covers until
/// `end_us` (or ends at its own timestamp when `end_us` is `None`).
pub fn curate(estimates: &[EmotionEstimate], labels: &LabelSet, params: &CurationParams, end_us: Option<u64>) -> Vec<EmotionalMoment> {
    let neutral = labels.neutral_index();
    let qualifying = |e: &EmotionEstimate| {
        e.face.as_ref()?;
        let l = e.label?;
        (l != neutral && e.confidence >= params.confidence_floor).then_some(l)
    };

    let mut runs: Vec<Interval> = Vec::new();
    let mut open: Option<Interval> = None;
    for (i, e) in estimates.iter().enumerate() {
        let frame_end = estimates.get(i + 1).map(|n| n.timestamp_us).or(end_us).unwrap_or(e.timestamp_us).max(e.timestamp_us);
        match (qualifying(e), open.as_mut()) {
            (Some(l), Some(run)) if run.label == l => {
                run.end_us = frame_end;
                run.conf_sum += e.confidence;
                run.frames += 1;
            }
            (q, _) => {
                runs.extend(open.take());
                open = q.map(|l| Interval { label: l, start_us: e.timestamp_us, end_us: frame_end, conf_sum: e.confidence, frames: 1 });
            }
        }
    }
    runs.extend(open);

    runs.sort_by_key(|r| (r.label, r.start_us));
    let mut merged: Vec<Interval> = Vec::new();
    for r in runs {
        match merged.last_mut() {
            Some(m) if m.label == r.label && r.start_us.saturating_sub(m.end_us) < params.merge_gap_ms * 1000 => {
                m.end_us = m.end_us.max(r.end_us);
                m.conf_sum += r.conf_sum;
                m.frames += r.frames;
            }
            _ => merged.push(r),
        }
    }

    let mut moments: Vec<EmotionalMoment> = merged
        .into_iter()
        .filter(|m| m.end_us > m.start_us && m.end_us - m.start_us >= params.min_duration_ms * 1000)
        .map(|m| {
            let mean = m.conf_sum / m.frames as f64;
            let dur_s = (m.end_us - m.start_us) as f64 / 1e6;
            EmotionalMoment {
                label: m.label,
                label_name: labels.name(m.label).unwrap_or("?").to_string(),
                start_ms: m.start_us as f64 / 1000.0,
                end_ms: m.end_us as f64 / 1000.0,
                mean_confidence: mean,
                score: mean * dur_s,
                rank: 0,
            }
        })
        .collect();
    moments.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.start_ms.total_cmp(&b.start_ms))
            .then(a.label.cmp(&b.label))
    });
    moments.truncate(params.top_k);
    for (i, m) in moments.iter_mut().enumerate() {
        m.rank = i + 1;
    }
    moments
}
