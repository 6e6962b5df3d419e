use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::session::catalog::{read_audit, replay, Annotation, AnnotationKind};
use crate::session::curate::{curate, CurationParams, EmotionalMoment};
use crate::session::store::{SessionError, SessionEvent, SessionReader};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TimelineItem {
    Moment { label: String, score: f64, rank: usize, mean_confidence: f64 },
    Cue { label: String, confidence: f64 },
    Mark { author: String },
    Comment { author: String, text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub start_ms: f64,
    pub end_ms: f64,
    #[serde(flatten)]
    pub item: TimelineItem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub session_id: String,
    pub duration_ms: u64,
    pub params: CurationParams,
    pub moments: Vec<EmotionalMoment>,
    /// Moments, cues and annotations ordered by start.
    pub entries: Vec<TimelineEntry>,
}

impl Timeline {
    pub fn highlights(&self) -> usize {
        self.entries.iter().filter(|e| !matches!(e.item, TimelineItem::Cue { .. })).count()
    }
}

fn kind_order(item: &TimelineItem) -> u8 {
    match item {
        TimelineItem::Moment { .. } => 0,
        TimelineItem::Mark { .. } => 1,
        TimelineItem::Comment { .. } => 2,
        TimelineItem::Cue { .. } => 3,
    }
}

/// Builds the playback-bar structure for a stored session.
pub fn timeline(dir: &Path, params: &CurationParams) -> Result<Timeline, SessionError> {
    let reader = SessionReader::open(dir)?;
    let meta = reader.meta().clone();
    let labels = &meta.label_set;
    let events = reader.events()?;
    let estimates: Vec<_> = events
        .iter()
        .filter_map(|e| match e {
            SessionEvent::Estimate(e) => Some(e.clone()),
            _ => None,
        })
        .collect();
    let end_us = meta.duration_ms.saturating_mul(1000).max(estimates.last().map_or(0, |e| e.timestamp_us));
    let moments = curate(&estimates, labels, params, Some(end_us));

    let mut entries: Vec<TimelineEntry> = moments
        .iter()
        .map(|m| TimelineEntry {
            start_ms: m.start_ms,
            end_ms: m.end_ms,
            item: TimelineItem::Moment { label: m.label_name.clone(), score: m.score, rank: m.rank, mean_confidence: m.mean_confidence },
        })
        .collect();
    for e in &events {
        if let SessionEvent::Cue(c) = e {
            let t = c.fired_at_us as f64 / 1000.0;
            entries.push(TimelineEntry {
                start_ms: t,
                end_ms: t,
                item: TimelineItem::Cue { label: labels.name(c.label).unwrap_or("?").to_string(), confidence: c.confidence },
            });
        }
    }
    let annotations: Vec<Annotation> = replay(&read_audit(dir)?).annotations;
    for a in annotations {
        let item = match a.kind {
            AnnotationKind::ImportantMark => TimelineItem::Mark { author: a.author },
            AnnotationKind::Comment => TimelineItem::Comment { author: a.author, text: a.text.unwrap_or_default() },
        };
        entries.push(TimelineEntry { start_ms: a.start_ms as f64, end_ms: a.end_ms as f64, item });
    }
    entries.sort_by(|a, b| {
        a.start_ms
            .total_cmp(&b.start_ms)
            .then(kind_order(&a.item).cmp(&kind_order(&b.item)))
            .then(a.end_ms.total_cmp(&b.end_ms))
    });
    Ok(Timeline { session_id: meta.session_id, duration_ms: meta.duration_ms, params: *params, moments, entries })
}

fn label_color(label: &str) -> [u8; 3] {
    match label {
        "happy" => [255, 212, 0],
        "sad" => [31, 95, 191],
        "angry" => [208, 2, 27],
        "scared" => [123, 63, 160],
        "surprised" => [255, 140, 0],
        "disgust" => [60, 141, 47],
        "contempt" => [139, 90, 43],
        _ => {
            let h = label.bytes().fold(7u32, |h, b| h.wrapping_mul(31).wrapping_add(b as u32));
            [(h & 0xff) as u8, ((h >> 8) & 0xff) as u8, ((h >> 16) & 0xff) as u8]
        }
    }
}

/// Renders the playback bar: moments as coloured spans, cues as ticks above,
/// annotations as dark spans below.
pub fn render_plot(t: &Timeline, width: u32) -> image::RgbImage {
    let height = 48;
    let mut img = image::RgbImage::from_pixel(width, height, image::Rgb([255, 255, 255]));
    let dur = t.duration_ms.max(1) as f64;
    let x_of = |ms: f64| ((ms / dur) * (width - 1) as f64).round().clamp(0.0, (width - 1) as f64) as u32;
    let mut fill = |x0: u32, x1: u32, y0: u32, y1: u32, c: [u8; 3]| {
        for y in y0..y1 {
            for x in x0..=x1 {
                img.put_pixel(x, y, image::Rgb(c));
            }
        }
    };
    fill(0, width - 1, 16, 32, [220, 220, 220]);
    for e in &t.entries {
        let (x0, x1) = (x_of(e.start_ms), x_of(e.end_ms));
        match &e.item {
            TimelineItem::Moment { label, .. } => fill(x0, x1, 16, 32, label_color(label)),
            TimelineItem::Cue { label, .. } => fill(x0, x0, 4, 14, label_color(label)),
            TimelineItem::Mark { .. } => fill(x0, x1, 36, 42, [40, 40, 40]),
            TimelineItem::Comment { .. } => fill(x0, x1, 42, 46, [110, 110, 110]),
        }
    }
    img
}

pub fn save_plot(t: &Timeline, path: &Path) -> Result<(), SessionError> {
    render_plot(t, 1000)
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| SessionError::Io(std::io::Error::other(e.to_string())))
}
