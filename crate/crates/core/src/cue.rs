//! Turns the per-frame estimate stream into sparse, stable cue events and
//! debounced face-indicator transitions.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::geom::Rect;
use crate::vision::EmotionEstimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CueFilterConfig {
    /// Consecutive qualifying frames required before a cue fires.
    pub sustain_frames: usize,
    pub confidence_floor: f64,
    /// Minimum spacing between cues of one related group.
    pub refractory_ms: u64,
    /// Groups of related labels; labels not listed form their own group.
    pub related_groups: Vec<Vec<usize>>,
}

impl Default for CueFilterConfig {
    fn default() -> Self {
        Self {
            sustain_frames: 5,
            confidence_floor: 0.65,
            refractory_ms: 2000,
            related_groups: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueEvent {
    pub label: usize,
    /// Mean confidence over the sustained window.
    pub confidence: f64,
    pub fired_at_us: u64,
    pub first_sequence: u32,
    pub last_sequence: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicatorEvent {
    pub face_present: bool,
    pub rect: Option<Rect>,
    pub at_us: u64,
}

/// Sustain + confidence floor + per-group refractory filter.
#[derive(Debug, Clone)]
pub struct CueFilter {
    cfg: CueFilterConfig,
    neutral: usize,
    group_of: HashMap<usize, usize>,
    candidate: Option<usize>,
    window: VecDeque<(u32, f64)>,
    last_fired: Option<(usize, u64)>,
    group_last_fired: HashMap<usize, u64>,
}

impl CueFilter {
    pub fn new(cfg: CueFilterConfig, neutral_label: usize) -> Self {
        let mut group_of = HashMap::new();
        for (g, members) in cfg.related_groups.iter().enumerate() {
            for &l in members {
                group_of.entry(l).or_insert(g);
            }
        }
        Self {
            cfg,
            neutral: neutral_label,
            group_of,
            candidate: None,
            window: VecDeque::new(),
            last_fired: None,
            group_last_fired: HashMap::new(),
        }
    }

    pub fn config(&self) -> &CueFilterConfig {
        &self.cfg
    }

    /// Group key; ungrouped labels are offset past the configured groups.
    pub fn group(&self, label: usize) -> usize {
        self.group_of
            .get(&label)
            .copied()
            .unwrap_or(self.cfg.related_groups.len() + label)
    }

    pub fn candidate(&self) -> Option<usize> {
        self.candidate
    }

    pub fn consecutive_count(&self) -> usize {
        self.window.len()
    }

    pub fn last_fired(&self) -> Option<(usize, u64)> {
        self.last_fired
    }

    pub fn qualifies(&self, e: &EmotionEstimate) -> Option<usize> {
        match e.label {
            Some(l) if e.face.is_some() && l != self.neutral && e.confidence >= self.cfg.confidence_floor => Some(l),
            _ => None,
        }
    }

    fn reset(&mut self) {
        self.candidate = None;
        self.window.clear();
    }

    pub fn step(&mut self, e: &EmotionEstimate) -> Option<CueEvent> {
        let Some(label) = self.qualifies(e) else {
            self.reset();
            return None;
        };
        let k = self.cfg.sustain_frames.max(1);
        match self.candidate {
            Some(c) if self.group(c) == self.group(label) => {}
            _ => self.window.clear(),
        }
        self.candidate = Some(label);
        self.window.push_back((e.sequence, e.confidence));
        if self.window.len() > k {
            self.window.pop_front();
        }
        if self.window.len() < k {
            return None;
        }
        let group = self.group(label);
        let refractory_us = self.cfg.refractory_ms * 1000;
        if let Some(&t) = self.group_last_fired.get(&group) {
            if e.timestamp_us.saturating_sub(t) < refractory_us {
                return None;
            }
        }
        let event = CueEvent {
            label,
            confidence: self.window.iter().map(|w| w.1).sum::<f64>() / k as f64,
            fired_at_us: e.timestamp_us,
            first_sequence: self.window.front().map_or(e.sequence, |w| w.0),
            last_sequence: e.sequence,
        };
        self.group_last_fired.insert(group, e.timestamp_us);
        self.last_fired = Some((label, e.timestamp_us));
        self.reset();
        Some(event)
    }
}

/// Emits face-present transitions once they persist for `debounce` frames.
#[derive(Debug, Clone)]
pub struct IndicatorDebouncer {
    debounce: usize,
    reported: bool,
    pending: usize,
}

impl Default for IndicatorDebouncer {
    fn default() -> Self {
        Self::new(2)
    }
}

impl IndicatorDebouncer {
    pub fn new(debounce: usize) -> Self {
        Self {
            debounce: debounce.max(1),
            reported: false,
            pending: 0,
        }
    }

    pub fn face_present(&self) -> bool {
        self.reported
    }

    pub fn step_presence(&mut self, present: bool, rect: Option<Rect>, at_us: u64) -> Option<IndicatorEvent> {
        if present == self.reported {
            self.pending = 0;
            return None;
        }
        self.pending += 1;
        if self.pending < self.debounce {
            return None;
        }
        self.reported = present;
        self.pending = 0;
        Some(IndicatorEvent {
            face_present: present,
            rect: if present { rect } else { None },
            at_us,
        })
    }

    pub fn step(&mut self, e: &EmotionEstimate) -> Option<IndicatorEvent> {
        self.step_presence(e.face.is_some(), e.face, e.timestamp_us)
    }
}
