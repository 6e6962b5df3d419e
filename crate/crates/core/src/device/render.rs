use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cue::{CueEvent, IndicatorEvent};
use crate::geom::Rect;
use crate::proto::LabelSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Text,
    Color,
    Smiley,
    Audio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorStyle {
    Box,
    Line,
    Triangle,
    None,
}

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("unknown label {0}")]
    UnknownLabel(String),
    #[error("label `{label}` has no {modality:?} entry")]
    MissingEntry { label: String, modality: Modality },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CueRenderSpec {
    pub modalities: Vec<Modality>,
    pub indicator_style: IndicatorStyle,
    pub color_map: BTreeMap<String, String>,
    pub smiley_map: BTreeMap<String, String>,
    pub audio_name_map: BTreeMap<String, String>,
}

impl Default for CueRenderSpec {
    fn default() -> Self {
        let table = [
            ("happy", "#ffd400", ":)"),
            ("sad", "#1f5fbf", ":("),
            ("angry", "#d0021b", ">:("),
            ("scared", "#7b3fa0", "D:"),
            ("surprised", "#ff8c00", ":O"),
            ("disgust", "#3c8d2f", ":S"),
            ("contempt", "#8b5a2b", ":/"),
            ("neutral", "#9b9b9b", ":|"),
        ];
        Self {
            modalities: vec![Modality::Text],
            indicator_style: IndicatorStyle::Box,
            color_map: table.iter().map(|(l, c, _)| (l.to_string(), c.to_string())).collect(),
            smiley_map: table.iter().map(|(l, _, s)| (l.to_string(), s.to_string())).collect(),
            audio_name_map: table.iter().map(|(l, ..)| (l.to_string(), format!("{l}.wav"))).collect(),
        }
    }
}

impl CueRenderSpec {
    /// Checks that every enabled lookup covers the label set.
    pub fn validate(&self, labels: &LabelSet) -> Result<(), RenderError> {
        for name in labels.names() {
            for &m in &self.modalities {
                if self.lookup(m, name).is_none() {
                    return Err(RenderError::MissingEntry { label: name.clone(), modality: m });
                }
            }
        }
        Ok(())
    }

    fn lookup(&self, modality: Modality, label: &str) -> Option<String> {
        match modality {
            Modality::Text => Some(label.to_string()),
            Modality::Color => self.color_map.get(label).cloned(),
            Modality::Smiley => self.smiley_map.get(label).cloned(),
            Modality::Audio => self.audio_name_map.get(label).cloned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorGeometry {
    pub style: IndicatorStyle,
    pub face_present: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rect: Option<Rect>,
}

/// One line of the device render log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderRecord {
    pub at_us: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indicator: Option<IndicatorGeometry>,
}

#[derive(Debug, Clone, Copy)]
pub enum RenderInput<'a> {
    Cue(&'a CueEvent),
    Indicator(&'a IndicatorEvent),
}

pub fn render_cue(spec: &CueRenderSpec, labels: &LabelSet, input: RenderInput<'_>) -> Result<Vec<RenderRecord>, RenderError> {
    match input {
        RenderInput::Cue(ev) => {
            let name = labels.name(ev.label).ok_or_else(|| RenderError::UnknownLabel(format!("#{}", ev.label)))?;
            spec.modalities
                .iter()
                .map(|&m| {
                    let value = spec.lookup(m, name).ok_or_else(|| RenderError::MissingEntry { label: name.to_string(), modality: m })?;
                    Ok(RenderRecord { at_us: ev.fired_at_us, modality: Some(m), label: Some(name.to_string()), value: Some(value), indicator: None })
                })
                .collect()
        }
        RenderInput::Indicator(ev) => {
            if spec.indicator_style == IndicatorStyle::None {
                return Ok(Vec::new());
            }
            Ok(vec![RenderRecord {
                at_us: ev.at_us,
                modality: None,
                label: None,
                value: None,
                indicator: Some(IndicatorGeometry { style: spec.indicator_style, face_present: ev.face_present, rect: ev.rect }),
            }])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn happy() -> CueEvent {
        CueEvent { label: 0, confidence: 0.9, fired_at_us: 5000, first_sequence: 1, last_sequence: 5 }
    }

    #[test]
    fn one_record_per_modality() {
        let spec = CueRenderSpec { modalities: vec![Modality::Text, Modality::Color], ..Default::default() };
        let recs = render_cue(&spec, &LabelSet::default(), RenderInput::Cue(&happy())).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].value.as_deref(), Some("happy"));
        assert_eq!(recs[1].value.as_deref(), Some("#ffd400"));
    }

    #[test]
    fn box_indicator_carries_rect() {
        let ev = IndicatorEvent { face_present: true, rect: Some(Rect::new(10, 20, 30, 40)), at_us: 7 };
        let recs = render_cue(&CueRenderSpec::default(), &LabelSet::default(), RenderInput::Indicator(&ev)).unwrap();
        let ind = recs[0].indicator.as_ref().unwrap();
        assert_eq!(ind.style, IndicatorStyle::Box);
        assert_eq!(ind.rect, Some(Rect::new(10, 20, 30, 40)));
    }

    #[test]
    fn unknown_label() {
        let mut ev = happy();
        ev.label = 42;
        let err = render_cue(&CueRenderSpec::default(), &LabelSet::default(), RenderInput::Cue(&ev)).unwrap_err();
        assert!(matches!(err, RenderError::UnknownLabel(_)));
    }

    #[test]
    fn default_spec_covers_default_labels() {
        let spec = CueRenderSpec {
            modalities: vec![Modality::Text, Modality::Color, Modality::Smiley, Modality::Audio],
            ..Default::default()
        };
        spec.validate(&LabelSet::default()).unwrap();
        let mut partial = spec.clone();
        partial.smiley_map.remove("sad");
        assert!(partial.validate(&LabelSet::default()).is_err());
    }
}
