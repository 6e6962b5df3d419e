//! Straight-line reference for the cue filter: count qualifying frames per
//! group run, fire on the K-th, and block a group for R after it fires.

use std::collections::HashMap;

use sg_core::vision::EmotionEstimate;

pub struct OracleCue {
    pub label: usize,
    pub at_us: u64,
    pub first: u32,
    pub last: u32,
    pub confidence: f64,
}

pub fn group_of(groups: &[Vec<usize>], label: usize) -> usize {
    groups.iter().position(|g| g.contains(&label)).unwrap_or(groups.len() + label)
}

pub fn run(stream: &[EmotionEstimate], k: usize, floor: f64, refractory_us: u64, groups: &[Vec<usize>], neutral: usize) -> Vec<OracleCue> {
    let mut out = Vec::new();
    let mut last_fire: HashMap<usize, u64> = HashMap::new();
    let mut run_group: Option<usize> = None;
    let mut run: Vec<usize> = Vec::new(); // indices into stream
    for (i, e) in stream.iter().enumerate() {
        let ok = e.face.is_some() && e.label.is_some_and(|l| l != neutral) && e.confidence >= floor;
        if !ok {
            run_group = None;
            run.clear();
            continue;
        }
        let g = group_of(groups, e.label.unwrap());
        if run_group != Some(g) {
            run.clear();
            run_group = Some(g);
        }
        run.push(i);
        if run.len() < k {
            continue;
        }
        let window = &run[run.len() - k..];
        if last_fire.get(&g).is_some_and(|&t| e.timestamp_us < t + refractory_us) {
            continue;
        }
        out.push(OracleCue {
            label: e.label.unwrap(),
            at_us: e.timestamp_us,
            first: stream[window[0]].sequence,
            last: e.sequence,
            confidence: window.iter().map(|&j| stream[j].confidence).sum::<f64>() / k as f64,
        });
        last_fire.insert(g, e.timestamp_us);
        run.clear();
    }
    out
}
