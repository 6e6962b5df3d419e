//! Brute-force curation: per label, mark qualifying frames on the timeline,
//! collect maximal runs, merge pairwise until stable, then filter and rank.

use sg_core::vision::EmotionEstimate;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMoment {
    pub label: usize,
    pub start_us: u64,
    pub end_us: u64,
    pub mean_confidence: f64,
    pub score: f64,
}

pub struct OracleParams {
    pub min_duration_ms: u64,
    pub merge_gap_ms: u64,
    pub top_k: usize,
    pub floor: f64,
}

pub fn curate(est: &[EmotionEstimate], labels: usize, neutral: usize, p: &OracleParams, end_us: Option<u64>) -> Vec<OracleMoment> {
    let n = est.len();
    // frame i covers [t_i, t_{i+1}); the last frame covers up to end_us
    let frame_end: Vec<u64> = (0..n)
        .map(|i| {
            let next = if i + 1 < n { Some(est[i + 1].timestamp_us) } else { end_us };
            next.unwrap_or(est[i].timestamp_us).max(est[i].timestamp_us)
        })
        .collect();
    let mut all = Vec::new();
    for label in (0..labels).filter(|&l| l != neutral) {
        let hit: Vec<bool> = est
            .iter()
            .map(|e| e.face.is_some() && e.label == Some(label) && e.confidence >= p.floor)
            .collect();
        // (start, end, conf_sum, frames)
        let mut runs: Vec<(u64, u64, f64, usize)> = Vec::new();
        let mut i = 0;
        while i < n {
            if !hit[i] {
                i += 1;
                continue;
            }
            let mut j = i;
            let mut sum = 0.0;
            while j < n && hit[j] {
                sum += est[j].confidence;
                j += 1;
            }
            runs.push((est[i].timestamp_us, frame_end[j - 1], sum, j - i));
            i = j;
        }
        loop {
            let mut merged_any = false;
            'outer: for a in 0..runs.len() {
                for b in 0..runs.len() {
                    if a == b {
                        continue;
                    }
                    let (ra, rb) = (runs[a], runs[b]);
                    if ra.0 <= rb.0 && rb.0 >= ra.1 && rb.0 - ra.1 < p.merge_gap_ms * 1000 {
                        runs[a] = (ra.0, ra.1.max(rb.1), ra.2 + rb.2, ra.3 + rb.3);
                        runs.remove(b);
                        merged_any = true;
                        break 'outer;
                    }
                    if ra.0 <= rb.0 && rb.0 < ra.1 {
                        runs[a] = (ra.0, ra.1.max(rb.1), ra.2 + rb.2, ra.3 + rb.3);
                        runs.remove(b);
                        merged_any = true;
                        break 'outer;
                    }
                }
            }
            if !merged_any {
                break;
            }
        }
        for (s, e, sum, k) in runs {
            if e <= s || e - s < p.min_duration_ms * 1000 {
                continue;
            }
            let mean = sum / k as f64;
            all.push(OracleMoment {
                label,
                start_us: s,
                end_us: e,
                mean_confidence: mean,
                score: mean * (e - s) as f64 / 1e6,
            });
        }
    }
    // selection sort by (score desc, start asc, label asc)
    let mut ranked = Vec::new();
    while !all.is_empty() && ranked.len() < p.top_k {
        let mut best = 0;
        for i in 1..all.len() {
            let (a, b) = (&all[i], &all[best]);
            let better = a.score > b.score
                || (a.score == b.score && (a.start_us < b.start_us || (a.start_us == b.start_us && a.label < b.label)));
            if better {
                best = i;
            }
        }
        ranked.push(all.remove(best));
    }
    ranked
}
