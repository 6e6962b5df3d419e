//! Acceptance criteria, one PASS/FAIL line each.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::crop_sim::{self, dist, face_rect, jitter_excess, simulate};
use common::hog_oracle::{naive_hog, random_window, Geometry};
use common::packets::{random_frame, random_result};
use common::runs::{self, alignment_error, check_session, scripted_segments};
use common::streams::{random_stream, FRAME_US};
use common::{curate_oracle, neutral_bench};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sg_core::calib::*;
use sg_core::cue::{CueFilter, CueFilterConfig};
use sg_core::device::{fps_factor, simulate_sustained_load, CropConfig, CropMode, ThermalConfig};
use sg_core::image::FloatImage;
use sg_core::proto::*;
use sg_core::session::{curate, CurationParams};
use sg_core::synth::{ExpressionSpace, SceneConfig};
use sg_core::vision::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn protocol() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for i in 0..10_000 {
        let f = random_frame(&mut rng);
        let b = encode_frame(&f).map_err(|e| e.to_string())?;
        ensure!(b.len() <= MAX_DATAGRAM && decode_frame(&b).as_ref() == Ok(&f), "frame {i} did not round-trip");
        let r = random_result(&mut rng);
        let b = encode_result(&r).map_err(|e| e.to_string())?;
        ensure!(b.len() == RESULT_LEN && decode_result(&b) == Ok(r), "result {i} did not round-trip");
    }
    for i in 0..10_000 {
        let mut b = vec![0u8; rng.random_range(0..2048)];
        rng.fill(&mut b[..]);
        if i % 2 == 0 && b.len() >= 4 {
            b[..2].copy_from_slice(&MAGIC.to_le_bytes());
            b[2] = VERSION;
            b[3] = rng.random_range(0..3);
        }
        let _ = decode_packet(&b);
    }
    for name in ["frame_min", "frame_crop", "frame_full_320x194"] {
        let bytes = std::fs::read(common::fixture(&format!("{name}.bin"))).map_err(|e| e.to_string())?;
        let p = decode_frame(&bytes).map_err(|e| format!("{name}: {e}"))?;
        ensure!(encode_frame(&p).unwrap() == bytes, "{name} re-encodes differently");
    }
    for name in ["result_face", "result_empty"] {
        let bytes = std::fs::read(common::fixture(&format!("{name}.bin"))).map_err(|e| e.to_string())?;
        let p = decode_result(&bytes).map_err(|e| format!("{name}: {e}"))?;
        ensure!(encode_result(&p).unwrap() == bytes, "{name} re-encodes differently");
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.1}s");
    Ok(format!("20k round trips, 10k fuzzed inputs, 5 golden fixtures in {secs:.2}s"))
}

fn operating_point() -> Outcome {
    let _turn = runs::run_lock();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = runs::config(tmp.path(), "operating-point", 10.0);
    runs::empty_scene(&mut cfg);
    let m = runs::run(&cfg).metrics;
    ensure!(m.device.full_frames == m.frames_sent, "{} of {} frames were full frames", m.device.full_frames, m.frames_sent);
    ensure!(m.device.max_datagram_bytes == 24 + 320 * 194, "largest datagram {} bytes", m.device.max_datagram_bytes);
    ensure!(m.datagram_bound_violations == 0, "{} bound violations", m.datagram_bound_violations);
    ensure!((m.achieved_fps - 30.0).abs() <= 3.0, "achieved {:.2} fps", m.achieved_fps);
    let whole = &m.fps_timeline[..m.fps_timeline.len().min(10)];
    ensure!(whole.iter().all(|&f| (27..=33).contains(&f)), "per-second frame counts {whole:?}");
    ensure!(m.frames_received == m.frames_sent, "host received {} of {}", m.frames_received, m.frames_sent);
    Ok(format!("{} full 320x194 frames, {:.2} fps, per-second {:?}, 0 violations", m.frames_sent, m.achieved_fps, whole))
}

fn crop_controller() -> Outcome {
    let steps = simulate(CropConfig::default(), 90, crop_sim::teleport);
    let target = face_rect((700.0, 380.0)).center();
    let last = steps.last().unwrap();
    let err = dist(last.crop.center(), target).max(dist(last.anchor, target));
    ensure!(err <= 5.0, "teleport settles {err:.2} px off");
    let mut worst_jitter = jitter_excess(&steps);
    for path in [crop_sim::linear as fn(usize) -> _, crop_sim::circle] {
        let steps = simulate(CropConfig::default(), 240, path);
        worst_jitter = worst_jitter.max(jitter_excess(&steps));
        for (i, s) in steps.iter().enumerate() {
            let f = face_rect(path(i).unwrap());
            ensure!(s.crop.x <= f.x && s.crop.y <= f.y && s.crop.right() >= f.right() && s.crop.bottom() >= f.bottom(), "face left the crop at step {i}");
        }
    }
    ensure!(worst_jitter <= 1e-9, "crop travelled {worst_jitter} px more than the smoothed path");
    for threshold in [1u32, 5, 15, 30] {
        let cfg = CropConfig { lost_threshold: threshold, ..CropConfig::default() };
        let n = threshold as usize;
        let steps = simulate(cfg, 20 + n + 3, |i| (i < 20).then_some((640.0, 388.0)));
        let first_full = steps.iter().skip(20).position(|s| s.mode == CropMode::FullFrame).map(|k| k + 1);
        ensure!(first_full == Some(n), "threshold {threshold}: full frame after {first_full:?} misses");
    }
    Ok(format!("teleport error {err:.2} px, jitter excess {worst_jitter:.1e}, fallback exact for 1/5/15/30"))
}

fn hog_and_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let w = random_window(&mut rng, k);
        let fast = hog(&FloatImage::from_raw(64, 64, w.clone()).unwrap(), &HogParams::default()).map_err(|e| e.to_string())?;
        let slow = naive_hog(&w, &Geometry::default());
        ensure!(fast.len() == slow.len(), "length {} vs {}", fast.len(), slow.len());
        worst = fast.as_slice().iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    ensure!(worst <= 1e-6, "HOG deviates by {worst:e}");
    ensure!(HogParams::default().dimension() == 1764, "default dimension {}", HogParams::default().dimension());
    for (window, cell, block, bins) in [(64u32, 8u32, 2u32, 9u32), (32, 4, 2, 9), (48, 8, 3, 6), (64, 16, 1, 12)] {
        let c = (window / cell) as usize;
        let want = (c - block as usize + 1).pow(2) * (block * block * bins) as usize;
        ensure!(HogParams { window, cell, block, bins }.dimension() == want, "dimension formula for {window}/{cell}/{block}/{bins}");
    }
    let mut worst_rel: f64 = 0.0;
    for seed in 0..3u64 {
        let (rows, dim) = (3 + seed as usize, 4 + seed as usize);
        let data: Vec<Sample> = (0..30)
            .map(|i| Sample::new((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>(), i % rows))
            .collect();
        let w: Vec<f64> = (0..rows * (dim + 1)).map(|_| rng.random_range(-0.5..0.5)).collect();
        let (_, g) = logistic_loss_and_grad(&w, rows, dim, &data, 0.01);
        for i in 0..w.len() {
            let (mut p, mut m) = (w.clone(), w.clone());
            p[i] += 1e-6;
            m[i] -= 1e-6;
            let fd = (logistic_loss_and_grad(&p, rows, dim, &data, 0.01).0 - logistic_loss_and_grad(&m, rows, dim, &data, 0.01).0) / 2e-6;
            worst_rel = worst_rel.max((fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6));
        }
    }
    ensure!(worst_rel <= 1e-4, "gradient relative error {worst_rel:e}");
    Ok(format!("HOG max deviation {worst:.1e} over 100 windows, gradient rel error {worst_rel:.1e}, D=1764"))
}

fn neutral_subtraction() -> Outcome {
    let results: Vec<_> = (0..20).map(neutral_bench::run).collect();
    for r in &results {
        ensure!(r.converged >= r.plain, "seed {}: {:.3} with subtraction, {:.3} without", r.seed, r.converged, r.plain);
    }
    let mean = |f: fn(&neutral_bench::SeedResult) -> f64| results.iter().map(f).sum::<f64>() / 20.0;
    let (with, without) = (mean(|r| r.converged), mean(|r| r.plain));
    ensure!(with >= without, "mean {with:.3} < {without:.3}");

    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for lr in [0.05, 0.2, 0.7] {
        let target: Vec<f64> = (0..16).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut st = NeutralState::new(FeatureVector::zeros(16), lr, 0.6);
        let est = EmotionEstimate { sequence: 0, timestamp_us: 0, face: None, label: Some(7), confidence: 0.9, scores: vec![] };
        for n in 1..=25 {
            st.update(&FeatureVector::new(target.clone()), &est, 7).map_err(|e| e.to_string())?;
            let decay = (1.0 - lr).powi(n);
            for (got, t) in st.estimate().as_slice().iter().zip(&target) {
                worst = worst.max((got - t * (1.0 - decay)).abs() / t.abs().max(1.0));
            }
        }
    }
    ensure!(worst <= 1e-9, "EMA estimate off by {worst:e}");
    Ok(format!("accuracy {with:.3} with vs {without:.3} without over 20 seeds (never worse), EMA error {worst:.1e}"))
}

fn cue_filter() -> Outcome {
    let configs = [
        CueFilterConfig::default(),
        CueFilterConfig { related_groups: vec![vec![0, 4], vec![1, 2, 3]], ..Default::default() },
        CueFilterConfig { sustain_frames: 2, refractory_ms: 500, confidence_floor: 0.8, related_groups: vec![vec![2, 5, 6]] },
    ];
    let mut total = 0;
    for (i, cfg) in configs.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(106 + i as u64);
        let stream = random_stream(&mut rng, 1_000_000, 8);
        let mut f = CueFilter::new(cfg.clone(), 7);
        let events: Vec<_> = stream.iter().filter_map(|e| f.step(e)).collect();
        total += events.len();
        let mut last: HashMap<usize, u64> = HashMap::new();
        for ev in &events {
            let g = f.group(ev.label);
            if let Some(t) = last.insert(g, ev.fired_at_us) {
                ensure!(ev.fired_at_us - t >= cfg.refractory_ms * 1000, "config {i}: group {g} refired after {} us", ev.fired_at_us - t);
            }
            let k = cfg.sustain_frames;
            let end = ev.last_sequence as usize;
            ensure!(end + 1 >= k && ev.first_sequence as usize == end + 1 - k, "config {i}: window of event at {end}");
            for e in &stream[end + 1 - k..=end] {
                let q = f.qualifies(e);
                ensure!(q.is_some_and(|l| f.group(l) == g), "config {i}: unqualified frame {} in window", e.sequence);
            }
        }
        let neutral: Vec<_> = stream.iter().take(100_000).map(|e| EmotionEstimate { label: e.label.map(|_| 7), ..e.clone() }).collect();
        let mut f = CueFilter::new(cfg.clone(), 7);
        ensure!(neutral.iter().all(|e| f.step(e).is_none()), "config {i}: neutral stream fired");
    }
    Ok(format!("{total} events over 3x10^6 frames, refractory and sustain hold, neutral silent"))
}

fn curation() -> Outcome {
    let labels = LabelSet::default();
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    for case in 0..1000 {
        let n = rng.random_range(0..600);
        let log = random_stream(&mut rng, n, 8);
        let p = CurationParams {
            min_duration_ms: rng.random_range(0..3000),
            merge_gap_ms: rng.random_range(0..1500),
            top_k: rng.random_range(1..25),
            confidence_floor: rng.random_range(0.3..0.9),
        };
        let end = log.last().map(|e| e.timestamp_us + 50_000);
        let got = curate(&log, &labels, &p, end);
        let op = curate_oracle::OracleParams { min_duration_ms: p.min_duration_ms, merge_gap_ms: p.merge_gap_ms, top_k: p.top_k, floor: p.confidence_floor };
        let want = curate_oracle::curate(&log, labels.len(), labels.neutral_index(), &op, end);
        ensure!(got.len() == want.len(), "case {case}: {} moments vs oracle {}", got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            let same = g.label == w.label
                && g.start_ms == w.start_us as f64 / 1000.0
                && g.end_ms == w.end_us as f64 / 1000.0
                && (g.score - w.score).abs() < 1e-9;
            ensure!(same, "case {case}: {g:?} vs {w:?}");
        }
    }
    let _turn = runs::run_lock();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = runs::config(tmp.path(), "scripted", 10.0);
    runs::lockstep(&mut cfg, 200);
    let m = runs::run(&cfg).metrics;
    let segments = scripted_segments(&SceneConfig::default(), 10_000);
    let err = alignment_error(&segments, &m.moments);
    let frame_ms = FRAME_US as f64 / 1000.0;
    ensure!(err <= frame_ms, "moments {:?} vs script {segments:?}: {err} ms", m.moments);
    Ok(format!("1000 logs match the oracle, scripted moments within {err:.1} ms (frame {frame_ms:.1} ms)"))
}

fn calibration() -> Outcome {
    let kinds = [
        SubjectKind::Ideal,
        SubjectKind::Offset { magnitude: 12.0 },
        SubjectKind::Noisy { scale: 2.0 },
        SubjectKind::Permuted { shift: 1 },
    ];
    let policy = CalibrationPolicy::default();
    let labels = LabelSet::default();
    let all: Vec<usize> = (0..8).collect();
    let mut rounds_seen = Vec::new();
    for seed in 0..3u64 {
        let space = ExpressionSpace::benchmark(seed);
        let model = space.train_model(ModelKind::LogisticRegression, 10, 30, seed).map_err(|e| e.to_string())?;
        let reference = space.reference_set(10, 20, 10_000 + seed);
        for kind in kinds {
            let go = || {
                let mut subject = FeatureSubject::new(space.clone(), kind, 500 + seed);
                run_calibration(&model, &policy, &AdaptConfig::default(), &all, &mut subject, &reference, seed)
            };
            let (_, t) = go().map_err(|e| e.to_string())?;
            ensure!(t.rounds.len() <= policy.max_rounds && t.outcome != Decision::Request(vec![]), "{kind:?} did not terminate");
            ensure!(matches!(t.outcome, Decision::Converged | Decision::MaxRoundsReached), "{kind:?} ended on {:?}", t.outcome);
            if kind == SubjectKind::Ideal {
                ensure!(t.converged() && t.rounds.len() == 1, "ideal subject took {} rounds", t.rounds.len());
            }
            for (i, r) in t.rounds.iter().enumerate() {
                let mut deficient: Vec<(f64, usize)> =
                    r.recall.iter().filter(|(_, v)| *v < policy.recall_target).map(|(n, v)| (*v, labels.index_of(n).unwrap())).collect();
                deficient.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let names: Vec<String> = deficient.iter().map(|(_, l)| labels.name(*l).unwrap().to_string()).collect();
                if let Decision::Request(_) = r.decision {
                    ensure!(r.requested_next == names && t.rounds[i + 1].requested == names, "{kind:?} round {i}: deficient labels not re-requested");
                }
            }
            let (_, again) = go().map_err(|e| e.to_string())?;
            ensure!(again == t, "{kind:?} transcript differs between identical runs");
            rounds_seen.push(t.rounds.len());
        }
    }
    Ok(format!("12 calibrations terminate (rounds {rounds_seen:?}), ideal in 1 round, requests follow deficits, deterministic"))
}

fn thermal() -> Outcome {
    let cfg = ThermalConfig::default();
    let mut prev = f64::INFINITY;
    for i in 0..=50_000 {
        let f = fps_factor(&cfg, i as f64 * 0.01);
        ensure!(f <= prev, "fps factor rises at temperature {}", i as f64 * 0.01);
        prev = f;
    }
    let samples = simulate_sustained_load(cfg, 30.0, 1800);
    let onset = samples.iter().find(|s| s.fps_factor < 1.0).map(|s| s.t_s);
    ensure!(onset.is_some_and(|t| t <= 1800.0), "no throttling within 30 minutes");
    let end = samples.last().map_or(1.0, |s| s.fps_factor);
    Ok(format!("factor non-increasing, throttling from {:.0}s, factor {end:.2} at 30 min", onset.unwrap()))
}

fn robustness() -> Outcome {
    let _turn = runs::run_lock();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = runs::config(tmp.path(), "lossy", 10.0);
    cfg.network.link.loss = 0.2;
    let m = runs::run(&cfg).metrics;
    let ratio = m.frames_received as f64 / m.frames_sent as f64;
    ensure!((ratio - 0.8).abs() <= 0.05, "received {ratio:.3} of frames");
    let (frames, estimates) = check_session(m.session_dir.as_ref().unwrap())?;
    ensure!(frames as u64 == m.frames_received, "session holds {frames} frames, host received {}", m.frames_received);
    Ok(format!("{}/{} frames received ({ratio:.3}), session intact with {frames} frames and {estimates} estimates", m.frames_received, m.frames_sent))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("protocol codec", protocol),
        ("operating point", operating_point),
        ("crop controller", crop_controller),
        ("HOG/gradient numerics", hog_and_gradient),
        ("neutral subtraction", neutral_subtraction),
        ("cue filter", cue_filter),
        ("curation", curation),
        ("calibration", calibration),
        ("thermal throttling", thermal),
        ("packet loss robustness", robustness),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
