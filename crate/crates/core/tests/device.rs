mod common;

use std::net::UdpSocket;
use std::time::{Duration, Instant};

use common::crop_sim::{self, dist, face_rect, jitter_excess, simulate, SOURCE};
use proptest::prelude::*;
use sg_core::device::*;
use sg_core::image::GrayImage;
use sg_core::proto::{self, Command, FrameKind, ResultPacket, MAX_DATAGRAM};
use sg_core::synth::{SceneConfig, SyntheticScene};
use sg_core::Rect;

fn contains(outer: Rect, inner: Rect) -> bool {
    inner.x >= outer.x && inner.y >= outer.y && inner.right() <= outer.right() && inner.bottom() <= outer.bottom()
}

#[test]
fn teleport_converges_within_five_px() {
    let steps = simulate(CropConfig::default(), 90, crop_sim::teleport);
    let target = face_rect((700.0, 380.0)).center();
    let last = steps.last().unwrap();
    assert!(dist(last.anchor, target) <= 5.0, "anchor {:?} target {target:?}", last.anchor);
    let c = last.crop.center();
    assert!(dist(c, target) <= 5.0, "crop rect centre {c:?}");
    assert!(jitter_excess(&steps) <= 1e-9);
}

#[test]
fn anchor_only_moves_onto_the_smoothed_centre() {
    for path in [crop_sim::teleport as fn(usize) -> _, crop_sim::linear, crop_sim::circle] {
        let steps = simulate(CropConfig::default(), 240, path);
        for w in steps.windows(2) {
            if w[0].anchor != w[1].anchor {
                assert_eq!(Some(w[1].anchor), w[1].smoothed);
            }
        }
    }
}

#[test]
fn tracking_keeps_the_face_in_the_crop() {
    for path in [crop_sim::linear as fn(usize) -> _, crop_sim::circle] {
        let steps = simulate(CropConfig::default(), 240, path);
        assert!(jitter_excess(&steps) <= 1e-9);
        for (i, s) in steps.iter().enumerate() {
            let face = face_rect(path(i).unwrap());
            assert!(contains(s.crop, face), "step {i}: face {face:?} crop {:?}", s.crop);
        }
        // the crop holds still on most steps
        let moves = steps.windows(2).filter(|w| w[0].anchor != w[1].anchor).count();
        assert!(moves < steps.len() / 2, "{moves} moves");
    }
}

#[test]
fn jittery_face_in_place_leaves_crop_still() {
    let steps = simulate(CropConfig::default(), 200, |i| {
        let j = [(0.0, 0.0), (3.0, -2.0), (-2.0, 3.0), (1.0, 1.0), (-3.0, -1.0)][i % 5];
        Some((640.0 + j.0, 388.0 + j.1))
    });
    let crops: std::collections::BTreeSet<_> = steps[1..].iter().map(|s| (s.crop.x, s.crop.y)).collect();
    assert!(crops.len() <= 3, "{crops:?}");
}

#[test]
fn fallback_after_exactly_lost_threshold() {
    for threshold in [1u32, 5, 15, 30] {
        let cfg = CropConfig { lost_threshold: threshold, ..CropConfig::default() };
        let n = threshold as usize;
        let steps = simulate(cfg, 20 + n + 5, |i| (i < 20).then_some((640.0, 388.0)));
        assert_eq!(steps[19].mode, CropMode::FaceCrop);
        for (k, s) in steps[20..].iter().enumerate() {
            let misses = k + 1;
            let want = if misses >= n { CropMode::FullFrame } else { CropMode::FaceCrop };
            assert_eq!(s.mode, want, "threshold {threshold}, {misses} misses");
        }
        assert_eq!(steps.last().unwrap().crop, Rect::new(0, 0, SOURCE.0, SOURCE.1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_face_is_centred_after_three_time_constants(dx in -25.0f64..25.0, dy in -25.0f64..25.0) {
        let cfg = CropConfig::default();
        let start = (640.0, 388.0);
        let end = (640.0 + dx, 388.0 + dy);
        let settle = (3.0 / cfg.alpha_center).ceil() as usize;
        let steps = simulate(cfg, 10 + settle + 30, |i| Some(if i < 10 { start } else { end }));
        let target = face_rect(end).center();
        for s in &steps[10 + settle..] {
            prop_assert!(dist(s.anchor, target) <= 1.0, "anchor {:?} target {:?}", s.anchor, target);
        }
    }

    /// Any observation sequence keeps the crop in bounds and every packet within
    /// the datagram bound, with full frames exactly in FullFrame mode.
    #[test]
    fn containment_and_mode(obs in proptest::collection::vec(proptest::option::weighted(0.8, (0u32..1280, 0u32..776, 1u32..1280, 1u32..776)), 1..120)) {
        let native = GrayImage::from_fn(SOURCE.0, SOURCE.1, |x, y| ((x * 7 + y * 13) % 256) as u8);
        let mut s = CropState::new(CropConfig::default(), SOURCE.0, SOURCE.1);
        for (i, o) in obs.iter().enumerate() {
            let face = o.map(|(x, y, w, h)| Rect::new(x, y, w.min(SOURCE.0 - x).max(1), h.min(SOURCE.1 - y).max(1)));
            s.update(face);
            let c = s.active_crop();
            prop_assert!(c.right() <= SOURCE.0 && c.bottom() <= SOURCE.1 && c.w > 0 && c.h > 0);
            if s.mode() == CropMode::FaceCrop {
                prop_assert!(c.w as u64 * c.h as u64 <= s.config().max_crop_area);
            }
            prop_assert_eq!(s.mode() == CropMode::FullFrame, s.frames_since_face() >= 15 || s.smoothed_center().is_none());
            let p = select_transmission(&s, &native, LOW_RES, i as u32, i as u64 * 33_333);
            prop_assert_eq!(p.kind == FrameKind::FullFrame, s.mode() == CropMode::FullFrame);
            let bytes = proto::encode_frame(&p).unwrap();
            prop_assert!(bytes.len() <= MAX_DATAGRAM);
        }
    }
}

#[test]
fn full_frame_is_a_box_average_of_the_native_frame() {
    let scene = SyntheticScene::new(SceneConfig::default());
    let (native, _) = scene.render(1_000_000);
    let s = CropState::new(CropConfig::default(), native.width(), native.height());
    let p = select_transmission(&s, &native, LOW_RES, 0, 0);
    assert_eq!((p.width, p.height), (320, 194));
    assert_eq!(p.encoded_len(), 24 + 62_080);
    // 1280x776 to 320x194 is an exact 4x4 block average
    for (i, &v) in p.payload.iter().enumerate() {
        let (x, y) = ((i % 320) as u32, (i / 320) as u32);
        let mut sum = 0u32;
        for dy in 0..4 {
            for dx in 0..4 {
                sum += native.get(4 * x + dx, 4 * y + dy) as u32;
            }
        }
        assert!((v as f64 - sum as f64 / 16.0).abs() <= 0.5, "pixel ({x},{y})");
    }
}

#[test]
fn thermal_factor_is_non_increasing() {
    let cfg = ThermalConfig::default();
    let mut prev = f64::INFINITY;
    for i in 0..=40_000 {
        let f = fps_factor(&cfg, i as f64 * 0.01);
        assert!(f <= prev && f >= cfg.min_fps_factor && f <= 1.0);
        prev = f;
    }
}

#[test]
fn sustained_load_throttles_inside_half_an_hour() {
    let samples = simulate_sustained_load(ThermalConfig::default(), 30.0, 1800);
    let onset = samples.iter().find(|s| s.fps_factor < 1.0).expect("throttles");
    assert!(onset.t_s <= 1800.0, "onset at {}s", onset.t_s);
    assert!(onset.t_s >= 60.0, "throttling should not start right away");
    let (mut st, _) = step_thermal(ThermalState::new(ThermalConfig::default()), 0, 1.0);
    st.temperature = 150.0;
    let (cooled, f) = step_thermal(st, 0, 10_000.0);
    assert_eq!(cooled.temperature, 0.0);
    assert_eq!(f, 1.0);
}

/// Answers every frame; sends StopActivity in the answer to frame `stop_at`.
fn fake_host(stop_at: u32) -> (UdpSocket, std::thread::JoinHandle<(u32, Option<Instant>)>) {
    let sock = UdpSocket::bind("127.0.0.1:0").unwrap();
    let server = sock.try_clone().unwrap();
    server.set_read_timeout(Some(Duration::from_secs(3))).unwrap();
    let h = std::thread::spawn(move || {
        let mut buf = vec![0u8; MAX_DATAGRAM + 1];
        let mut seen = 0;
        let mut stop_sent = None;
        while let Ok((n, from)) = server.recv_from(&mut buf) {
            let f = proto::decode_frame(&buf[..n]).unwrap();
            seen += 1;
            let mut r = ResultPacket::empty(f.sequence);
            if f.sequence == stop_at {
                r.command = Command::StopActivity;
                stop_sent = Some(Instant::now());
            }
            server.send_to(&proto::encode_result(&r).unwrap(), from).unwrap();
            if stop_sent.is_some() && f.sequence > stop_at + 5 {
                break;
            }
        }
        (seen, stop_sent)
    });
    (sock, h)
}

#[test]
fn stop_command_ends_the_loop_within_one_frame() {
    let (host, server) = fake_host(20);
    let addr = host.local_addr().unwrap();
    let dev = UdpSocket::bind("127.0.0.1:0").unwrap();
    let mut scene = SyntheticScene::new(SceneConfig::default());
    let report = run_device(&DeviceConfig::default(), &mut scene, &dev, addr, Duration::from_secs(10), &mut |_| {}, None).unwrap();
    let returned = Instant::now();
    drop(host);
    let (_, stop_sent) = server.join().unwrap();
    assert_eq!(report.exit, ExitReason::StopCommand);
    // frames 0..=20 were sent before the stop arrived; at most one more may leave
    assert!((21..=22).contains(&report.frames_sent), "{}", report.frames_sent);
    let lag = returned - stop_sent.unwrap();
    assert!(lag < Duration::from_millis(100), "{lag:?}");
}

#[test]
fn absent_host_runs_to_completion() {
    let dev = UdpSocket::bind("127.0.0.1:0").unwrap();
    let nobody = UdpSocket::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let mut scene = SyntheticScene::new(SceneConfig::default());
    let report = run_device(&DeviceConfig::default(), &mut scene, &dev, nobody, Duration::from_secs(1), &mut |_| {}, None).unwrap();
    assert_eq!(report.exit, ExitReason::DurationElapsed);
    assert_eq!(report.results_received, 0);
    assert!((27..=33).contains(&report.frames_sent), "{}", report.frames_sent);
    assert_eq!(report.full_frames, report.frames_sent);
}

#[test]
fn render_records_follow_the_spec() {
    let spec = CueRenderSpec { modalities: vec![Modality::Text, Modality::Color], ..CueRenderSpec::default() };
    let labels = sg_core::proto::LabelSet::default();
    let cue = sg_core::cue::CueEvent { label: 0, confidence: 0.9, fired_at_us: 5, first_sequence: 0, last_sequence: 4 };
    let recs = render_cue(&spec, &labels, RenderInput::Cue(&cue)).unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0].value.as_deref(), Some("happy"));
    let bad = sg_core::cue::CueEvent { label: 42, ..cue };
    assert!(render_cue(&spec, &labels, RenderInput::Cue(&bad)).is_err());
}
