//! Random valid wire packets.

use rand::Rng;
use sg_core::proto::*;

pub fn random_frame(rng: &mut impl Rng) -> FramePacket {
    let sw = rng.random_range(1..=2000u16);
    let sh = rng.random_range(1..=1200u16);
    let kind = if rng.random_bool(0.5) { FrameKind::FullFrame } else { FrameKind::FaceCrop };
    let (w, h) = loop {
        let w = rng.random_range(1..=sw.min(400));
        let h = rng.random_range(1..=sh.min(400));
        if (w as usize) * (h as usize) <= MAX_FRAME_PAYLOAD {
            break (w, h);
        }
    };
    let (cx, cy) = match kind {
        FrameKind::FullFrame => (0, 0),
        FrameKind::FaceCrop => (rng.random_range(0..=sw - w), rng.random_range(0..=sh - h)),
    };
    let mut payload = vec![0u8; w as usize * h as usize];
    rng.fill(&mut payload[..]);
    FramePacket {
        kind,
        sequence: rng.random(),
        timestamp_us: rng.random::<u32>() as u64,
        source_width: sw,
        source_height: sh,
        width: w,
        height: h,
        crop_x: cx,
        crop_y: cy,
        payload,
    }
}

pub fn random_result(rng: &mut impl Rng) -> ResultPacket {
    let face = rng.random_bool(0.7);
    let command = [Command::None, Command::StartActivity, Command::StopActivity, Command::Recalibrate][rng.random_range(0..4)];
    if !face {
        return ResultPacket { sequence: rng.random(), confidence: rng.random_range(0..=CONFIDENCE_SCALE), command, ..ResultPacket::empty(0) };
    }
    ResultPacket {
        sequence: rng.random(),
        face_present: true,
        face_x: rng.random(),
        face_y: rng.random(),
        face_w: rng.random(),
        face_h: rng.random(),
        label: rng.random_range(0..=NO_LABEL),
        confidence: rng.random_range(0..=CONFIDENCE_SCALE),
        command,
    }
}
