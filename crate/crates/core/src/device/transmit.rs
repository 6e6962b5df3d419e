use crate::device::crop::{CropMode, CropState};
use crate::image::GrayImage;
use crate::proto::{FrameKind, FramePacket, MAX_FRAME_PAYLOAD};

pub const LOW_RES: (u32, u32) = (320, 194);

/// Builds the frame packet for the current crop mode.
///
/// Full frames are box-downsampled to `low_res`. Face crops come from the
/// native frame; a crop too large for one datagram is shrunk by the smallest
/// integer factor that fits.
pub fn select_transmission(
    state: &CropState,
    native: &GrayImage,
    low_res: (u32, u32),
    sequence: u32,
    timestamp_us: u64,
) -> FramePacket {
    assert_eq!((native.width(), native.height()), state.source(), "native frame geometry changed");
    let (sw, sh) = state.source();
    match state.mode() {
        CropMode::FullFrame => {
            let small = native.box_downsample(low_res.0, low_res.1);
            FramePacket {
                kind: FrameKind::FullFrame,
                sequence,
                timestamp_us,
                source_width: sw as u16,
                source_height: sh as u16,
                width: low_res.0 as u16,
                height: low_res.1 as u16,
                crop_x: 0,
                crop_y: 0,
                payload: small.into_raw(),
            }
        }
        CropMode::FaceCrop => {
            let rect = state.active_crop();
            let region = native.crop(rect);
            let k = downsample_factor(rect.w, rect.h);
            let region = if k > 1 { region.box_downsample(rect.w / k, rect.h / k) } else { region };
            FramePacket {
                kind: FrameKind::FaceCrop,
                sequence,
                timestamp_us,
                source_width: sw as u16,
                source_height: sh as u16,
                width: region.width() as u16,
                height: region.height() as u16,
                crop_x: rect.x as u16,
                crop_y: rect.y as u16,
                payload: region.into_raw(),
            }
        }
    }
}

/// Smallest integer k with (w/k)·(h/k) within one datagram payload.
pub fn downsample_factor(w: u32, h: u32) -> u32 {
    let mut k = 1;
    while (w / k) as u64 * (h / k) as u64 > MAX_FRAME_PAYLOAD as u64 {
        k += 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::crop::CropConfig;
    use crate::geom::Rect;
    use crate::proto::{decode_frame, encode_frame, MAX_DATAGRAM};

    fn native() -> GrayImage {
        GrayImage::from_fn(1280, 776, |x, y| ((x * 7 + y * 13) % 251) as u8)
    }

    #[test]
    fn full_frame_at_low_res() {
        let s = CropState::new(CropConfig::default(), 1280, 776);
        let p = select_transmission(&s, &native(), LOW_RES, 0, 0);
        assert_eq!(p.kind, FrameKind::FullFrame);
        assert_eq!((p.width, p.height), (320, 194));
        assert_eq!(encode_frame(&p).unwrap().len(), 24 + 320 * 194);
    }

    #[test]
    fn face_crop_matches_native_bytes() {
        let mut s = CropState::new(CropConfig::default(), 1280, 776);
        s.seed((220.0, 170.0), (240.0 / 1.8, 240.0 / 1.8));
        assert_eq!(s.active_crop(), Rect::new(100, 50, 240, 240));
        let img = native();
        let p = select_transmission(&s, &img, LOW_RES, 3, 99);
        assert_eq!(p.kind, FrameKind::FaceCrop);
        assert_eq!((p.crop_x, p.crop_y, p.width, p.height), (100, 50, 240, 240));
        for y in 0..240u32 {
            for x in 0..240u32 {
                assert_eq!(p.payload[(y * 240 + x) as usize], img.get(100 + x, 50 + y));
            }
        }
        let back = decode_frame(&encode_frame(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn factor_is_smallest_fitting() {
        assert_eq!(downsample_factor(255, 256), 1);
        assert_eq!(downsample_factor(256, 256), 2);
        assert_eq!(downsample_factor(1280, 776), 4);
        for (w, h) in [(300u32, 300u32), (1280, 776), (700, 500), (256, 256)] {
            let k = downsample_factor(w, h);
            assert!((w / k) * (h / k) <= 65_483);
            assert!(k == 1 || (w / (k - 1)) * (h / (k - 1)) > 65_483);
        }
    }

    #[test]
    fn oversized_crop_downsampled() {
        let cfg = CropConfig { max_crop_area: u64::MAX, ..CropConfig::default() };
        let mut s = CropState::new(cfg, 1280, 776);
        s.seed((640.0, 388.0), (300.0, 300.0));
        assert_eq!(s.active_crop().w, 540);
        let p = select_transmission(&s, &native(), LOW_RES, 0, 0);
        // 270x270 = 72,900 still exceeds 65,483; a factor of 3 fits
        assert_eq!((p.width, p.height), (180, 180));
        assert!(encode_frame(&p).unwrap().len() <= MAX_DATAGRAM);
    }
}
