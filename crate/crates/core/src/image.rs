//! Minimal greyscale image containers and resampling used along the pipeline.

use crate::geom::Rect;

/// 8-bit greyscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self::filled(width, height, 0)
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    /// Wraps a raw buffer. Returns `None` if the length does not match the geometry.
    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Option<Self> {
        (data.len() == width as usize * height as usize).then_some(Self { width, height, data })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn put(&mut self, x: u32, y: u32, v: u8) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = v;
    }

    /// Copies out `rect`, which must lie inside the image.
    pub fn crop(&self, rect: Rect) -> GrayImage {
        assert!(rect.fits_within(self.width, self.height), "crop {rect:?} outside image");
        let mut data = Vec::with_capacity(rect.area() as usize);
        for y in rect.y..rect.bottom() {
            let row = y as usize * self.width as usize;
            data.extend_from_slice(&self.data[row + rect.x as usize..row + rect.right() as usize]);
        }
        GrayImage { width: rect.w, height: rect.h, data }
    }

    /// Area-averaging (box filter) resample to an arbitrary smaller geometry.
    pub fn box_downsample(&self, width: u32, height: u32) -> GrayImage {
        assert!(width > 0 && height > 0);
        let xs = spans(self.width, width);
        let ys = spans(self.height, height);
        let mut out = Vec::with_capacity(width as usize * height as usize);
        for &(y0, y1) in &ys {
            for &(x0, x1) in &xs {
                let mut sum = 0u64;
                for y in y0..y1 {
                    let row = y as usize * self.width as usize;
                    for x in x0..x1 {
                        sum += self.data[row + x as usize] as u64;
                    }
                }
                let n = ((y1 - y0) * (x1 - x0)) as u64;
                out.push(((sum + n / 2) / n) as u8);
            }
        }
        GrayImage { width, height, data: out }
    }

    pub fn to_float(&self) -> FloatImage {
        FloatImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }
}

// Source index ranges covered by each destination pixel; every range is non-empty.
fn spans(src: u32, dst: u32) -> Vec<(u32, u32)> {
    (0..dst)
        .map(|i| {
            let a = (i as u64 * src as u64 / dst as u64) as u32;
            let b = ((i as u64 + 1) * src as u64 / dst as u64) as u32;
            (a.min(src - 1), b.max(a + 1).min(src))
        })
        .collect()
}

/// Floating point single-channel image.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl FloatImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<f64>) -> Option<Self> {
        (data.len() == width as usize * height as usize).then_some(Self { width, height, data })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f64) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Reads with coordinates clamped to the border (replicate padding).
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> f64 {
        let x = x.clamp(0, self.width as i64 - 1) as u32;
        let y = y.clamp(0, self.height as i64 - 1) as u32;
        self.get(x, y)
    }

    #[inline]
    pub fn put(&mut self, x: u32, y: u32, v: f64) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FloatImage {
        FloatImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn crop(&self, rect: Rect) -> FloatImage {
        assert!(rect.fits_within(self.width, self.height));
        FloatImage::from_fn(rect.w, rect.h, |x, y| self.get(rect.x + x, rect.y + y))
    }

    /// Bilinear resample with corner alignment: destination corners sample source corners exactly.
    pub fn resize_bilinear(&self, width: u32, height: u32) -> FloatImage {
        assert!(!self.is_empty() && width > 0 && height > 0);
        if width == self.width && height == self.height {
            return self.clone();
        }
        let scale = |dst: u32, src: u32| {
            if dst > 1 {
                (src - 1) as f64 / (dst - 1) as f64
            } else {
                0.0
            }
        };
        let sx = scale(width, self.width);
        let sy = scale(height, self.height);
        FloatImage::from_fn(width, height, |x, y| {
            let fx = x as f64 * sx;
            let fy = y as f64 * sy;
            let x0 = (fx.floor() as u32).min(self.width - 1);
            let y0 = (fy.floor() as u32).min(self.height - 1);
            let x1 = (x0 + 1).min(self.width - 1);
            let y1 = (y0 + 1).min(self.height - 1);
            let ax = fx - x0 as f64;
            let ay = fy - y0 as f64;
            let top = self.get(x0, y0) * (1.0 - ax) + self.get(x1, y0) * ax;
            let bottom = self.get(x0, y1) * (1.0 - ax) + self.get(x1, y1) * ax;
            top * (1.0 - ay) + bottom * ay
        })
    }
}
