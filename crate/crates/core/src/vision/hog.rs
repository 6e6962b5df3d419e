//! Histogram of oriented gradients.
//!
//! Gradients use centered `[-1, 0, 1]` differences with replicated borders.
//! Orientations are unsigned (0..180 degrees) and vote into `bins` bins whose
//! centres sit at `k * 180 / bins`, split linearly between the two nearest
//! centres. Cells are grouped into square blocks with a stride of one cell;
//! each block is L2-hys normalized. The descriptor is the concatenation of
//! blocks in row-major block order, cells row-major inside a block.

use serde::{Deserialize, Serialize};

use super::{FeatureVector, VisionError};
use crate::image::FloatImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HogParams {
    pub window: u32,
    pub cell: u32,
    /// Block side, in cells.
    pub block: u32,
    pub bins: u32,
}

impl Default for HogParams {
    fn default() -> Self {
        Self {
            window: 64,
            cell: 8,
            block: 2,
            bins: 9,
        }
    }
}

pub const L2HYS_CLIP: f64 = 0.2;
const NORM_EPS: f64 = 1e-3;

impl HogParams {
    pub fn cells_per_side(&self) -> u32 {
        self.window / self.cell
    }

    pub fn blocks_per_side(&self) -> u32 {
        self.cells_per_side() + 1 - self.block
    }

    /// Descriptor length `(window/cell - block + 1)^2 * block^2 * bins`.
    pub fn dimension(&self) -> usize {
        let b = self.blocks_per_side() as usize;
        b * b * (self.block * self.block * self.bins) as usize
    }

    pub fn validate(&self) -> Result<(), VisionError> {
        let ok = self.cell > 0
            && self.bins > 0
            && self.block > 0
            && self.window % self.cell == 0
            && self.cells_per_side() >= self.block;
        if ok {
            Ok(())
        } else {
            Err(VisionError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Per-pixel gradient magnitude and unsigned orientation in degrees.
pub(crate) fn gradients(img: &FloatImage) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut mag = Vec::with_capacity((w * h) as usize);
    let mut ang = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let gx = img.get_clamped(x + 1, y) - img.get_clamped(x - 1, y);
            let gy = img.get_clamped(x, y + 1) - img.get_clamped(x, y - 1);
            mag.push(gx.hypot(gy));
            ang.push(unsigned_degrees(gy, gx));
        }
    }
    (mag, ang)
}

pub(crate) fn unsigned_degrees(gy: f64, gx: f64) -> f64 {
    let mut a = gy.atan2(gx).to_degrees();
    if a < 0.0 {
        a += 180.0;
    }
    if a >= 180.0 {
        a -= 180.0;
    }
    a
}

/// L2 normalize, clip, renormalize.
pub(crate) fn l2_hys(v: &mut [f64]) {
    let scale = |v: &mut [f64]| {
        let n = (v.iter().map(|x| x * x).sum::<f64>() + NORM_EPS * NORM_EPS).sqrt();
        v.iter_mut().for_each(|x| *x /= n);
    };
    scale(v);
    v.iter_mut().for_each(|x| *x = x.min(L2HYS_CLIP));
    scale(v);
}

pub fn hog(window: &FloatImage, p: &HogParams) -> Result<FeatureVector, VisionError> {
    p.validate()?;
    if window.width() != p.window || window.height() != p.window {
        return Err(VisionError::GeometryMismatch {
            expected: (p.window, p.window),
            actual: (window.width(), window.height()),
        });
    }
    let (mag, ang) = gradients(window);
    let cells = p.cells_per_side() as usize;
    let bins = p.bins as usize;
    let bin_width = 180.0 / p.bins as f64;

    let mut hist = vec![0.0; cells * cells * bins];
    let w = p.window as usize;
    for (i, (&m, &a)) in mag.iter().zip(&ang).enumerate() {
        if m == 0.0 {
            continue;
        }
        let (x, y) = (i % w, i / w);
        let cell = (y / p.cell as usize) * cells + x / p.cell as usize;
        let pos = a / bin_width;
        let lo = pos.floor();
        let frac = pos - lo;
        let lo = lo as usize % bins;
        let hi = (lo + 1) % bins;
        hist[cell * bins + lo] += m * (1.0 - frac);
        hist[cell * bins + hi] += m * frac;
    }

    let blocks = p.blocks_per_side() as usize;
    let bs = p.block as usize;
    let mut out = Vec::with_capacity(p.dimension());
    let mut block = Vec::with_capacity(bs * bs * bins);
    for by in 0..blocks {
        for bx in 0..blocks {
            block.clear();
            for cy in by..by + bs {
                for cx in bx..bx + bs {
                    let c = cy * cells + cx;
                    block.extend_from_slice(&hist[c * bins..(c + 1) * bins]);
                }
            }
            l2_hys(&mut block);
            out.extend_from_slice(&block);
        }
    }
    Ok(FeatureVector::new(out))
}
