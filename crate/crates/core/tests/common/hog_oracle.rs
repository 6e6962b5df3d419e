//! Scalar HOG written straight from the definition, one cell at a time.

use std::f64::consts::PI;

use rand::Rng;

pub struct Geometry {
    pub window: usize,
    pub cell: usize,
    pub block: usize,
    pub bins: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry { window: 64, cell: 8, block: 2, bins: 9 }
    }
}

fn px(img: &[f64], n: usize, x: isize, y: isize) -> f64 {
    let cx = x.clamp(0, n as isize - 1) as usize;
    let cy = y.clamp(0, n as isize - 1) as usize;
    img[cy * n + cx]
}

fn cell_histogram(img: &[f64], g: &Geometry, cx: usize, cy: usize) -> Vec<f64> {
    let mut h = vec![0.0; g.bins];
    let width = PI / g.bins as f64;
    for y in cy * g.cell..(cy + 1) * g.cell {
        for x in cx * g.cell..(cx + 1) * g.cell {
            let (xi, yi) = (x as isize, y as isize);
            let dx = px(img, g.window, xi + 1, yi) - px(img, g.window, xi - 1, yi);
            let dy = px(img, g.window, xi, yi + 1) - px(img, g.window, xi, yi - 1);
            let m = (dx * dx + dy * dy).sqrt();
            if m == 0.0 {
                continue;
            }
            let mut theta = dy.atan2(dx);
            while theta < 0.0 {
                theta += PI;
            }
            while theta >= PI {
                theta -= PI;
            }
            let t = theta / width;
            let b0 = t.floor() as usize;
            let w1 = t - b0 as f64;
            h[b0 % g.bins] += m * (1.0 - w1);
            h[(b0 + 1) % g.bins] += m * w1;
        }
    }
    h
}

fn normalize(v: &mut [f64]) {
    let eps2 = 1e-6;
    let n = (v.iter().map(|a| a * a).sum::<f64>() + eps2).sqrt();
    for a in v.iter_mut() {
        *a = (*a / n).min(0.2);
    }
    let n = (v.iter().map(|a| a * a).sum::<f64>() + eps2).sqrt();
    for a in v.iter_mut() {
        *a /= n;
    }
}

/// `img` is row-major `window x window`.
pub fn naive_hog(img: &[f64], g: &Geometry) -> Vec<f64> {
    let cells = g.window / g.cell;
    let mut out = Vec::new();
    for by in 0..=cells - g.block {
        for bx in 0..=cells - g.block {
            let mut v = Vec::new();
            for j in 0..g.block {
                for i in 0..g.block {
                    v.extend(cell_histogram(img, g, bx + i, by + j));
                }
            }
            normalize(&mut v);
            out.extend(v);
        }
    }
    out
}

/// A 64x64 test window: noise, smooth ramps, or flat shapes with hard edges.
pub fn random_window(rng: &mut impl Rng, kind: usize) -> Vec<f64> {
    let n = 64;
    match kind % 3 {
        0 => (0..n * n).map(|_| rng.random_range(0.0..255.0)).collect(),
        1 => {
            let (a, b, c) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.0..40.0));
            (0..n * n)
                .map(|i| {
                    let (x, y) = ((i % n) as f64, (i / n) as f64);
                    a * x + b * y + c * ((x * 0.3).sin() + (y * 0.2).cos()) + rng.random_range(0.0..2.0)
                })
                .collect()
        }
        _ => {
            // flat regions with a few sharp shapes
            let (cx, cy, r) = (rng.random_range(10.0..54.0), rng.random_range(10.0..54.0), rng.random_range(5.0..25.0));
            (0..n * n)
                .map(|i| {
                    let (x, y) = ((i % n) as f64, (i / n) as f64);
                    if (x - cx).powi(2) + (y - cy).powi(2) < r * r { 200.0 } else if x > 40.0 { 90.0 } else { 30.0 }
                })
                .collect()
        }
    }
}
