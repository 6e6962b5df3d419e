use serde::{Deserialize, Serialize};

use crate::geom::Rect;
use crate::image::GrayImage;

/// Finds at most one face in a greyscale image.
pub trait FaceLocator: Send {
    fn locate(&self, img: &GrayImage) -> Option<Rect>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum LocatorKind {
    Blob { threshold: u8, min_area: u32 },
    EllipseFit { threshold: u8, min_area: u32 },
}

impl Default for LocatorKind {
    fn default() -> Self {
        LocatorKind::EllipseFit {
            threshold: 150,
            min_area: 64,
        }
    }
}

impl LocatorKind {
    pub fn build(self) -> Box<dyn FaceLocator> {
        match self {
            LocatorKind::Blob { threshold, min_area } => Box::new(BlobLocator { threshold, min_area }),
            LocatorKind::EllipseFit { threshold, min_area } => Box::new(EllipseFitLocator { threshold, min_area }),
        }
    }
}

// One connected bright region: its pixel count, bounding box and, per row,
// the leftmost and rightmost member column.
struct Component {
    area: u32,
    bbox: Rect,
    rows: Vec<(u32, u32, u32)>,
}

fn largest_component(img: &GrayImage, threshold: u8) -> Option<Component> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.as_raw();
    let mut seen = vec![false; w * h];
    let mut best: Option<Component> = None;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if seen[start] || raw[start] < threshold {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut members = Vec::new();
        while let Some(p) = stack.pop() {
            members.push(p);
            let (x, y) = (p % w, p / w);
            let mut visit = |q: usize| {
                if !seen[q] && raw[q] >= threshold {
                    seen[q] = true;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        if best.as_ref().is_some_and(|b| b.area as usize >= members.len()) {
            continue;
        }
        members.sort_unstable();
        let mut rows: Vec<(u32, u32, u32)> = Vec::new();
        for &p in &members {
            let (x, y) = ((p % w) as u32, (p / w) as u32);
            match rows.last_mut() {
                Some(r) if r.0 == y => {
                    r.1 = r.1.min(x);
                    r.2 = r.2.max(x);
                }
                _ => rows.push((y, x, x)),
            }
        }
        let x0 = rows.iter().map(|r| r.1).min().unwrap();
        let x1 = rows.iter().map(|r| r.2).max().unwrap();
        let (y0, y1) = (rows.first().unwrap().0, rows.last().unwrap().0);
        best = Some(Component {
            area: members.len() as u32,
            bbox: Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
            rows,
        });
    }
    best
}

/// Bounding box of the largest bright connected region.
#[derive(Debug, Clone, Copy)]
pub struct BlobLocator {
    pub threshold: u8,
    pub min_area: u32,
}

impl FaceLocator for BlobLocator {
    fn locate(&self, img: &GrayImage) -> Option<Rect> {
        largest_component(img, self.threshold)
            .filter(|c| c.area >= self.min_area)
            .map(|c| c.bbox)
    }
}

/// Fits an axis-aligned ellipse to the largest bright region by second
/// moments of its row-filled silhouette, which recovers the synthetic scene's
/// face ellipse even when dark features punch holes in it.
#[derive(Debug, Clone, Copy)]
pub struct EllipseFitLocator {
    pub threshold: u8,
    pub min_area: u32,
}

impl FaceLocator for EllipseFitLocator {
    fn locate(&self, img: &GrayImage) -> Option<Rect> {
        let c = largest_component(img, self.threshold).filter(|c| c.area >= self.min_area)?;
        let (mut n, mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(y, x0, x1) in &c.rows {
            for x in x0..=x1 {
                let (xf, yf) = (x as f64 + 0.5, y as f64 + 0.5);
                n += 1.0;
                sx += xf;
                sy += yf;
                sxx += xf * xf;
                syy += yf * yf;
            }
        }
        let (mx, my) = (sx / n, sy / n);
        // A filled ellipse with semi-axis a has variance a^2 / 4 along that axis.
        let ax = 2.0 * (sxx / n - mx * mx).max(0.0).sqrt();
        let ay = 2.0 * (syy / n - my * my).max(0.0).sqrt();
        let x0 = (mx - ax).round().max(0.0) as u32;
        let y0 = (my - ay).round().max(0.0) as u32;
        let x1 = ((mx + ax).round() as u32).min(img.width());
        let y1 = ((my + ay).round() as u32).min(img.height());
        (x1 > x0 && y1 > y0).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }
}
