use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::image::GrayImage;
use crate::synth::{SceneTruth, SyntheticScene};

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("decode {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("frame {path} is {actual:?}, expected {expected:?}")]
    GeometryChanged { path: PathBuf, expected: (u32, u32), actual: (u32, u32) },
    #[error("no frames found in {0}")]
    Empty(PathBuf),
}

/// Yields greyscale frames at the native geometry.
pub trait CaptureSource: Send {
    fn geometry(&self) -> (u32, u32);

    /// Returns the frame for `timestamp_us`, or `None` once the source is exhausted.
    fn capture(&mut self, timestamp_us: u64) -> Result<Option<GrayImage>, CaptureError>;

    /// Ground truth when the source knows it.
    fn truth(&self, _timestamp_us: u64) -> Option<SceneTruth> {
        None
    }
}

impl CaptureSource for SyntheticScene {
    fn geometry(&self) -> (u32, u32) {
        SyntheticScene::geometry(self)
    }

    fn capture(&mut self, timestamp_us: u64) -> Result<Option<GrayImage>, CaptureError> {
        Ok(Some(self.render(timestamp_us).0))
    }

    fn truth(&self, timestamp_us: u64) -> Option<SceneTruth> {
        Some(SyntheticScene::truth(self, timestamp_us))
    }
}

/// Plays back the PGM/PNG files of a directory in file-name order, one per capture.
#[derive(Debug)]
pub struct DirectoryCapture {
    files: Vec<PathBuf>,
    next: usize,
    geometry: (u32, u32),
    looping: bool,
}

impl DirectoryCapture {
    pub fn open(dir: &Path) -> Result<Self, CaptureError> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
                    Some("pgm" | "png")
                )
            })
            .collect();
        files.sort();
        let first = files.first().ok_or_else(|| CaptureError::Empty(dir.to_path_buf()))?;
        let img = load_gray(first)?;
        Ok(Self { geometry: (img.width(), img.height()), files, next: 0, looping: false })
    }

    pub fn looping(mut self, on: bool) -> Self {
        self.looping = on;
        self
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

impl CaptureSource for DirectoryCapture {
    fn geometry(&self) -> (u32, u32) {
        self.geometry
    }

    fn capture(&mut self, _timestamp_us: u64) -> Result<Option<GrayImage>, CaptureError> {
        if self.next >= self.files.len() {
            if !self.looping {
                return Ok(None);
            }
            self.next = 0;
        }
        let path = &self.files[self.next];
        self.next += 1;
        let img = load_gray(path)?;
        if (img.width(), img.height()) != self.geometry {
            return Err(CaptureError::GeometryChanged {
                path: path.clone(),
                expected: self.geometry,
                actual: (img.width(), img.height()),
            });
        }
        Ok(Some(img))
    }
}

pub fn load_gray(path: &Path) -> Result<GrayImage, CaptureError> {
    let decoded = image::open(path).map_err(|e| CaptureError::Decode { path: path.to_path_buf(), message: e.to_string() })?;
    let luma = decoded.into_luma8();
    let (w, h) = luma.dimensions();
    Ok(GrayImage::from_raw(w, h, luma.into_raw()).expect("luma buffer size"))
}

/// Writes a binary PGM (P5).
pub fn save_pgm(img: &GrayImage, path: &Path) -> std::io::Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.as_raw());
    std::fs::write(path, out)
}
