//! Real-time social-cue engine.
//!
//! A device agent streams greyscale frames over UDP to a host engine that
//! locates the face, classifies the expression against a runtime-learned
//! neutral baseline, filters the per-frame stream into sparse cues and
//! records the session for later review.

pub mod calib;
pub mod cue;
pub mod device;
pub mod engine;
pub mod geom;
pub mod image;
pub mod net;
pub mod proto;
pub mod session;
pub mod synth;
pub mod vision;

pub use geom::Rect;
