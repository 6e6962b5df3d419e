//! Device/host UDP wire protocol.
//!
//! Two datagram types share one socket and are told apart by the `kind`
//! byte: frames (device to host) and results (host to device). All
//! multi-byte integers are little-endian. `protocol.md` at the repository
//! root is the normative layout reference.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: u16 = 0x5347;
pub const VERSION: u8 = 1;
pub const FRAME_HEADER_LEN: usize = 24;
pub const RESULT_LEN: usize = 20;
/// Largest UDP payload over IPv4.
pub const MAX_DATAGRAM: usize = 65_507;
pub const MAX_FRAME_PAYLOAD: usize = MAX_DATAGRAM - FRAME_HEADER_LEN;
pub const NO_LABEL: u8 = 255;
pub const CONFIDENCE_SCALE: u16 = 10_000;

const KIND_FULL: u8 = 0;
const KIND_CROP: u8 = 1;
const KIND_RESULT: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtoError {
    #[error("bad magic 0x{0:04x}")]
    BadMagic(u16),
    #[error("unsupported protocol version {0}")]
    BadVersion(u8),
    #[error("unknown packet kind {0}")]
    BadKind(u8),
    #[error("datagram of {0} bytes is shorter than its header")]
    TruncatedHeader(usize),
    #[error("payload truncated: expected {expected} bytes, got {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    FullFrame,
    FaceCrop,
}

impl FrameKind {
    pub fn to_byte(self) -> u8 {
        match self {
            FrameKind::FullFrame => KIND_FULL,
            FrameKind::FaceCrop => KIND_CROP,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            KIND_FULL => Some(FrameKind::FullFrame),
            KIND_CROP => Some(FrameKind::FaceCrop),
            _ => None,
        }
    }
}

/// One greyscale frame, device to host.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePacket {
    pub kind: FrameKind,
    pub sequence: u32,
    /// Microseconds since session start. Carried as u32 on the wire (about 71 minutes).
    pub timestamp_us: u64,
    pub source_width: u16,
    pub source_height: u16,
    pub width: u16,
    pub height: u16,
    pub crop_x: u16,
    pub crop_y: u16,
    pub payload: Vec<u8>,
}

impl FramePacket {
    pub fn validate(&self) -> Result<(), ProtoError> {
        let expected = self.width as usize * self.height as usize;
        if self.payload.len() != expected {
            return Err(ProtoError::InvariantViolation(format!(
                "payload is {} bytes, geometry {}x{} needs {expected}",
                self.payload.len(),
                self.width,
                self.height
            )));
        }
        if expected > MAX_FRAME_PAYLOAD {
            return Err(ProtoError::InvariantViolation(format!(
                "payload of {expected} bytes exceeds the {MAX_FRAME_PAYLOAD}-byte datagram budget"
            )));
        }
        if self.timestamp_us > u32::MAX as u64 {
            return Err(ProtoError::InvariantViolation(format!(
                "timestamp {}us does not fit the 32-bit wire field",
                self.timestamp_us
            )));
        }
        check_frame_geometry(self.kind, self.crop_x, self.crop_y, self.width, self.height, self.source_width, self.source_height)
            .map_err(ProtoError::InvariantViolation)
    }

    pub fn encoded_len(&self) -> usize {
        FRAME_HEADER_LEN + self.payload.len()
    }
}

fn check_frame_geometry(kind: FrameKind, cx: u16, cy: u16, w: u16, h: u16, sw: u16, sh: u16) -> Result<(), String> {
    if cx as u32 + w as u32 > sw as u32 || cy as u32 + h as u32 > sh as u32 {
        return Err(format!("region {w}x{h}+{cx}+{cy} exceeds source {sw}x{sh}"));
    }
    if kind == FrameKind::FullFrame && (cx, cy) != (0, 0) {
        return Err(format!("full frame with crop origin ({cx},{cy})"));
    }
    Ok(())
}

pub fn encode_frame(packet: &FramePacket) -> Result<Vec<u8>, ProtoError> {
    packet.validate()?;
    let mut out = Vec::with_capacity(packet.encoded_len());
    out.extend_from_slice(&MAGIC.to_le_bytes());
    out.push(VERSION);
    out.push(packet.kind.to_byte());
    out.extend_from_slice(&packet.sequence.to_le_bytes());
    out.extend_from_slice(&(packet.timestamp_us as u32).to_le_bytes());
    for v in [
        packet.source_width,
        packet.source_height,
        packet.width,
        packet.height,
        packet.crop_x,
        packet.crop_y,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    debug_assert_eq!(out.len(), FRAME_HEADER_LEN);
    out.extend_from_slice(&packet.payload);
    Ok(out)
}

#[inline]
fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

#[inline]
fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

// Magic, version and the kind byte; needs at least 4 bytes.
fn preamble(bytes: &[u8]) -> Result<u8, ProtoError> {
    if bytes.len() < 4 {
        return Err(ProtoError::TruncatedHeader(bytes.len()));
    }
    let magic = u16_at(bytes, 0);
    if magic != MAGIC {
        return Err(ProtoError::BadMagic(magic));
    }
    if bytes[2] != VERSION {
        return Err(ProtoError::BadVersion(bytes[2]));
    }
    Ok(bytes[3])
}

pub fn decode_frame(bytes: &[u8]) -> Result<FramePacket, ProtoError> {
    let kind = match preamble(bytes)? {
        KIND_FULL => FrameKind::FullFrame,
        KIND_CROP => FrameKind::FaceCrop,
        other => return Err(ProtoError::BadKind(other)),
    };
    if bytes.len() < FRAME_HEADER_LEN {
        return Err(ProtoError::TruncatedHeader(bytes.len()));
    }
    let (sw, sh, w, h, cx, cy) = (
        u16_at(bytes, 12),
        u16_at(bytes, 14),
        u16_at(bytes, 16),
        u16_at(bytes, 18),
        u16_at(bytes, 20),
        u16_at(bytes, 22),
    );
    let expected = w as usize * h as usize;
    let actual = bytes.len() - FRAME_HEADER_LEN;
    if actual < expected {
        return Err(ProtoError::TruncatedPayload { expected, actual });
    }
    if actual > expected {
        return Err(ProtoError::GeometryMismatch(format!(
            "{actual} payload bytes for a {w}x{h} frame"
        )));
    }
    check_frame_geometry(kind, cx, cy, w, h, sw, sh).map_err(ProtoError::GeometryMismatch)?;
    Ok(FramePacket {
        kind,
        sequence: u32_at(bytes, 4),
        timestamp_us: u32_at(bytes, 8) as u64,
        source_width: sw,
        source_height: sh,
        width: w,
        height: h,
        crop_x: cx,
        crop_y: cy,
        payload: bytes[FRAME_HEADER_LEN..].to_vec(),
    })
}

/// Host request carried in a result datagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    #[default]
    None,
    StartActivity,
    StopActivity,
    Recalibrate,
}

impl Command {
    fn to_nibble(self) -> u8 {
        match self {
            Command::None => 0,
            Command::StartActivity => 1,
            Command::StopActivity => 2,
            Command::Recalibrate => 3,
        }
    }

    fn from_nibble(v: u8) -> Option<Self> {
        Some(match v {
            0 => Command::None,
            1 => Command::StartActivity,
            2 => Command::StopActivity,
            3 => Command::Recalibrate,
            _ => return None,
        })
    }
}

/// Per-frame answer, host to device. Face geometry is in source coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ResultPacket {
    pub sequence: u32,
    pub face_present: bool,
    pub face_x: u16,
    pub face_y: u16,
    pub face_w: u16,
    pub face_h: u16,
    /// Label index, or [`NO_LABEL`].
    pub label: u8,
    /// Fixed point, 0..=10000 maps to 0.0..=1.0.
    pub confidence: u16,
    pub command: Command,
}

impl ResultPacket {
    /// A "no face" answer for `sequence`.
    pub fn empty(sequence: u32) -> Self {
        Self {
            sequence,
            label: NO_LABEL,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ProtoError> {
        if !self.face_present && (self.label != NO_LABEL || self.face_w != 0 || self.face_h != 0) {
            return Err(ProtoError::InvariantViolation(
                "face absent but label or face size set".into(),
            ));
        }
        if self.confidence > CONFIDENCE_SCALE {
            return Err(ProtoError::InvariantViolation(format!(
                "confidence {} above {CONFIDENCE_SCALE}",
                self.confidence
            )));
        }
        Ok(())
    }

    pub fn confidence_f64(&self) -> f64 {
        self.confidence as f64 / CONFIDENCE_SCALE as f64
    }
}

/// Converts a probability to the wire fixed-point representation.
pub fn confidence_to_fixed(p: f64) -> u16 {
    (p.clamp(0.0, 1.0) * CONFIDENCE_SCALE as f64).round() as u16
}

pub fn encode_result(packet: &ResultPacket) -> Result<Vec<u8>, ProtoError> {
    packet.validate()?;
    let mut out = Vec::with_capacity(RESULT_LEN);
    out.extend_from_slice(&MAGIC.to_le_bytes());
    out.push(VERSION);
    out.push(KIND_RESULT);
    out.extend_from_slice(&packet.sequence.to_le_bytes());
    out.push(packet.face_present as u8 | packet.command.to_nibble() << 4);
    for v in [packet.face_x, packet.face_y, packet.face_w, packet.face_h] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(packet.label);
    out.extend_from_slice(&packet.confidence.to_le_bytes());
    debug_assert_eq!(out.len(), RESULT_LEN);
    Ok(out)
}

pub fn decode_result(bytes: &[u8]) -> Result<ResultPacket, ProtoError> {
    match preamble(bytes)? {
        KIND_RESULT => {}
        other => return Err(ProtoError::BadKind(other)),
    }
    if bytes.len() < RESULT_LEN {
        return Err(ProtoError::TruncatedHeader(bytes.len()));
    }
    if bytes.len() > RESULT_LEN {
        return Err(ProtoError::GeometryMismatch(format!(
            "result datagram of {} bytes",
            bytes.len()
        )));
    }
    let flags = bytes[8];
    let face_present = match flags & 0x0f {
        0 => false,
        1 => true,
        v => return Err(ProtoError::InvariantViolation(format!("face_present flag {v}"))),
    };
    let command = Command::from_nibble(flags >> 4)
        .ok_or_else(|| ProtoError::InvariantViolation(format!("command {}", flags >> 4)))?;
    let packet = ResultPacket {
        sequence: u32_at(bytes, 4),
        face_present,
        face_x: u16_at(bytes, 9),
        face_y: u16_at(bytes, 11),
        face_w: u16_at(bytes, 13),
        face_h: u16_at(bytes, 15),
        label: bytes[17],
        confidence: u16_at(bytes, 18),
        command,
    };
    packet.validate()?;
    Ok(packet)
}

/// Either datagram type, as multiplexed on one socket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Frame(FramePacket),
    Result(ResultPacket),
}

pub fn decode_packet(bytes: &[u8]) -> Result<Packet, ProtoError> {
    match preamble(bytes)? {
        KIND_FULL | KIND_CROP => decode_frame(bytes).map(Packet::Frame),
        KIND_RESULT => decode_result(bytes).map(Packet::Result),
        other => Err(ProtoError::BadKind(other)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelSetError {
    #[error("label set is empty")]
    Empty,
    #[error("label set has {0} entries, at most 254 allowed")]
    TooLarge(usize),
    #[error("duplicate label {0:?}")]
    Duplicate(String),
    #[error("neutral index {0} out of range")]
    NeutralOutOfRange(usize),
}

/// Ordered emotion labels; indices are what travels on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLabelSet")]
pub struct LabelSet {
    labels: Vec<String>,
    neutral_index: usize,
}

#[derive(Deserialize)]
struct RawLabelSet {
    labels: Vec<String>,
    neutral_index: usize,
}

impl TryFrom<RawLabelSet> for LabelSet {
    type Error = LabelSetError;

    fn try_from(raw: RawLabelSet) -> Result<Self, Self::Error> {
        LabelSet::new(raw.labels, raw.neutral_index)
    }
}

impl LabelSet {
    pub fn new(labels: Vec<String>, neutral_index: usize) -> Result<Self, LabelSetError> {
        if labels.is_empty() {
            return Err(LabelSetError::Empty);
        }
        if labels.len() > 254 {
            return Err(LabelSetError::TooLarge(labels.len()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(LabelSetError::Duplicate(l.clone()));
            }
        }
        if neutral_index >= labels.len() {
            return Err(LabelSetError::NeutralOutOfRange(neutral_index));
        }
        Ok(Self { labels, neutral_index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn neutral_index(&self) -> usize {
        self.neutral_index
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    pub fn names(&self) -> &[String] {
        &self.labels
    }
}

impl Default for LabelSet {
    fn default() -> Self {
        let labels = ["happy", "sad", "angry", "scared", "surprised", "disgust", "contempt", "neutral"];
        LabelSet::new(labels.iter().map(|s| s.to_string()).collect(), 7).expect("valid default labels")
    }
}
