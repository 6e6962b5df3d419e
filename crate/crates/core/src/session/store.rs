use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cue::{CueEvent, IndicatorEvent};
use crate::proto::{FrameKind, FramePacket, LabelSet};
use crate::vision::EmotionEstimate;

pub const META_FILE: &str = "session.json";
pub const BLOB_FILE: &str = "frames.y8";
pub const INDEX_FILE: &str = "frames.idx";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const AUDIT_FILE: &str = "annotations.jsonl";
pub const INDEX_RECORD_LEN: usize = 40;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session is closed")]
    SessionClosed,
    #[error("storage full")]
    StorageFull,
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("range {start_ms}..{end_ms} outside session of {duration_ms} ms")]
    RangeOutOfBounds { start_ms: u64, end_ms: u64, duration_ms: u64 },
    #[error("frame {sequence} out of order")]
    OutOfOrder { sequence: u32 },
    #[error("frame data unavailable for deleted session")]
    Deleted,
    #[error("session {0} already exists")]
    Exists(String),
    #[error("io: {0}")]
    Io(io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<io::Error> for SessionError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::StorageFull {
            SessionError::StorageFull
        } else {
            SessionError::Io(e)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Visible,
    Hidden,
    Deleted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    /// Unix milliseconds.
    pub started_at: u64,
    pub label_set: LabelSet,
    pub config: serde_json::Value,
    pub status: SessionStatus,
    pub closed: bool,
    pub duration_ms: u64,
    pub frame_count: u64,
}

impl SessionMeta {
    pub fn load(dir: &Path) -> Result<Self, SessionError> {
        let path = dir.join(META_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(SessionError::UnknownSession(dir.display().to_string()))
            }
            Err(e) => return Err(e.into()),
        };
        Ok(serde_json::from_str(&text)?)
    }

    pub fn store(&self, dir: &Path) -> Result<(), SessionError> {
        let tmp = dir.join(format!("{META_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec_pretty(self)?)?;
        fs::rename(tmp, dir.join(META_FILE))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    Estimate(EmotionEstimate),
    Cue(CueEvent),
    Indicator(IndicatorEvent),
}

impl SessionEvent {
    pub fn timestamp_us(&self) -> u64 {
        match self {
            SessionEvent::Estimate(e) => e.timestamp_us,
            SessionEvent::Cue(c) => c.fired_at_us,
            SessionEvent::Indicator(i) => i.at_us,
        }
    }
}

/// One fixed-width entry of `frames.idx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameIndexEntry {
    pub sequence: u32,
    pub kind: FrameKind,
    pub width: u16,
    pub height: u16,
    pub crop_x: u16,
    pub crop_y: u16,
    pub source_width: u16,
    pub source_height: u16,
    pub timestamp_us: u64,
    pub offset: u64,
}

impl FrameIndexEntry {
    pub fn payload_len(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    /// Layout: seq u32, kind u8, 3 reserved, w, h, crop_x, crop_y, src_w, src_h (u16),
    /// timestamp u64, offset u64, crc32 of the previous 36 bytes and the payload.
    pub fn encode(&self, payload: &[u8]) -> [u8; INDEX_RECORD_LEN] {
        let mut r = [0u8; INDEX_RECORD_LEN];
        r[0..4].copy_from_slice(&self.sequence.to_le_bytes());
        r[4] = self.kind.to_byte();
        for (i, v) in [self.width, self.height, self.crop_x, self.crop_y, self.source_width, self.source_height].iter().enumerate() {
            r[8 + 2 * i..10 + 2 * i].copy_from_slice(&v.to_le_bytes());
        }
        r[20..28].copy_from_slice(&self.timestamp_us.to_le_bytes());
        r[28..36].copy_from_slice(&self.offset.to_le_bytes());
        let crc = record_crc(&r[..36], payload);
        r[36..40].copy_from_slice(&crc.to_le_bytes());
        r
    }

    /// Parses the fixed fields; `stored_crc` must still be checked against the payload.
    pub fn decode(r: &[u8; INDEX_RECORD_LEN]) -> Option<(Self, u32)> {
        let u16_at = |o: usize| u16::from_le_bytes([r[o], r[o + 1]]);
        let kind = FrameKind::from_byte(r[4])?;
        let entry = Self {
            sequence: u32::from_le_bytes(r[0..4].try_into().unwrap()),
            kind,
            width: u16_at(8),
            height: u16_at(10),
            crop_x: u16_at(12),
            crop_y: u16_at(14),
            source_width: u16_at(16),
            source_height: u16_at(18),
            timestamp_us: u64::from_le_bytes(r[20..28].try_into().unwrap()),
            offset: u64::from_le_bytes(r[28..36].try_into().unwrap()),
        };
        Some((entry, u32::from_le_bytes(r[36..40].try_into().unwrap())))
    }
}

fn record_crc(head: &[u8], payload: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(head);
    h.update(payload);
    h.finalize()
}

/// Reads the valid prefix of a frame index, checking each record against the blob.
/// Returns the entries and the byte lengths (index, blob) they cover.
pub fn scan_index(dir: &Path) -> Result<(Vec<FrameIndexEntry>, u64, u64), SessionError> {
    let idx = match fs::read(dir.join(INDEX_FILE)) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((Vec::new(), 0, 0)),
        Err(e) => return Err(e.into()),
    };
    let mut blob = File::open(dir.join(BLOB_FILE))?;
    let blob_len = blob.metadata()?.len();
    let mut entries: Vec<FrameIndexEntry> = Vec::with_capacity(idx.len() / INDEX_RECORD_LEN);
    let mut expected_offset = 0u64;
    let mut payload = Vec::new();
    for chunk in idx.chunks_exact(INDEX_RECORD_LEN) {
        let Some((entry, crc)) = FrameIndexEntry::decode(chunk.try_into().unwrap()) else { break };
        let end = entry.offset + entry.payload_len();
        if entry.offset != expected_offset || end > blob_len {
            break;
        }
        if let Some(prev) = entries.last() {
            if entry.sequence <= prev.sequence || entry.timestamp_us < prev.timestamp_us {
                break;
            }
        }
        payload.resize(entry.payload_len() as usize, 0);
        blob.seek(SeekFrom::Start(entry.offset))?;
        blob.read_exact(&mut payload)?;
        if record_crc(&chunk[..36], &payload) != crc {
            break;
        }
        expected_offset = end;
        entries.push(entry);
    }
    Ok((entries.clone(), (entries.len() * INDEX_RECORD_LEN) as u64, expected_offset))
}

/// Reads complete event lines; a torn trailing line is ignored.
/// Returns the events and the byte length they cover.
pub fn scan_events(dir: &Path) -> Result<(Vec<SessionEvent>, u64), SessionError> {
    let file = match File::open(dir.join(EVENTS_FILE)) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut covered = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 || !line.ends_with('\n') {
            break;
        }
        match serde_json::from_str(line.trim_end()) {
            Ok(ev) => out.push(ev),
            Err(_) => break,
        }
        covered += n as u64;
    }
    Ok((out, covered))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WriterLimits {
    /// Total bytes the writer may append across blob, index and events.
    pub max_bytes: Option<u64>,
}

/// Append-only writer for one session directory.
#[derive(Debug)]
pub struct SessionWriter {
    dir: PathBuf,
    meta: SessionMeta,
    blob: File,
    index: File,
    events: File,
    blob_len: u64,
    last: Option<(u32, u64)>,
    written: u64,
    limits: WriterLimits,
    closed: bool,
}

impl SessionWriter {
    pub fn create(
        dir: &Path,
        session_id: &str,
        label_set: LabelSet,
        config: serde_json::Value,
    ) -> Result<Self, SessionError> {
        if dir.join(META_FILE).exists() {
            return Err(SessionError::Exists(session_id.to_string()));
        }
        fs::create_dir_all(dir)?;
        let meta = SessionMeta {
            session_id: session_id.to_string(),
            started_at: unix_ms(),
            label_set,
            config,
            status: SessionStatus::Visible,
            closed: false,
            duration_ms: 0,
            frame_count: 0,
        };
        meta.store(dir)?;
        for f in [BLOB_FILE, INDEX_FILE, EVENTS_FILE, AUDIT_FILE] {
            File::create(dir.join(f))?;
        }
        Self::open_files(dir, meta, Vec::new(), 0)
    }

    /// Reopens a session for appending, discarding any torn trailing records.
    pub fn reopen(dir: &Path) -> Result<Self, SessionError> {
        let mut meta = SessionMeta::load(dir)?;
        if meta.status == SessionStatus::Deleted {
            return Err(SessionError::Deleted);
        }
        let (entries, idx_len, blob_len) = scan_index(dir)?;
        let (_, events_len) = scan_events(dir)?;
        OpenOptions::new().write(true).open(dir.join(INDEX_FILE))?.set_len(idx_len)?;
        OpenOptions::new().write(true).open(dir.join(BLOB_FILE))?.set_len(blob_len)?;
        OpenOptions::new().write(true).open(dir.join(EVENTS_FILE))?.set_len(events_len)?;
        meta.closed = false;
        meta.frame_count = entries.len() as u64;
        Self::open_files(dir, meta, entries, blob_len)
    }

    fn open_files(dir: &Path, meta: SessionMeta, entries: Vec<FrameIndexEntry>, blob_len: u64) -> Result<Self, SessionError> {
        let append = |name: &str| OpenOptions::new().append(true).open(dir.join(name));
        Ok(Self {
            dir: dir.to_path_buf(),
            blob: append(BLOB_FILE)?,
            index: append(INDEX_FILE)?,
            events: append(EVENTS_FILE)?,
            blob_len,
            last: entries.last().map(|e| (e.sequence, e.timestamp_us)),
            written: 0,
            limits: WriterLimits::default(),
            closed: false,
            meta,
        })
    }

    pub fn with_limits(mut self, limits: WriterLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn meta(&self) -> &SessionMeta {
        &self.meta
    }

    pub fn frame_count(&self) -> u64 {
        self.meta.frame_count
    }

    fn reserve(&mut self, bytes: u64) -> Result<(), SessionError> {
        if self.closed {
            return Err(SessionError::SessionClosed);
        }
        if self.limits.max_bytes.is_some_and(|m| self.written + bytes > m) {
            return Err(SessionError::StorageFull);
        }
        Ok(())
    }

    pub fn record_frame(&mut self, packet: &FramePacket) -> Result<(), SessionError> {
        self.reserve(packet.payload.len() as u64 + INDEX_RECORD_LEN as u64)?;
        if let Some((seq, ts)) = self.last {
            if packet.sequence <= seq || packet.timestamp_us < ts {
                return Err(SessionError::OutOfOrder { sequence: packet.sequence });
            }
        }
        let entry = FrameIndexEntry {
            sequence: packet.sequence,
            kind: packet.kind,
            width: packet.width,
            height: packet.height,
            crop_x: packet.crop_x,
            crop_y: packet.crop_y,
            source_width: packet.source_width,
            source_height: packet.source_height,
            timestamp_us: packet.timestamp_us,
            offset: self.blob_len,
        };
        self.blob.write_all(&packet.payload)?;
        self.index.write_all(&entry.encode(&packet.payload))?;
        self.blob_len += packet.payload.len() as u64;
        self.written += packet.payload.len() as u64 + INDEX_RECORD_LEN as u64;
        self.last = Some((packet.sequence, packet.timestamp_us));
        self.meta.frame_count += 1;
        self.meta.duration_ms = self.meta.duration_ms.max(packet.timestamp_us.div_ceil(1000));
        Ok(())
    }

    pub fn record_event(&mut self, event: &SessionEvent) -> Result<(), SessionError> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        self.reserve(line.len() as u64)?;
        self.events.write_all(&line)?;
        self.written += line.len() as u64;
        self.meta.duration_ms = self.meta.duration_ms.max(event.timestamp_us().div_ceil(1000));
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), SessionError> {
        if self.closed {
            return Err(SessionError::SessionClosed);
        }
        self.blob.sync_data()?;
        self.index.sync_data()?;
        self.events.sync_data()?;
        self.meta.store(&self.dir)
    }

    /// Finalizes the session. `duration_ms` overrides the duration derived from the recorded data.
    pub fn close(&mut self, duration_ms: Option<u64>) -> Result<SessionMeta, SessionError> {
        self.flush()?;
        if let Some(d) = duration_ms {
            self.meta.duration_ms = self.meta.duration_ms.max(d);
        }
        self.meta.closed = true;
        self.meta.store(&self.dir)?;
        self.closed = true;
        Ok(self.meta.clone())
    }
}

/// Read access to a stored session.
#[derive(Debug, Clone)]
pub struct SessionReader {
    dir: PathBuf,
    meta: SessionMeta,
    frames: Vec<FrameIndexEntry>,
}

impl SessionReader {
    pub fn open(dir: &Path) -> Result<Self, SessionError> {
        let meta = SessionMeta::load(dir)?;
        let frames = if meta.status == SessionStatus::Deleted { Vec::new() } else { scan_index(dir)?.0 };
        Ok(Self { dir: dir.to_path_buf(), meta, frames })
    }

    pub fn meta(&self) -> &SessionMeta {
        &self.meta
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn frames(&self) -> &[FrameIndexEntry] {
        &self.frames
    }

    pub fn read_frame(&self, i: usize) -> Result<FramePacket, SessionError> {
        if self.meta.status == SessionStatus::Deleted {
            return Err(SessionError::Deleted);
        }
        let e = self.frames[i];
        let mut blob = File::open(self.dir.join(BLOB_FILE))?;
        blob.seek(SeekFrom::Start(e.offset))?;
        let mut payload = vec![0u8; e.payload_len() as usize];
        blob.read_exact(&mut payload)?;
        Ok(FramePacket {
            kind: e.kind,
            sequence: e.sequence,
            timestamp_us: e.timestamp_us,
            source_width: e.source_width,
            source_height: e.source_height,
            width: e.width,
            height: e.height,
            crop_x: e.crop_x,
            crop_y: e.crop_y,
            payload,
        })
    }

    pub fn events(&self) -> Result<Vec<SessionEvent>, SessionError> {
        Ok(scan_events(&self.dir)?.0)
    }

    pub fn estimates(&self) -> Result<Vec<EmotionEstimate>, SessionError> {
        Ok(self
            .events()?
            .into_iter()
            .filter_map(|e| match e {
                SessionEvent::Estimate(e) => Some(e),
                _ => None,
            })
            .collect())
    }

    pub fn cues(&self) -> Result<Vec<CueEvent>, SessionError> {
        Ok(self
            .events()?
            .into_iter()
            .filter_map(|e| match e {
                SessionEvent::Cue(c) => Some(c),
                _ => None,
            })
            .collect())
    }
}

pub fn unix_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
