use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::session::store::{unix_ms, SessionError, SessionMeta, SessionStatus, AUDIT_FILE, BLOB_FILE, INDEX_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    ImportantMark,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub kind: AnnotationKind,
    pub start_ms: u64,
    pub end_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub author: String,
    /// Unix milliseconds.
    pub created_at: u64,
}

impl Annotation {
    pub fn mark(start_ms: u64, end_ms: u64, author: &str) -> Self {
        Self { kind: AnnotationKind::ImportantMark, start_ms, end_ms, text: None, author: author.into(), created_at: unix_ms() }
    }

    pub fn comment(start_ms: u64, end_ms: u64, author: &str, text: &str) -> Self {
        Self {
            kind: AnnotationKind::Comment,
            start_ms,
            end_ms,
            text: Some(text.into()),
            author: author.into(),
            created_at: unix_ms(),
        }
    }
}

/// One line of the append-only review log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum AuditEntry {
    Annotate { at: u64, annotation: Annotation },
    SetStatus { at: u64, status: SessionStatus },
}

/// Review state derived from the audit log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewState {
    pub status: SessionStatus,
    pub annotations: Vec<Annotation>,
}

pub fn replay(entries: &[AuditEntry]) -> ReviewState {
    let mut state = ReviewState { status: SessionStatus::Visible, annotations: Vec::new() };
    for e in entries {
        match e {
            AuditEntry::Annotate { annotation, .. } => state.annotations.push(annotation.clone()),
            AuditEntry::SetStatus { status, .. } => {
                // deletion is final
                if state.status != SessionStatus::Deleted {
                    state.status = *status;
                }
            }
        }
    }
    state
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub started_at: u64,
    pub duration_ms: u64,
    pub frame_count: u64,
    pub status: SessionStatus,
    pub annotations: usize,
    pub path: PathBuf,
}

/// A directory of session directories.
#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

impl SessionStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, session_id: &str) -> PathBuf {
        self.root.join(session_id)
    }

    fn meta(&self, session_id: &str) -> Result<SessionMeta, SessionError> {
        if session_id.is_empty() || session_id.contains(['/', '\\']) || session_id.starts_with('.') {
            return Err(SessionError::UnknownSession(session_id.to_string()));
        }
        SessionMeta::load(&self.path_of(session_id)).map_err(|e| match e {
            SessionError::UnknownSession(_) => SessionError::UnknownSession(session_id.to_string()),
            other => other,
        })
    }

    /// Newsfeed listing, oldest first. Hidden sessions are left out unless asked for;
    /// deleted ones appear as tombstones.
    pub fn list(&self, include_hidden: bool) -> Result<Vec<SessionSummary>, SessionError> {
        let mut out = Vec::new();
        let dir = match fs::read_dir(&self.root) {
            Ok(d) => d,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(e.into()),
        };
        for entry in dir {
            let path = entry?.path();
            let Ok(meta) = SessionMeta::load(&path) else { continue };
            if meta.status == SessionStatus::Hidden && !include_hidden {
                continue;
            }
            let annotations = read_audit(&path)?.iter().filter(|e| matches!(e, AuditEntry::Annotate { .. })).count();
            out.push(SessionSummary {
                session_id: meta.session_id,
                started_at: meta.started_at,
                duration_ms: meta.duration_ms,
                frame_count: meta.frame_count,
                status: meta.status,
                annotations,
                path,
            });
        }
        out.sort_by(|a, b| (a.started_at, &a.session_id).cmp(&(b.started_at, &b.session_id)));
        Ok(out)
    }

    pub fn annotate(&self, session_id: &str, annotation: Annotation) -> Result<(), SessionError> {
        let meta = self.meta(session_id)?;
        if annotation.start_ms > annotation.end_ms || annotation.end_ms > meta.duration_ms {
            return Err(SessionError::RangeOutOfBounds {
                start_ms: annotation.start_ms,
                end_ms: annotation.end_ms,
                duration_ms: meta.duration_ms,
            });
        }
        append_audit(&self.path_of(session_id), &AuditEntry::Annotate { at: unix_ms(), annotation })
    }

    pub fn annotations(&self, session_id: &str) -> Result<Vec<Annotation>, SessionError> {
        self.meta(session_id)?;
        Ok(replay(&read_audit(&self.path_of(session_id))?).annotations)
    }

    pub fn set_status(&self, session_id: &str, status: SessionStatus) -> Result<(), SessionError> {
        let mut meta = self.meta(session_id)?;
        let dir = self.path_of(session_id);
        if meta.status == SessionStatus::Deleted {
            if status == SessionStatus::Deleted {
                return Ok(());
            }
            return Err(SessionError::Deleted);
        }
        append_audit(&dir, &AuditEntry::SetStatus { at: unix_ms(), status })?;
        if status == SessionStatus::Deleted {
            for f in [BLOB_FILE, INDEX_FILE] {
                match fs::remove_file(dir.join(f)) {
                    Ok(()) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        meta.status = status;
        meta.store(&dir)
    }

    pub fn audit_log(&self, session_id: &str) -> Result<Vec<AuditEntry>, SessionError> {
        self.meta(session_id)?;
        read_audit(&self.path_of(session_id))
    }

    /// Current review state as stored (status from session.json, annotations from the log).
    pub fn review_state(&self, session_id: &str) -> Result<ReviewState, SessionError> {
        let meta = self.meta(session_id)?;
        let entries = read_audit(&self.path_of(session_id))?;
        Ok(ReviewState { status: meta.status, annotations: replay(&entries).annotations })
    }
}

fn append_audit(dir: &Path, entry: &AuditEntry) -> Result<(), SessionError> {
    let mut line = serde_json::to_vec(entry)?;
    line.push(b'\n');
    let mut f = OpenOptions::new().create(true).append(true).open(dir.join(AUDIT_FILE))?;
    f.write_all(&line)?;
    f.sync_data()?;
    Ok(())
}

pub fn read_audit(dir: &Path) -> Result<Vec<AuditEntry>, SessionError> {
    let f = match fs::File::open(dir.join(AUDIT_FILE)) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(e) => out.push(e),
            Err(_) => break,
        }
    }
    Ok(out)
}
