//! Session recording, caregiver review (annotations, hide/delete) and
//! auto-curation of emotional moments onto a playback timeline.

mod catalog;
mod curate;
mod store;
mod timeline;

pub use catalog::{read_audit, replay, Annotation, AnnotationKind, AuditEntry, ReviewState, SessionStore, SessionSummary};
pub use curate::{curate, CurationParams, EmotionalMoment};
pub use store::{
    scan_events, scan_index, unix_ms, FrameIndexEntry, SessionError, SessionEvent, SessionMeta, SessionReader, SessionStatus,
    SessionWriter, WriterLimits, AUDIT_FILE, BLOB_FILE, EVENTS_FILE, INDEX_FILE, INDEX_RECORD_LEN, META_FILE,
};
pub use timeline::{render_plot, save_plot, timeline, Timeline, TimelineEntry, TimelineItem};
