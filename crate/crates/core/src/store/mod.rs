//! Append-only session storage and ordered replay.
//!
//! A session lives in `<root>/<session_id>/`:
//!
//! * `stream-<id>.log`: the stream's envelopes as consecutive wire frames.
//! * `catalog.json`: `{"format_version": 1, "manifest": StreamManifest,
//!   "clean_shutdown": bool, "streams": [{"stream_id", "count", "bytes",
//!   "first_time", "last_time"}]}`. `first_time`/`last_time` are null for
//!   empty streams; `bytes` is the log length covered by the catalog.
//!
//! The catalog is replaced atomically (write to a temporary file, then
//! rename) when the writer closes and at least every five seconds while it
//! is open. After a clean close it describes the logs exactly; after a crash
//! it describes a prefix of them, and each log may end in one partially
//! written frame.

mod catalog;
mod check;
mod dump;
mod reader;
mod replay;
mod writer;

use std::path::PathBuf;

use thiserror::Error;

use crate::wire::{StreamId, WireError};

pub use catalog::{StoreCatalog, StreamRecord, CATALOG_FILE, FORMAT_VERSION};
pub use check::{check_store, format_info_table, store_info, CheckReport, StreamCheck, StreamInfo};
pub use dump::{describe_payload, format_envelope};
pub use reader::{log_file_name, LogIter, MergedIter, StoreReader, StreamRead, TornTail};
pub use replay::{replay, Pacing, ReplayReport};
pub use writer::{StoreWriter, CHECKPOINT_INTERVAL};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("corrupt catalog: {0}")]
    CorruptCatalog(String),
    #[error("checksum mismatch in stream {stream} at byte {offset}")]
    CrcMismatch { stream: StreamId, offset: u64 },
    #[error("session directory {0} already exists")]
    AlreadyExists(PathBuf),
    #[error("store check failed: {}", .0.join("; "))]
    CheckFailed(Vec<String>),
}

impl StoreError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> StoreError {
        let path = path.into();
        move |source| StoreError::Io { path, source }
    }
}
