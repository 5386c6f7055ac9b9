use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufReader, Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use super::catalog::StoreCatalog;
use super::StoreError;
use crate::wire::{
    FrameReadError, FrameReader, SensorEnvelope, StreamId, StreamManifest, WireError, HEADER_LEN, TRAILER_LEN,
};

pub fn log_file_name(id: StreamId) -> String {
    format!("stream-{}.log", id.0)
}

/// A partially written final frame, ignored by readers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TornTail {
    pub stream: StreamId,
    pub offset: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamRead {
    pub envelopes: Vec<SensorEnvelope>,
    pub torn_tail: Option<TornTail>,
}

/// Sequential reader of one stream log.
pub struct LogIter {
    stream: StreamId,
    path: PathBuf,
    file_len: u64,
    reader: FrameReader<BufReader<File>>,
    torn_tail: Option<TornTail>,
    done: bool,
}

impl LogIter {
    pub fn open(path: &Path, stream: StreamId) -> Result<Self, StoreError> {
        let file = File::open(path).map_err(StoreError::io(path))?;
        let file_len = file.metadata().map_err(StoreError::io(path))?.len();
        Ok(LogIter {
            stream,
            path: path.to_path_buf(),
            file_len,
            reader: FrameReader::new(BufReader::with_capacity(1 << 16, file)),
            torn_tail: None,
            done: false,
        })
    }

    pub fn stream(&self) -> StreamId {
        self.stream
    }

    /// Set once iteration reached a torn final frame.
    pub fn torn_tail(&self) -> Option<TornTail> {
        self.torn_tail
    }

    /// Byte offset just past the last frame returned.
    pub fn offset(&self) -> u64 {
        self.reader.offset()
    }

    fn mark_torn(&mut self) {
        let offset = self.reader.offset();
        let tail = TornTail { stream: self.stream, offset, bytes: self.file_len.saturating_sub(offset) };
        log::warn!("torn tail in {}: ignoring {} bytes at offset {offset}", self.path.display(), tail.bytes);
        self.torn_tail = Some(tail);
    }

    /// Whether the frame starting at the current offset would end exactly at EOF.
    fn frame_ends_at_eof(&self) -> bool {
        let offset = self.reader.offset();
        let mut len_bytes = [0u8; 4];
        let read = File::open(&self.path).and_then(|mut f| {
            f.seek(SeekFrom::Start(offset + HEADER_LEN as u64 - 4))?;
            f.read_exact(&mut len_bytes)
        });
        read.is_ok()
            && offset + (HEADER_LEN + TRAILER_LEN) as u64 + u32::from_le_bytes(len_bytes) as u64 == self.file_len
    }
}

impl Iterator for LogIter {
    type Item = Result<SensorEnvelope, StoreError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = match self.reader.next_frame() {
            Ok(Some(env)) if env.stream_id != self.stream => Err(StoreError::CorruptCatalog(format!(
                "{} holds a frame of stream {}",
                self.path.display(),
                env.stream_id
            ))),
            Ok(Some(env)) => return Some(Ok(env)),
            Ok(None) => {
                self.done = true;
                return None;
            }
            Err(FrameReadError::TruncatedAtEof { .. }) => {
                self.mark_torn();
                self.done = true;
                return None;
            }
            Err(FrameReadError::Wire(WireError::CrcMismatch { .. })) => {
                if self.frame_ends_at_eof() {
                    self.mark_torn();
                    self.done = true;
                    return None;
                }
                Err(StoreError::CrcMismatch { stream: self.stream, offset: self.reader.offset() })
            }
            Err(FrameReadError::Wire(e)) => Err(e.into()),
            Err(FrameReadError::Io(e)) => Err(StoreError::Io { path: self.path.clone(), source: e }),
        };
        self.done = true;
        Some(item)
    }
}

/// Read-only view of a session directory.
#[derive(Debug, Clone)]
pub struct StoreReader {
    dir: PathBuf,
    catalog: StoreCatalog,
}

impl StoreReader {
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        let catalog = StoreCatalog::load(dir)?;
        Ok(StoreReader { dir: dir.to_path_buf(), catalog })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn catalog(&self) -> &StoreCatalog {
        &self.catalog
    }

    pub fn manifest(&self) -> &StreamManifest {
        &self.catalog.manifest
    }

    pub fn stream(&self, id: StreamId) -> Result<LogIter, StoreError> {
        if self.catalog.record(id).is_none() {
            return Err(WireError::UnknownStream(id).into());
        }
        LogIter::open(&self.dir.join(log_file_name(id)), id)
    }

    pub fn read_stream(&self, id: StreamId) -> Result<StreamRead, StoreError> {
        let mut it = self.stream(id)?;
        let envelopes = it.by_ref().collect::<Result<Vec<_>, _>>()?;
        Ok(StreamRead { envelopes, torn_tail: it.torn_tail() })
    }

    /// All streams merged by originating time, restricted to `[from, to]`.
    pub fn read_merged(&self, from: Option<u64>, to: Option<u64>) -> Result<MergedIter, StoreError> {
        let ids: Vec<StreamId> = self.catalog.manifest.streams.iter().map(|d| d.stream_id).collect();
        self.read_merged_streams(&ids, from, to)
    }

    pub fn read_merged_streams(
        &self,
        ids: &[StreamId],
        from: Option<u64>,
        to: Option<u64>,
    ) -> Result<MergedIter, StoreError> {
        let logs = ids.iter().map(|&id| self.stream(id)).collect::<Result<Vec<_>, _>>()?;
        MergedIter::new(logs, from, to)
    }
}

/// K-way merge of stream logs: nondecreasing originating time, ties broken
/// by ascending stream id.
pub struct MergedIter {
    logs: Vec<LogIter>,
    heads: Vec<Option<SensorEnvelope>>,
    heap: BinaryHeap<Reverse<(u64, StreamId, usize)>>,
    from: u64,
    to: u64,
    failed: bool,
}

impl MergedIter {
    fn new(logs: Vec<LogIter>, from: Option<u64>, to: Option<u64>) -> Result<Self, StoreError> {
        let n = logs.len();
        let mut it = MergedIter {
            logs,
            heads: vec![None; n],
            heap: BinaryHeap::new(),
            from: from.unwrap_or(0),
            to: to.unwrap_or(u64::MAX),
            failed: false,
        };
        for i in 0..n {
            it.refill(i)?;
        }
        Ok(it)
    }

    fn refill(&mut self, i: usize) -> Result<(), StoreError> {
        for item in self.logs[i].by_ref() {
            let env = item?;
            if env.originating_time < self.from {
                continue;
            }
            if env.originating_time <= self.to {
                self.heap.push(Reverse((env.originating_time, env.stream_id, i)));
                self.heads[i] = Some(env);
            }
            break;
        }
        Ok(())
    }

    pub fn torn_tails(&self) -> Vec<TornTail> {
        self.logs.iter().filter_map(LogIter::torn_tail).collect()
    }
}

impl Iterator for MergedIter {
    type Item = Result<SensorEnvelope, StoreError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let Reverse((_, _, i)) = self.heap.pop()?;
        let env = self.heads[i].take().expect("heap entry has a head");
        if let Err(e) = self.refill(i) {
            self.failed = true;
            return Some(Err(e));
        }
        Some(Ok(env))
    }
}
