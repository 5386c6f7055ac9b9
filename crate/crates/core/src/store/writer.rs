use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use super::catalog::{StoreCatalog, StreamRecord};
use super::reader::log_file_name;
use super::StoreError;
use crate::wire::{encode_envelope_into, SensorEnvelope, StreamId, StreamManifest, WireError, MAX_PAYLOAD_LEN};

pub const CHECKPOINT_INTERVAL: Duration = Duration::from_secs(5);

struct Log {
    path: PathBuf,
    file: BufWriter<File>,
}

/// Single writer of one session directory.
pub struct StoreWriter {
    dir: PathBuf,
    catalog: StoreCatalog,
    logs: BTreeMap<StreamId, Log>,
    last_checkpoint: Instant,
    checkpoint_interval: Duration,
    scratch: Vec<u8>,
    closed: bool,
}

impl StoreWriter {
    /// Creates `<root>/<session_id>/` with empty logs and an initial catalog.
    /// The directory appears atomically, already holding its catalog.
    pub fn create(root: &Path, manifest: StreamManifest) -> Result<Self, StoreError> {
        manifest.validate()?;
        fs::create_dir_all(root).map_err(StoreError::io(root))?;
        let dir = root.join(manifest.session_id.to_string());
        if dir.exists() {
            return Err(StoreError::AlreadyExists(dir));
        }
        let staging = root.join(format!(".{}.partial", manifest.session_id));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(StoreError::io(&staging))?;
        }
        fs::create_dir(&staging).map_err(StoreError::io(&staging))?;
        for d in &manifest.streams {
            let p = staging.join(log_file_name(d.stream_id));
            File::create(&p).map_err(StoreError::io(&p))?;
        }
        let catalog = StoreCatalog::new(manifest);
        catalog.save(&staging)?;
        fs::rename(&staging, &dir).map_err(StoreError::io(&dir))?;

        let mut logs = BTreeMap::new();
        for d in &catalog.manifest.streams {
            let path = dir.join(log_file_name(d.stream_id));
            let f = OpenOptions::new().append(true).open(&path).map_err(StoreError::io(&path))?;
            logs.insert(d.stream_id, Log { path, file: BufWriter::with_capacity(1 << 16, f) });
        }
        Ok(StoreWriter {
            dir,
            catalog,
            logs,
            last_checkpoint: Instant::now(),
            checkpoint_interval: CHECKPOINT_INTERVAL,
            scratch: Vec::new(),
            closed: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &StreamManifest {
        &self.catalog.manifest
    }

    /// In-memory counters, including appends not yet checkpointed.
    pub fn catalog(&self) -> &StoreCatalog {
        &self.catalog
    }

    pub fn append(&mut self, env: &SensorEnvelope) -> Result<(), StoreError> {
        let log = self.logs.get_mut(&env.stream_id).ok_or(WireError::UnknownStream(env.stream_id))?;
        let record = self
            .catalog
            .streams
            .iter_mut()
            .find(|r| r.stream_id == env.stream_id)
            .expect("every log has a catalog record");
        if let Some(previous) = record.last_time {
            if env.originating_time <= previous {
                return Err(
                    WireError::NonMonotonicTime { stream: env.stream_id, previous, got: env.originating_time }.into()
                );
            }
        }
        if env.payload.len() > MAX_PAYLOAD_LEN as usize {
            return Err(WireError::Oversized(env.payload.len().min(u32::MAX as usize) as u32).into());
        }
        self.scratch.clear();
        encode_envelope_into(env, &mut self.scratch);
        log.file.write_all(&self.scratch).map_err(StoreError::io(&log.path))?;
        update(record, env.originating_time, self.scratch.len() as u64);
        Ok(())
    }

    /// Replaces the default [`CHECKPOINT_INTERVAL`].
    pub fn set_checkpoint_interval(&mut self, interval: Duration) {
        self.checkpoint_interval = interval;
    }

    /// Checkpoints the catalog if the last checkpoint is older than the
    /// checkpoint interval.
    pub fn maybe_checkpoint(&mut self) -> Result<(), StoreError> {
        if self.last_checkpoint.elapsed() >= self.checkpoint_interval {
            self.checkpoint()?;
        }
        Ok(())
    }

    /// Pushes buffered frames to the log files, then rewrites the catalog.
    pub fn checkpoint(&mut self) -> Result<(), StoreError> {
        for log in self.logs.values_mut() {
            log.file.flush().map_err(StoreError::io(&log.path))?;
        }
        self.catalog.save(&self.dir)?;
        self.last_checkpoint = Instant::now();
        Ok(())
    }

    /// Flushes and syncs every log and marks the catalog as cleanly closed.
    pub fn close(mut self) -> Result<StoreCatalog, StoreError> {
        self.close_inner()?;
        Ok(self.catalog.clone())
    }

    fn close_inner(&mut self) -> Result<(), StoreError> {
        for log in self.logs.values_mut() {
            log.file.flush().map_err(StoreError::io(&log.path))?;
            log.file.get_ref().sync_all().map_err(StoreError::io(&log.path))?;
        }
        self.catalog.clean_shutdown = true;
        self.catalog.save(&self.dir)?;
        self.closed = true;
        Ok(())
    }
}

impl Drop for StoreWriter {
    fn drop(&mut self) {
        if !self.closed {
            if let Err(e) = self.close_inner() {
                log::error!("closing store {} failed: {e}", self.dir.display());
            }
        }
    }
}

fn update(record: &mut StreamRecord, time: u64, bytes: u64) {
    record.count += 1;
    record.bytes += bytes;
    record.first_time.get_or_insert(time);
    record.last_time = Some(time);
}
