use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::wire::{StreamId, StreamManifest};

pub const FORMAT_VERSION: u32 = 1;
pub const CATALOG_FILE: &str = "catalog.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamRecord {
    pub stream_id: StreamId,
    pub count: u64,
    pub bytes: u64,
    pub first_time: Option<u64>,
    pub last_time: Option<u64>,
}

impl StreamRecord {
    pub fn empty(stream_id: StreamId) -> Self {
        StreamRecord { stream_id, count: 0, bytes: 0, first_time: None, last_time: None }
    }

    pub fn span_ns(&self) -> u64 {
        match (self.first_time, self.last_time) {
            (Some(a), Some(b)) => b - a,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreCatalog {
    pub format_version: u32,
    pub manifest: StreamManifest,
    pub clean_shutdown: bool,
    pub streams: Vec<StreamRecord>,
}

impl StoreCatalog {
    pub fn new(manifest: StreamManifest) -> Self {
        let streams = manifest.streams.iter().map(|d| StreamRecord::empty(d.stream_id)).collect();
        StoreCatalog { format_version: FORMAT_VERSION, manifest, clean_shutdown: false, streams }
    }

    pub fn record(&self, id: StreamId) -> Option<&StreamRecord> {
        self.streams.iter().find(|r| r.stream_id == id)
    }

    pub fn load(dir: &Path) -> Result<Self, StoreError> {
        let path = dir.join(CATALOG_FILE);
        let text =
            fs::read_to_string(&path).map_err(|e| StoreError::CorruptCatalog(format!("{}: {e}", path.display())))?;
        let catalog: StoreCatalog =
            serde_json::from_str(&text).map_err(|e| StoreError::CorruptCatalog(format!("{}: {e}", path.display())))?;
        catalog.validate()?;
        Ok(catalog)
    }

    fn validate(&self) -> Result<(), StoreError> {
        if self.format_version != FORMAT_VERSION {
            return Err(StoreError::CorruptCatalog(format!("unsupported format version {}", self.format_version)));
        }
        self.manifest.validate().map_err(|e| StoreError::CorruptCatalog(e.to_string()))?;
        let declared: Vec<StreamId> = self.manifest.streams.iter().map(|d| d.stream_id).collect();
        let recorded: Vec<StreamId> = self.streams.iter().map(|r| r.stream_id).collect();
        if declared != recorded {
            return Err(StoreError::CorruptCatalog("stream records do not match the manifest".into()));
        }
        for r in &self.streams {
            let consistent = match (r.count, r.first_time, r.last_time) {
                (0, None, None) => r.bytes == 0,
                (n, Some(a), Some(b)) => n > 0 && a <= b,
                _ => false,
            };
            if !consistent {
                return Err(StoreError::CorruptCatalog(format!("inconsistent record for stream {}", r.stream_id)));
            }
        }
        Ok(())
    }

    /// Atomically replaces `dir/catalog.json`.
    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        let tmp = dir.join(format!("{CATALOG_FILE}.tmp"));
        let mut text = serde_json::to_string_pretty(self).expect("catalog serializes");
        text.push('\n');
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, dir.join(CATALOG_FILE))
        };
        write().map_err(StoreError::io(&tmp))
    }
}
