use std::fmt::Write as _;
use std::path::Path;

use super::catalog::{StoreCatalog, StreamRecord};
use super::reader::{log_file_name, LogIter, TornTail};
use super::StoreError;
use crate::wire::{StreamDescriptor, StreamId, StreamKind, AUDIO_SAMPLE_RATE};

#[derive(Debug, Clone, PartialEq)]
pub struct StreamCheck {
    pub stream_id: StreamId,
    pub name: String,
    pub kind: StreamKind,
    /// Complete frames found in the log.
    pub count: u64,
    pub first_time: Option<u64>,
    pub last_time: Option<u64>,
    /// Total payload bytes of the complete frames.
    pub payload_bytes: u64,
    pub torn_tail: Option<TornTail>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub clean_shutdown: bool,
    pub streams: Vec<StreamCheck>,
    pub warnings: Vec<String>,
}

/// Observed state of one log plus where the catalog's prefix ends in it.
struct Scan {
    check: StreamCheck,
    /// (byte offset, last time) after exactly `catalog.count` frames, if the log has that many.
    at_catalog_count: Option<(u64, Option<u64>)>,
    first_time: Option<u64>,
}

fn scan(dir: &Path, d: &StreamDescriptor, record: &StreamRecord) -> Result<Scan, StoreError> {
    let mut it = LogIter::open(&dir.join(log_file_name(d.stream_id)), d.stream_id)?;
    let mut check = StreamCheck {
        stream_id: d.stream_id,
        name: d.name.clone(),
        kind: d.kind,
        count: 0,
        first_time: None,
        last_time: None,
        payload_bytes: 0,
        torn_tail: None,
    };
    let mut at_catalog_count = (record.count == 0).then_some((0, None));
    while let Some(item) = it.next() {
        let env = item?;
        if let Some(prev) = check.last_time {
            if env.originating_time <= prev {
                return Err(StoreError::CheckFailed(vec![format!(
                    "stream {}: originating time went from {prev} to {}",
                    d.stream_id, env.originating_time
                )]));
            }
        }
        check.count += 1;
        check.first_time.get_or_insert(env.originating_time);
        check.last_time = Some(env.originating_time);
        check.payload_bytes += env.payload.len() as u64;
        if check.count == record.count {
            at_catalog_count = Some((it.offset(), check.last_time));
        }
    }
    check.torn_tail = it.torn_tail();
    let first_time = check.first_time;
    Ok(Scan { check, at_catalog_count, first_time })
}

/// Recomputes every stream's count and time range from its log and compares
/// them with the catalog.
///
/// A cleanly closed catalog must match the logs exactly. A catalog left by a
/// crash must describe a prefix of each log. Either way a log may end in one
/// torn frame, reported as a warning; the catalog may count that frame.
pub fn check_store(dir: &Path) -> Result<CheckReport, StoreError> {
    let catalog = StoreCatalog::load(dir)?;
    let mut problems = Vec::new();
    let mut warnings = Vec::new();
    let mut streams = Vec::new();
    if !catalog.clean_shutdown {
        warnings.push("writer did not shut down cleanly; the catalog is a checkpoint".to_string());
    }
    for (d, record) in catalog.manifest.streams.iter().zip(&catalog.streams) {
        let s = scan(dir, d, record)?;
        let c = &s.check;
        // The catalog may have counted the frame that was later torn.
        let counts_torn_frame = c.torn_tail.is_some_and(|t| {
            record.count == c.count + 1 && record.bytes > t.offset && record.bytes >= t.offset + t.bytes
        });
        let ok = if counts_torn_frame {
            true
        } else if catalog.clean_shutdown {
            record.count == c.count
                && record.first_time == c.first_time
                && record.last_time == c.last_time
                && s.at_catalog_count.map(|(off, _)| off) == Some(record.bytes)
        } else {
            match s.at_catalog_count {
                Some((off, last)) => {
                    off == record.bytes
                        && last == record.last_time
                        && (record.count == 0 || record.first_time == s.first_time)
                }
                None => false,
            }
        };
        if !ok {
            problems.push(format!(
                "stream {} ({}): catalog says {} frames in [{:?}, {:?}] over {} bytes, log has {} frames in [{:?}, {:?}]",
                d.stream_id, d.name, record.count, record.first_time, record.last_time, record.bytes, c.count,
                c.first_time, c.last_time
            ));
        }
        if let Some(t) = c.torn_tail {
            warnings.push(format!(
                "stream {} ({}): torn tail of {} bytes at offset {}",
                d.stream_id, d.name, t.bytes, t.offset
            ));
        }
        streams.push(s.check);
    }
    if problems.is_empty() {
        Ok(CheckReport { clean_shutdown: catalog.clean_shutdown, streams, warnings })
    } else {
        Err(StoreError::CheckFailed(problems))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamInfo {
    pub stream_id: StreamId,
    pub name: String,
    pub kind: StreamKind,
    pub count: u64,
    pub span_ns: u64,
    /// Envelopes per second, or samples per second for audio.
    pub rate_hz: Option<f64>,
    pub audio_samples: Option<u64>,
}

/// Per-stream statistics recomputed from the logs.
pub fn store_info(dir: &Path) -> Result<Vec<StreamInfo>, StoreError> {
    let catalog = StoreCatalog::load(dir)?;
    let mut out = Vec::new();
    for (d, record) in catalog.manifest.streams.iter().zip(&catalog.streams) {
        let c = scan(dir, d, record)?.check;
        let span_ns = match (c.first_time, c.last_time) {
            (Some(a), Some(b)) => b - a,
            _ => 0,
        };
        let (rate_hz, audio_samples) = if d.kind == StreamKind::Audio {
            let samples = c.payload_bytes / 4;
            // Buffers are stamped at their first sample, so the covered
            // duration extends one buffer past the last stamp.
            let last_buffer = if c.count > 0 { samples as f64 / c.count as f64 } else { 0.0 };
            let secs = span_ns as f64 * 1e-9 + last_buffer / AUDIO_SAMPLE_RATE as f64;
            ((secs > 0.0).then(|| samples as f64 / secs), Some(samples))
        } else {
            ((c.count > 1 && span_ns > 0).then(|| (c.count - 1) as f64 / (span_ns as f64 * 1e-9)), None)
        };
        out.push(StreamInfo {
            stream_id: d.stream_id,
            name: d.name.clone(),
            kind: d.kind,
            count: c.count,
            span_ns,
            rate_hz,
            audio_samples,
        });
    }
    Ok(out)
}

/// Human-readable table of [`store_info`] rows.
pub fn format_info_table(rows: &[StreamInfo]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>6}  {:<24} {:<22} {:>9} {:>12} {:>10}", "id", "name", "kind", "count", "rate_hz", "span_s");
    for r in rows {
        let rate = r.rate_hz.map_or("-".to_string(), |v| format!("{v:.3}"));
        let _ = writeln!(
            s,
            "{:>6}  {:<24} {:<22} {:>9} {:>12} {:>10.3}",
            r.stream_id.0,
            r.name,
            format!("{:?}", r.kind),
            r.count,
            rate,
            r.span_ns as f64 * 1e-9
        );
        if let Some(n) = r.audio_samples {
            let _ = writeln!(s, "{:>6}  {:<24} {:<22} {:>9}", "", "", "samples", n);
        }
    }
    s
}
