use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use super::reader::{MergedIter, TornTail};
use super::StoreError;
use crate::wire::{SensorEnvelope, StreamId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    AsFast,
    /// Wall-clock gaps follow originating-time gaps multiplied by `scale`
    /// (1.0 is real time, 0.5 twice as fast).
    RealTime {
        scale: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayReport {
    pub delivered: u64,
    pub first_time: Option<u64>,
    pub last_time: Option<u64>,
    pub per_stream: BTreeMap<StreamId, u64>,
    pub wall: Duration,
    pub torn_tails: Vec<TornTail>,
}

impl ReplayReport {
    pub fn span_ns(&self) -> u64 {
        match (self.first_time, self.last_time) {
            (Some(a), Some(b)) => b - a,
            _ => 0,
        }
    }
}

/// Feeds `envelopes` into `sink` in merged order.
pub fn replay<F, E>(mut envelopes: MergedIter, pacing: Pacing, mut sink: F) -> Result<ReplayReport, E>
where
    F: FnMut(SensorEnvelope) -> Result<(), E>,
    E: From<StoreError>,
{
    let start = Instant::now();
    let mut report = ReplayReport::default();
    for item in envelopes.by_ref() {
        let env = item?;
        let t = env.originating_time;
        let t0 = *report.first_time.get_or_insert(t);
        if let Pacing::RealTime { scale } = pacing {
            let due = start + Duration::from_secs_f64((t - t0) as f64 * 1e-9 * scale.max(0.0));
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        report.last_time = Some(t);
        report.delivered += 1;
        *report.per_stream.entry(env.stream_id).or_default() += 1;
        sink(env)?;
    }
    report.torn_tails = envelopes.torn_tails();
    report.wall = start.elapsed();
    Ok(report)
}
