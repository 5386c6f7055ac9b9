use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    Live,
    Replay,
}

/// Originating-time clock of the pipeline.
///
/// Decisions only ever see [`PipelineClock::now`], the latest originating
/// time observed. The wall clock is reachable in live mode alone, where the
/// websocket bridge needs it to stamp operator input.
#[derive(Debug, Clone)]
pub struct PipelineClock {
    mode: ClockMode,
    current: u64,
    epoch_utc_us: u64,
}

impl PipelineClock {
    pub fn live(epoch_utc_us: u64) -> Self {
        PipelineClock { mode: ClockMode::Live, current: 0, epoch_utc_us }
    }

    pub fn replay() -> Self {
        PipelineClock { mode: ClockMode::Replay, current: 0, epoch_utc_us: 0 }
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    pub fn observe(&mut self, originating_time: u64) {
        self.current = self.current.max(originating_time);
    }

    pub fn now(&self) -> u64 {
        self.current
    }

    /// Wall-clock time in the session's originating-time base; `None` in replay.
    pub fn wall_now(&self) -> Option<u64> {
        match self.mode {
            ClockMode::Replay => None,
            ClockMode::Live => {
                let now_us = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_micros() as u64);
                Some(now_us.saturating_sub(self.epoch_utc_us) * 1000)
            }
        }
    }
}

/// Current wall time in microseconds since the Unix epoch.
pub fn utc_now_us() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_micros() as u64)
}
