use std::collections::BTreeSet;
use std::time::Duration;

use crossbeam_channel::{bounded, unbounded, Receiver, RecvTimeoutError, Sender};

use super::ServiceError;

/// Outcome of one submitted request.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion<T> {
    pub correlation: u64,
    pub result: Result<T, ServiceError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispatchMode {
    /// The call runs during `submit`; its completion is ready immediately.
    /// Used for mock backends so that sessions are reproducible.
    Inline,
    /// The call runs on its own thread and resolves to `BackendTimeout` if it
    /// has not returned within `timeout`.
    Threaded { timeout: Duration },
}

/// Asynchronous request queue with exactly-once completion per correlation id.
pub struct ServiceQueue<T> {
    mode: DispatchMode,
    tx: Sender<Completion<T>>,
    rx: Receiver<Completion<T>>,
    pending: BTreeSet<u64>,
}

impl<T: Send + 'static> ServiceQueue<T> {
    pub fn new(mode: DispatchMode) -> Self {
        let (tx, rx) = unbounded();
        ServiceQueue { mode, tx, rx, pending: BTreeSet::new() }
    }

    pub fn mode(&self) -> DispatchMode {
        self.mode
    }

    /// Starts `call` under `correlation`. Reusing an id that is still pending
    /// is a caller bug; the second call is logged and not run.
    pub fn submit<F>(&mut self, correlation: u64, call: F)
    where
        F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    {
        if !self.pending.insert(correlation) {
            log::error!("correlation id {correlation} is already pending");
            return;
        }
        match self.mode {
            DispatchMode::Inline => {
                let result = call();
                let _ = self.tx.send(Completion { correlation, result });
            }
            DispatchMode::Threaded { timeout } => {
                let tx = self.tx.clone();
                std::thread::spawn(move || {
                    let (done_tx, done_rx) = bounded(1);
                    std::thread::spawn(move || {
                        let _ = done_tx.send(call());
                    });
                    let result = match done_rx.recv_timeout(timeout) {
                        Ok(r) => r,
                        Err(RecvTimeoutError::Timeout) => Err(ServiceError::BackendTimeout),
                        Err(RecvTimeoutError::Disconnected) => {
                            Err(ServiceError::BackendError { status: 0, body: "backend call panicked".into() })
                        }
                    };
                    let _ = tx.send(Completion { correlation, result });
                });
            }
        }
    }

    /// Next finished completion, if any, without blocking.
    pub fn try_next(&mut self) -> Option<Completion<T>> {
        let c = self.rx.try_recv().ok()?;
        self.pending.remove(&c.correlation);
        Some(c)
    }

    /// Blocks up to `timeout` for the next completion.
    pub fn next_timeout(&mut self, timeout: Duration) -> Option<Completion<T>> {
        let c = self.rx.recv_timeout(timeout).ok()?;
        self.pending.remove(&c.correlation);
        Some(c)
    }

    /// Receiver side for use in `select!`; completions taken this way must be
    /// passed to [`ServiceQueue::settle`].
    pub fn receiver(&self) -> &Receiver<Completion<T>> {
        &self.rx
    }

    pub fn settle(&mut self, correlation: u64) {
        self.pending.remove(&correlation);
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }
}
