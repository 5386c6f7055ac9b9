use std::collections::HashMap;
use std::io::{self, Read};

use thiserror::Error;

use super::{decode_envelope, SensorEnvelope, StreamId, StreamManifest, WireError, HEADER_LEN, TRAILER_LEN};

#[derive(Debug, Error)]
pub enum FrameReadError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("input ended {have} bytes into a frame")]
    TruncatedAtEof { have: usize },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Pulls whole frames out of a byte source (socket or log file).
pub struct FrameReader<R> {
    inner: R,
    buf: Vec<u8>,
    offset: u64,
}

impl<R: Read> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, buf: Vec::new(), offset: 0 }
    }

    /// Byte offset of the next unread frame.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn get_ref(&self) -> &R {
        &self.inner
    }

    /// Returns `Ok(None)` on a clean end of input (exactly at a frame boundary).
    pub fn next_frame(&mut self) -> Result<Option<SensorEnvelope>, FrameReadError> {
        self.buf.clear();
        if !self.fill(HEADER_LEN)? {
            return if self.buf.is_empty() {
                Ok(None)
            } else {
                // Surface bad magic on garbage tails before calling it a torn write.
                decode_envelope(&self.buf).map(|_| ()).or_else(|e| match e {
                    WireError::Truncated { .. } => Ok(()),
                    other => Err(other),
                })?;
                Err(FrameReadError::TruncatedAtEof { have: self.buf.len() })
            };
        }
        let needed = match decode_envelope(&self.buf) {
            Err(WireError::Truncated { needed }) => needed,
            Err(e) => return Err(e.into()),
            Ok(_) => unreachable!("a header alone never completes a frame"),
        };
        if !self.fill(HEADER_LEN + needed)? {
            return Err(FrameReadError::TruncatedAtEof { have: self.buf.len() });
        }
        let (env, used) = decode_envelope(&self.buf)?;
        debug_assert_eq!(used, env.payload.len() + HEADER_LEN + TRAILER_LEN);
        self.offset += used as u64;
        Ok(Some(env))
    }

    /// Reads until `buf` holds `want` bytes. Returns false on EOF first.
    fn fill(&mut self, want: usize) -> io::Result<bool> {
        let have = self.buf.len();
        if have >= want {
            return Ok(true);
        }
        self.buf.resize(want, 0);
        let mut filled = have;
        while filled < want {
            match self.inner.read(&mut self.buf[filled..want]) {
                Ok(0) => {
                    self.buf.truncate(filled);
                    return Ok(false);
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => {
                    self.buf.truncate(filled);
                    return Err(e);
                }
            }
        }
        Ok(true)
    }
}

impl<R: Read> Iterator for FrameReader<R> {
    type Item = Result<SensorEnvelope, FrameReadError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

/// Enforces the per-stream ordering contract on an incoming envelope sequence.
#[derive(Debug, Default, Clone)]
pub struct StreamOrderGuard {
    last: HashMap<StreamId, u64>,
    known: Option<Vec<StreamId>>,
}

impl StreamOrderGuard {
    pub fn new() -> Self {
        Self::default()
    }

    /// Restricts accepted envelopes to the streams declared by `manifest`.
    pub fn with_manifest(manifest: &StreamManifest) -> Self {
        Self { last: HashMap::new(), known: Some(manifest.streams.iter().map(|s| s.stream_id).collect()) }
    }

    pub fn admit(&mut self, env: &SensorEnvelope) -> Result<(), WireError> {
        if env.stream_id.is_control() {
            return Ok(());
        }
        if let Some(known) = &self.known {
            if !known.contains(&env.stream_id) {
                return Err(WireError::UnknownStream(env.stream_id));
            }
        }
        match self.last.get(&env.stream_id) {
            Some(&previous) if env.originating_time <= previous => {
                Err(WireError::NonMonotonicTime { stream: env.stream_id, previous, got: env.originating_time })
            }
            _ => {
                self.last.insert(env.stream_id, env.originating_time);
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::encode_envelope;
    use super::*;

    fn frames(envs: &[SensorEnvelope]) -> Vec<u8> {
        envs.iter().flat_map(encode_envelope).collect()
    }

    /// Hands out one byte per read call.
    struct Trickle<'a>(&'a [u8]);

    impl Read for Trickle<'_> {
        fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
            if self.0.is_empty() || buf.is_empty() {
                return Ok(0);
            }
            buf[0] = self.0[0];
            self.0 = &self.0[1..];
            Ok(1)
        }
    }

    #[test]
    fn reads_back_to_back_frames_from_short_reads() {
        let envs = vec![
            SensorEnvelope::new(StreamId(1), 1, vec![1, 2, 3]),
            SensorEnvelope::new(StreamId(2), 1, vec![]),
            SensorEnvelope::new(StreamId(1), 2, vec![9; 100]),
        ];
        let bytes = frames(&envs);
        let got: Vec<_> = FrameReader::new(Trickle(&bytes)).map(|r| r.unwrap()).collect();
        assert_eq!(got, envs);
    }

    #[test]
    fn torn_tail_reported_after_good_frames() {
        let envs =
            vec![SensorEnvelope::new(StreamId(1), 1, vec![1, 2, 3]), SensorEnvelope::new(StreamId(1), 2, vec![4])];
        let bytes = frames(&envs);
        let mut r = FrameReader::new(&bytes[..bytes.len() - 3]);
        assert_eq!(r.next_frame().unwrap().unwrap(), envs[0]);
        assert!(matches!(r.next_frame(), Err(FrameReadError::TruncatedAtEof { .. })));
    }

    #[test]
    fn garbage_is_bad_magic() {
        let mut r = FrameReader::new(&b"HTTP/1.1 200 OK\r\n\r\nhello there"[..]);
        assert!(matches!(r.next_frame(), Err(FrameReadError::Wire(WireError::BadMagic))));
    }

    #[test]
    fn guard_rejects_non_monotonic_and_unknown() {
        let manifest = StreamManifest {
            session_id: uuid::Uuid::nil(),
            epoch_utc: 0,
            streams: vec![super::super::StreamDescriptor {
                stream_id: StreamId(1),
                name: "a".into(),
                kind: super::super::StreamKind::Audio,
                nominal_rate_hz: 10.0,
            }],
        };
        let mut g = StreamOrderGuard::with_manifest(&manifest);
        g.admit(&SensorEnvelope::new(StreamId(1), 5, vec![])).unwrap();
        assert_eq!(
            g.admit(&SensorEnvelope::new(StreamId(1), 5, vec![])),
            Err(WireError::NonMonotonicTime { stream: StreamId(1), previous: 5, got: 5 })
        );
        assert_eq!(g.admit(&SensorEnvelope::new(StreamId(2), 9, vec![])), Err(WireError::UnknownStream(StreamId(2))));
        g.admit(&SensorEnvelope::new(StreamId::CONTROL, 0, vec![])).unwrap();
    }
}
