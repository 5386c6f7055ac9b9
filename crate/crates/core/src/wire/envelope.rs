//! Frame codec.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SGMA"
//! 4       1     version (= 1)
//! 5       2     stream_id        u16 LE
//! 7       8     originating_time u64 LE, nanoseconds since session epoch
//! 15      4     payload_len      u32 LE
//! 19      n     payload
//! 19+n    4     CRC32 (IEEE) of bytes [0, 19+n), u32 LE
//! ```
//!
//! The same layout is used on the socket and in the on-disk stream logs.

use serde::{Deserialize, Serialize};

use super::WireError;

pub const MAGIC: [u8; 4] = *b"SGMA";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 19;
pub const TRAILER_LEN: usize = 4;
/// Frame size of an envelope with an empty payload.
pub const MIN_FRAME_LEN: usize = HEADER_LEN + TRAILER_LEN;
/// Upper bound accepted by the decoder. Larger declared lengths are treated
/// as corruption instead of a reason to buffer gigabytes.
pub const MAX_PAYLOAD_LEN: u32 = 64 * 1024 * 1024;

/// Identifier of a stream within a session. Stream 0 is reserved for
/// control messages (manifest, sync).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StreamId(pub u16);

impl StreamId {
    pub const CONTROL: StreamId = StreamId(0);

    pub fn is_control(self) -> bool {
        self == Self::CONTROL
    }
}

impl std::fmt::Display for StreamId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorEnvelope {
    pub stream_id: StreamId,
    /// Nanoseconds since the session epoch declared by the manifest.
    pub originating_time: u64,
    pub payload: Vec<u8>,
}

impl SensorEnvelope {
    pub fn new(stream_id: StreamId, originating_time: u64, payload: Vec<u8>) -> Self {
        Self { stream_id, originating_time, payload }
    }

    pub fn frame_len(&self) -> usize {
        MIN_FRAME_LEN + self.payload.len()
    }
}

/// Appends the frame for `env` to `out`.
pub fn encode_envelope_into(env: &SensorEnvelope, out: &mut Vec<u8>) {
    assert!(env.payload.len() < u32::MAX as usize, "payload length must fit in u32");
    let start = out.len();
    out.reserve(env.frame_len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&env.stream_id.0.to_le_bytes());
    out.extend_from_slice(&env.originating_time.to_le_bytes());
    out.extend_from_slice(&(env.payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&env.payload);
    let crc = crc32fast::hash(&out[start..]);
    out.extend_from_slice(&crc.to_le_bytes());
}

pub fn encode_envelope(env: &SensorEnvelope) -> Vec<u8> {
    let mut out = Vec::with_capacity(env.frame_len());
    encode_envelope_into(env, &mut out);
    out
}

/// Decodes one frame from the start of `bytes`, returning the envelope and
/// the number of bytes consumed.
///
/// `Truncated` means the input ends before the frame does; callers reading
/// from a socket should fetch more bytes and retry.
pub fn decode_envelope(bytes: &[u8]) -> Result<(SensorEnvelope, usize), WireError> {
    let magic_avail = bytes.len().min(MAGIC.len());
    if bytes[..magic_avail] != MAGIC[..magic_avail] {
        return Err(WireError::BadMagic);
    }
    if bytes.len() > 4 && bytes[4] != VERSION {
        return Err(WireError::UnsupportedVersion(bytes[4]));
    }
    if bytes.len() < HEADER_LEN {
        return Err(WireError::Truncated { needed: MIN_FRAME_LEN - bytes.len() });
    }
    let stream_id = u16::from_le_bytes([bytes[5], bytes[6]]);
    let originating_time = u64::from_le_bytes(bytes[7..15].try_into().unwrap());
    let payload_len = u32::from_le_bytes(bytes[15..19].try_into().unwrap());
    if payload_len > MAX_PAYLOAD_LEN {
        return Err(WireError::Oversized(payload_len));
    }
    let total = HEADER_LEN + payload_len as usize + TRAILER_LEN;
    if bytes.len() < total {
        return Err(WireError::Truncated { needed: total - bytes.len() });
    }
    let body_end = HEADER_LEN + payload_len as usize;
    let expected = u32::from_le_bytes(bytes[body_end..total].try_into().unwrap());
    let actual = crc32fast::hash(&bytes[..body_end]);
    if expected != actual {
        return Err(WireError::CrcMismatch { expected, actual });
    }
    let env = SensorEnvelope {
        stream_id: StreamId(stream_id),
        originating_time,
        payload: bytes[HEADER_LEN..body_end].to_vec(),
    };
    Ok((env, total))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_payload_frame_is_23_bytes() {
        let env = SensorEnvelope::new(StreamId(7), 0, vec![]);
        let bytes = encode_envelope(&env);
        assert_eq!(bytes.len(), 23);
        assert_eq!(&bytes[0..4], b"SGMA");
        assert_eq!(bytes[4], 1);
        assert_eq!(&bytes[5..7], &[7, 0]);
        assert_eq!(&bytes[15..19], &[0, 0, 0, 0]);
        let (back, used) = decode_envelope(&bytes).unwrap();
        assert_eq!(back, env);
        assert_eq!(used, 23);
    }

    #[test]
    fn header_fields_are_little_endian() {
        let env = SensorEnvelope::new(StreamId(0x0102), 0x0807_0605_0403_0201, vec![0xAA; 3]);
        let bytes = encode_envelope(&env);
        assert_eq!(&bytes[5..7], &[0x02, 0x01]);
        assert_eq!(&bytes[7..15], &[1, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(&bytes[15..19], &[3, 0, 0, 0]);
        let crc = crc32fast::hash(&bytes[..22]);
        assert_eq!(&bytes[22..26], &crc.to_le_bytes());
    }

    #[test]
    fn flipped_payload_bit_is_crc_mismatch() {
        let env = SensorEnvelope::new(StreamId(3), 99, b"hello world".to_vec());
        let mut bytes = encode_envelope(&env);
        bytes[HEADER_LEN + 4] ^= 0x10;
        assert!(matches!(decode_envelope(&bytes), Err(WireError::CrcMismatch { .. })));
    }

    #[test]
    fn every_strict_prefix_is_truncated() {
        let env = SensorEnvelope::new(StreamId(3), 99, b"abc".to_vec());
        let bytes = encode_envelope(&env);
        for n in 0..bytes.len() {
            match decode_envelope(&bytes[..n]) {
                Err(WireError::Truncated { needed }) => assert!(needed > 0),
                other => panic!("prefix {n}: {other:?}"),
            }
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let env = SensorEnvelope::new(StreamId(1), 1, vec![1]);
        let mut bytes = encode_envelope(&env);
        bytes[4] = 2;
        assert_eq!(decode_envelope(&bytes).unwrap_err(), WireError::UnsupportedVersion(2));
        bytes[0] = b'X';
        assert_eq!(decode_envelope(&bytes).unwrap_err(), WireError::BadMagic);
        assert_eq!(decode_envelope(b"SGX").unwrap_err(), WireError::BadMagic);
    }

    #[test]
    fn oversized_length_rejected() {
        let mut bytes = encode_envelope(&SensorEnvelope::new(StreamId(1), 1, vec![]));
        bytes[15..19].copy_from_slice(&(MAX_PAYLOAD_LEN + 1).to_le_bytes());
        assert_eq!(decode_envelope(&bytes).unwrap_err(), WireError::Oversized(MAX_PAYLOAD_LEN + 1));
    }
}
