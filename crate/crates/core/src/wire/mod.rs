//! Framed binary protocol shared by the socket transport and the on-disk
//! stream logs.

mod envelope;
mod manifest;
mod payload;
mod stream;

use thiserror::Error;

pub use envelope::{
    decode_envelope, encode_envelope, encode_envelope_into, SensorEnvelope, StreamId, HEADER_LEN, MAGIC,
    MAX_PAYLOAD_LEN, MIN_FRAME_LEN, TRAILER_LEN, VERSION,
};
pub use manifest::{ControlMessage, StreamDescriptor, StreamKind, StreamManifest};
pub use payload::{
    decode_payload, validate_pose, AudioPayload, CameraFramePayload, GazePayload, HandsPayload, Intrinsics, Matrix4f,
    PixelEncoding, PosePayload, TextInputPayload, TypedPayload, AUDIO_SAMPLE_RATE, DEPTH_HEIGHT, DEPTH_WIDTH,
    HAND_JOINT_COUNT, HAND_JOINT_NAMES, IDENTITY4, RGB_HEIGHT, RGB_WIDTH,
};
pub use stream::{FrameReadError, FrameReader, StreamOrderGuard};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("bad frame magic")]
    BadMagic,
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u8),
    #[error("frame checksum mismatch (expected {expected:#010x}, computed {actual:#010x})")]
    CrcMismatch { expected: u32, actual: u32 },
    #[error("truncated frame: {needed} more bytes needed")]
    Truncated { needed: usize },
    #[error("declared payload length {0} exceeds the frame size limit")]
    Oversized(u32),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("envelope references unknown stream {0}")]
    UnknownStream(StreamId),
    #[error("originating time on stream {stream} went from {previous} to {got}")]
    NonMonotonicTime { stream: StreamId, previous: u64, got: u64 },
}
