use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use super::{StreamId, WireError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StreamKind {
    RgbCamera,
    PreviewCamera,
    DepthCamera,
    EyeGaze,
    HeadPose,
    Hands,
    Audio,
    TextInput,
    InterfaceState,
    InterfaceCommand,
    Detection,
    LlmExchange,
    ControllerTransition,
}

impl StreamKind {
    pub const ALL: [StreamKind; 13] = [
        StreamKind::RgbCamera,
        StreamKind::PreviewCamera,
        StreamKind::DepthCamera,
        StreamKind::EyeGaze,
        StreamKind::HeadPose,
        StreamKind::Hands,
        StreamKind::Audio,
        StreamKind::TextInput,
        StreamKind::InterfaceState,
        StreamKind::InterfaceCommand,
        StreamKind::Detection,
        StreamKind::LlmExchange,
        StreamKind::ControllerTransition,
    ];

    /// Streams produced by the server pipeline. They are regenerated on replay
    /// rather than fed back in.
    pub fn is_derived(self) -> bool {
        matches!(
            self,
            StreamKind::InterfaceCommand
                | StreamKind::Detection
                | StreamKind::LlmExchange
                | StreamKind::ControllerTransition
        )
    }

    /// Nominal capture rate of the headset sensor streams.
    pub fn nominal_rate_hz(self) -> Option<f64> {
        match self {
            StreamKind::RgbCamera | StreamKind::PreviewCamera | StreamKind::DepthCamera => Some(5.0),
            StreamKind::EyeGaze | StreamKind::HeadPose => Some(30.0),
            StreamKind::Hands => Some(20.0),
            StreamKind::Audio => Some(super::AUDIO_SAMPLE_RATE as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamDescriptor {
    pub stream_id: StreamId,
    pub name: String,
    pub kind: StreamKind,
    pub nominal_rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamManifest {
    pub session_id: Uuid,
    /// Wall-clock time of originating time zero, microseconds since the Unix epoch.
    pub epoch_utc: u64,
    pub streams: Vec<StreamDescriptor>,
}

impl StreamManifest {
    pub fn validate(&self) -> Result<(), WireError> {
        let mut seen = HashSet::new();
        for s in &self.streams {
            if s.stream_id.is_control() {
                return Err(WireError::Manifest(format!("stream {} uses the reserved control id", s.name)));
            }
            if !seen.insert(s.stream_id) {
                return Err(WireError::Manifest(format!("duplicate stream id {}", s.stream_id)));
            }
        }
        Ok(())
    }

    pub fn descriptor(&self, id: StreamId) -> Option<&StreamDescriptor> {
        self.streams.iter().find(|s| s.stream_id == id)
    }

    pub fn first_of_kind(&self, kind: StreamKind) -> Option<&StreamDescriptor> {
        self.streams.iter().find(|s| s.kind == kind)
    }
}

/// Messages carried on the control stream (id 0) as JSON payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControlMessage {
    Manifest(StreamManifest),
    /// Lock-step barrier: the server answers with `SyncAck` once every envelope
    /// sent before the `Sync` has been processed and its commands written.
    Sync {
        seq: u64,
    },
    SyncAck {
        seq: u64,
    },
}

impl ControlMessage {
    pub fn to_payload(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("control message serializes")
    }

    pub fn from_payload(bytes: &[u8]) -> Result<Self, WireError> {
        serde_json::from_slice(bytes).map_err(|e| WireError::SchemaViolation(format!("control message: {e}")))
    }
}
