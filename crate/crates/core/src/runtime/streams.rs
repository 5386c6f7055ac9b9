//! Stream ids the server allocates itself. Client manifests may not use
//! ids at or above [`RESERVED_FROM`].

use crate::wire::{StreamDescriptor, StreamId, StreamKind, StreamManifest, WireError};

pub const RESERVED_FROM: u16 = 0x8000;

pub const COMMAND_STREAM: StreamId = StreamId(0x8000);
pub const DETECTION_STREAM: StreamId = StreamId(0x8001);
pub const LLM_STREAM: StreamId = StreamId(0x8002);
pub const TRANSITION_STREAM: StreamId = StreamId(0x8003);
/// Text typed or clicked in the operator UI.
pub const UI_TEXT_STREAM: StreamId = StreamId(0x8010);
/// Interface state reported by the operator UI.
pub const UI_STATE_STREAM: StreamId = StreamId(0x8011);

fn descriptor(stream_id: StreamId, name: &str, kind: StreamKind) -> StreamDescriptor {
    StreamDescriptor { stream_id, name: name.to_string(), kind, nominal_rate_hz: 0.0 }
}

pub fn ui_descriptors() -> Vec<StreamDescriptor> {
    vec![
        descriptor(UI_TEXT_STREAM, "ui.text", StreamKind::TextInput),
        descriptor(UI_STATE_STREAM, "ui.state", StreamKind::InterfaceState),
    ]
}

pub fn derived_descriptors() -> Vec<StreamDescriptor> {
    vec![
        descriptor(COMMAND_STREAM, "server.commands", StreamKind::InterfaceCommand),
        descriptor(DETECTION_STREAM, "server.detections", StreamKind::Detection),
        descriptor(LLM_STREAM, "server.llm", StreamKind::LlmExchange),
        descriptor(TRANSITION_STREAM, "server.transitions", StreamKind::ControllerTransition),
    ]
}

/// Rejects client manifests that use reserved ids or declare derived kinds.
pub fn check_client_manifest(manifest: &StreamManifest) -> Result<(), WireError> {
    manifest.validate()?;
    for d in &manifest.streams {
        if d.stream_id.0 >= RESERVED_FROM {
            return Err(WireError::Manifest(format!("stream id {} is reserved for the server", d.stream_id)));
        }
        if d.kind.is_derived() {
            return Err(WireError::Manifest(format!("stream {} declares server-side kind {:?}", d.stream_id, d.kind)));
        }
    }
    Ok(())
}

/// Session manifest for a live session: client streams, UI input streams
/// and the derived streams.
pub fn live_manifest(client: &StreamManifest) -> StreamManifest {
    let mut m = client.clone();
    m.streams.extend(ui_descriptors());
    m.streams.extend(derived_descriptors());
    m
}

/// Input part of a recorded manifest: everything that is not derived.
pub fn input_streams(recorded: &StreamManifest) -> StreamManifest {
    let mut m = recorded.clone();
    m.streams.retain(|d| !d.kind.is_derived());
    m
}
