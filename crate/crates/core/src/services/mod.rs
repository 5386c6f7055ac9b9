//! Speech recognition, LLM completion and object detection clients.
//!
//! Each service has a deterministic mock backend and a generic HTTP backend.
//! HTTP bodies (all JSON):
//!
//! * `POST /complete` request `{"correlation": u64, "template_id": str,
//!   "bindings": {str: str}, "prompt": str}`, response `{"text": str}`.
//! * `POST /detect` request `{"width": u32, "height": u32, "intrinsics":
//!   {"fx","fy","cx","cy"}, "extrinsics": [16 × f32 row-major camera-to-world],
//!   "vocabulary": [str], "image_nv12_base64": str}`, response
//!   `{"masks": [DetectionMask]}`.
//! * `POST /transcribe` request `{"sample_rate": 16000, "samples_f32le_base64": str}`,
//!   response `{"events": [{"type": "partial" | "final", "text": str}]}`.
//!
//! Non-2xx statuses surface as [`ServiceError::BackendError`].

mod detect;
mod dispatch;
mod http;
mod llm;
pub mod prompts;
mod speech;
mod stub;

use thiserror::Error;

pub use detect::{
    run_detection, DetectionRequest, DetectionResult, DetectorBackend, DetectorWorker, HttpDetector, MockSceneDetector,
    WorkerCounters,
};
pub use dispatch::{Completion, DispatchMode, ServiceQueue};
pub use http::DEFAULT_TIMEOUT;
pub use llm::{HttpLlm, LlmBackend, LlmQuery, LlmResponse, MockFixtures, MockLlm, MOCK_UNKNOWN};
pub use prompts::{bindings_hash, render_prompt, Bindings, PromptLibrary, PromptTemplate};
pub use speech::{HttpSpeech, MockSpeech, RecognizedText, SpeechBackend, SpeechEvent};
pub use stub::{StubConfig, StubServer};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error("missing binding for slot {0:?}")]
    MissingSlot(String),
    #[error("binding {0:?} is not a slot of the template")]
    UnknownSlot(String),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("invalid prompt template: {0}")]
    BadTemplate(String),
    #[error("backend did not answer in time")]
    BackendTimeout,
    #[error("backend error {status}: {body}")]
    BackendError { status: u16, body: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}
