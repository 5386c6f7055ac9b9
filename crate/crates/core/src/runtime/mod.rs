//! Server assembly: live TCP sessions, store replay, the websocket bridge
//! and the shared processing pipeline.

mod bridge;
mod clock;
mod config;
mod live;
mod pipeline;
mod replay;
pub mod streams;

pub use bridge::{UiEvent, UiMessage, WsBridge};
pub use clock::{utc_now_us, ClockMode, PipelineClock};
pub use config::{
    load_scene, AsrConfig, ConfigError, DetectorConfig, GeometryConfig, LlmConfig, ServerConfig, BUNDLED_FIXTURES,
    BUNDLED_TASKS,
};
pub use live::{run_live, LiveReport, LiveServer, SessionEnd};
pub use pipeline::{Pipeline, PipelineStats, Services};
pub use replay::{build_pipeline, run_replay, ReplayOutcome, RuntimeError};
