use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::clock::PipelineClock;
use super::config::{ConfigError, ServerConfig};
use super::pipeline::{Pipeline, PipelineStats, Services};
use super::streams::{derived_descriptors, input_streams};
use crate::controller::ControllerConfig;
use crate::store::{StoreError, StoreReader, StoreWriter};
use crate::wire::{StreamManifest, WireError};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: String, source: std::io::Error },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("store failure: {0}")]
    Store(#[from] StoreError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("replay requires mock service backends; {0} is configured as a live backend")]
    RefusesLiveBackends(&'static str),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<WireError> for RuntimeError {
    fn from(e: WireError) -> Self {
        RuntimeError::Protocol(e.to_string())
    }
}

/// Builds the pipeline for a session whose inputs are `inputs`.
pub fn build_pipeline(
    config: &ServerConfig,
    inputs: &StreamManifest,
    clock: PipelineClock,
) -> Result<Pipeline, ConfigError> {
    let controller = ControllerConfig { mode: config.mode, library: config.load_tasks()? };
    let services = Services::from_config(config)?;
    Ok(Pipeline::new(inputs, controller, services, config.geometry.clone(), config.tick_interval_ms, clock))
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    /// Session directory written by the replay.
    pub session_dir: PathBuf,
    pub stats: PipelineStats,
    pub derived: u64,
    pub wall: Duration,
}

/// Re-runs a recorded session through the pipeline as fast as possible and
/// records inputs plus regenerated derived streams into a new session under
/// `config.store_root`.
pub fn run_replay(config: &ServerConfig, store: &Path) -> Result<ReplayOutcome, RuntimeError> {
    if !matches!(config.llm, super::LlmConfig::Mock { .. }) {
        return Err(RuntimeError::RefusesLiveBackends("llm"));
    }
    if !matches!(config.detector, super::DetectorConfig::Mock { .. }) {
        return Err(RuntimeError::RefusesLiveBackends("detector"));
    }
    if !matches!(config.asr, super::AsrConfig::Mock) {
        return Err(RuntimeError::RefusesLiveBackends("asr"));
    }
    let start = Instant::now();
    let reader = StoreReader::open(store)?;
    let inputs = input_streams(reader.manifest());
    let mut manifest = inputs.clone();
    manifest.session_id = uuid::Uuid::new_v4();
    manifest.streams.extend(derived_descriptors());
    let mut pipeline = build_pipeline(config, &inputs, PipelineClock::replay())?;
    let mut writer = StoreWriter::create(&config.store_root, manifest)?;
    let ids: Vec<_> = inputs.streams.iter().map(|d| d.stream_id).collect();
    let mut derived = 0u64;
    for item in reader.read_merged_streams(&ids, None, None)? {
        let env = item?;
        writer.append(&env)?;
        for out in pipeline.ingest(env) {
            writer.append(&out)?;
            derived += 1;
        }
        writer.maybe_checkpoint()?;
    }
    for out in pipeline.finish() {
        writer.append(&out)?;
        derived += 1;
    }
    let session_dir = writer.dir().to_path_buf();
    writer.close()?;
    Ok(ReplayOutcome { session_dir, stats: pipeline.stats().clone(), derived, wall: start.elapsed() })
}
