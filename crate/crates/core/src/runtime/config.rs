//! Server configuration.
//!
//! JSON file; every key is optional and unknown keys are rejected:
//!
//! ```json
//! {
//!   "listen": "127.0.0.1:7700",
//!   "store_root": "sessions",
//!   "task_library": "tasks.json",
//!   "prompt_library": "prompts.json",
//!   "mode": "library",
//!   "llm": { "type": "mock", "fixtures": "mock_llm.json" },
//!   "detector": { "type": "mock", "scene": "scene.json" },
//!   "asr": { "type": "http", "url": "http://127.0.0.1:7800", "timeout_s": 30 },
//!   "geometry": { "sync_tolerance_ms": 20, "merge_radius_m": 0.25, "ema_alpha": 0.5,
//!                 "min_points": 10, "max_range_mm": 4000 },
//!   "ws_bridge": "127.0.0.1:7701",
//!   "tick_interval_ms": 100,
//!   "checkpoint_interval_ms": 5000,
//!   "seed": 0
//! }
//! ```
//!
//! Omitted `task_library`, `prompt_library` and mock `fixtures` fall back to
//! the bundled coffee task, prompt templates and fixtures. A mock detector
//! without a scene never detects anything. `scene` may name either a scene
//! file or a scenario file (its `scene` member is used).

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::GuidanceMode;
use crate::geometry::{Scene, TrackerConfig};
use crate::services::{MockFixtures, PromptLibrary, ServiceError, DEFAULT_TIMEOUT};
use crate::task::{TaskError, TaskLibrary};

pub const BUNDLED_TASKS: &str = include_str!("../../assets/tasks.json");
pub const BUNDLED_FIXTURES: &str = include_str!("../../assets/mock_llm.json");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Service(#[from] ServiceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LlmConfig {
    Mock {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fixtures: Option<PathBuf>,
    },
    Http {
        url: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_s: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorConfig {
    Mock {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scene: Option<PathBuf>,
    },
    Http {
        url: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_s: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AsrConfig {
    Mock,
    Http {
        url: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_s: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub sync_tolerance_ms: f64,
    pub merge_radius_m: f64,
    pub ema_alpha: f64,
    pub min_points: usize,
    pub max_range_mm: u16,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let t = TrackerConfig::default();
        GeometryConfig {
            sync_tolerance_ms: 20.0,
            merge_radius_m: t.merge_radius,
            ema_alpha: t.alpha,
            min_points: t.min_points,
            max_range_mm: crate::geometry::DEFAULT_MAX_RANGE_MM,
        }
    }
}

impl GeometryConfig {
    pub fn tracker(&self) -> TrackerConfig {
        TrackerConfig { merge_radius: self.merge_radius_m, alpha: self.ema_alpha, min_points: self.min_points }
    }

    pub fn sync_tolerance_ns(&self) -> u64 {
        (self.sync_tolerance_ms * 1e6).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub listen: String,
    pub store_root: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task_library: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_library: Option<PathBuf>,
    pub mode: GuidanceMode,
    pub llm: LlmConfig,
    pub detector: DetectorConfig,
    pub asr: AsrConfig,
    pub geometry: GeometryConfig,
    /// Websocket bridge address; `null` disables the bridge.
    pub ws_bridge: Option<String>,
    /// Controller tick spacing in originating time.
    pub tick_interval_ms: u64,
    /// Wall-clock spacing of catalog checkpoints while a session is recorded.
    pub checkpoint_interval_ms: u64,
    /// Seed for randomized components. The bundled components are
    /// deterministic and do not draw from it.
    pub seed: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen: "127.0.0.1:7700".into(),
            store_root: PathBuf::from("sessions"),
            task_library: None,
            prompt_library: None,
            mode: GuidanceMode::Library,
            llm: LlmConfig::Mock { fixtures: None },
            detector: DetectorConfig::Mock { scene: None },
            asr: AsrConfig::Mock,
            geometry: GeometryConfig::default(),
            ws_bridge: Some("127.0.0.1:7701".into()),
            tick_interval_ms: 100,
            checkpoint_interval_ms: 5000,
            seed: 0,
        }
    }
}

fn timeout(s: Option<f64>) -> Duration {
    s.map_or(DEFAULT_TIMEOUT, Duration::from_secs_f64)
}

impl ServerConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ServerConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| ConfigError::Invalid(format!("{}: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let g = &self.geometry;
        if !(g.sync_tolerance_ms.is_finite() && g.sync_tolerance_ms >= 0.0) {
            return bad(format!(
                "geometry.sync_tolerance_ms must be a non-negative number, got {}",
                g.sync_tolerance_ms
            ));
        }
        if !(g.merge_radius_m.is_finite() && g.merge_radius_m > 0.0) {
            return bad(format!("geometry.merge_radius_m must be positive, got {}", g.merge_radius_m));
        }
        if !(g.ema_alpha > 0.0 && g.ema_alpha <= 1.0) {
            return bad(format!("geometry.ema_alpha must be in (0, 1], got {}", g.ema_alpha));
        }
        if g.max_range_mm == 0 {
            return bad("geometry.max_range_mm must be positive".into());
        }
        if self.tick_interval_ms == 0 {
            return bad("tick_interval_ms must be positive".into());
        }
        if self.checkpoint_interval_ms == 0 {
            return bad("checkpoint_interval_ms must be positive".into());
        }
        for (name, t) in [
            (
                "llm",
                match &self.llm {
                    LlmConfig::Http { timeout_s, .. } => *timeout_s,
                    _ => None,
                },
            ),
            (
                "detector",
                match &self.detector {
                    DetectorConfig::Http { timeout_s, .. } => *timeout_s,
                    _ => None,
                },
            ),
            (
                "asr",
                match &self.asr {
                    AsrConfig::Http { timeout_s, .. } => *timeout_s,
                    _ => None,
                },
            ),
        ] {
            if let Some(t) = t {
                if !(t.is_finite() && t > 0.0) {
                    return bad(format!("{name}.timeout_s must be positive, got {t}"));
                }
            }
        }
        Ok(())
    }

    /// Whether every service backend is a mock.
    pub fn all_mock(&self) -> bool {
        matches!(self.llm, LlmConfig::Mock { .. })
            && matches!(self.detector, DetectorConfig::Mock { .. })
            && matches!(self.asr, AsrConfig::Mock)
    }

    pub fn load_tasks(&self) -> Result<TaskLibrary, ConfigError> {
        Ok(match &self.task_library {
            Some(p) => crate::task::load_library(p)?,
            None => TaskLibrary::from_json(BUNDLED_TASKS)?,
        })
    }

    pub fn load_prompts(&self) -> Result<PromptLibrary, ConfigError> {
        Ok(match &self.prompt_library {
            Some(p) => PromptLibrary::load(p)?,
            None => PromptLibrary::builtin(),
        })
    }

    pub fn load_fixtures(&self) -> Result<MockFixtures, ConfigError> {
        Ok(match &self.llm {
            LlmConfig::Mock { fixtures: Some(p) } => MockFixtures::load(p)?,
            _ => MockFixtures::from_json(BUNDLED_FIXTURES)?,
        })
    }

    pub fn llm_timeout(&self) -> Duration {
        match &self.llm {
            LlmConfig::Http { timeout_s, .. } => timeout(*timeout_s),
            LlmConfig::Mock { .. } => DEFAULT_TIMEOUT,
        }
    }

    pub fn detector_timeout(&self) -> Duration {
        match &self.detector {
            DetectorConfig::Http { timeout_s, .. } => timeout(*timeout_s),
            DetectorConfig::Mock { .. } => DEFAULT_TIMEOUT,
        }
    }

    pub fn asr_timeout(&self) -> Duration {
        match &self.asr {
            AsrConfig::Http { timeout_s, .. } => timeout(*timeout_s),
            AsrConfig::Mock => DEFAULT_TIMEOUT,
        }
    }
}

/// Loads a scene from a scene file or from the `scene` member of a scenario file.
pub fn load_scene(path: &Path) -> Result<Scene, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
    let scene = value.get("scene").cloned().unwrap_or(value);
    serde_json::from_value(scene).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        assert_eq!(ServerConfig::from_json("{}").unwrap(), ServerConfig::default());
    }

    #[test]
    fn unknown_keys_rejected_with_path() {
        let err = ServerConfig::from_json(r#"{"geometry": {"merge_radius": 1}}"#).unwrap_err().to_string();
        assert!(err.contains("geometry"), "{err}");
        assert!(ServerConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn tunables_validated() {
        assert!(ServerConfig::from_json(r#"{"geometry": {"ema_alpha": 0}}"#).is_err());
        assert!(ServerConfig::from_json(r#"{"geometry": {"merge_radius_m": -1}}"#).is_err());
        assert!(ServerConfig::from_json(r#"{"tick_interval_ms": 0}"#).is_err());
        assert!(ServerConfig::from_json(r#"{"llm": {"type": "http", "url": "http://x", "timeout_s": 0}}"#).is_err());
    }

    #[test]
    fn backends_parse() {
        let c = ServerConfig::from_json(r#"{"llm": {"type": "http", "url": "http://h:1"}, "asr": {"type": "mock"}}"#)
            .unwrap();
        assert!(!c.all_mock());
        assert_eq!(c.llm_timeout(), DEFAULT_TIMEOUT);
        assert!(ServerConfig::default().all_mock());
    }

    #[test]
    fn bundled_assets_load() {
        let c = ServerConfig::default();
        assert!(c.load_tasks().unwrap().find("make coffee").is_some());
        c.load_prompts().unwrap();
        let fixtures = c.load_fixtures().unwrap();
        let bindings = [("tasks", "make coffee\nmake tea"), ("utterance", "help me make coffee")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        assert_eq!(fixtures.lookup("intent_recognition", &bindings), "make coffee");
    }
}
