//! Scenario files.
//!
//! ```json
//! {
//!   "duration_s": 60,
//!   "seed": 7,
//!   "synthesis_ms_per_word": 60,
//!   "scene": { "objects": [ { "label": "mug", "center": [0.1, 0.25, 0.8], "radius": 0.05 } ] },
//!   "trajectory": [ { "at_s": 0, "position": [0, 0, 0], "yaw_deg": 0, "pitch_deg": 0 } ],
//!   "events": [
//!     { "at_s": 2, "action": { "say": "help me make coffee" } },
//!     { "at_s": 44, "action": { "palm_open": true } },
//!     { "at_s": 50, "action": { "move_panel": [1,0,0,0, 0,1,0,0, 0,0,1,1, 0,0,0,1] } }
//!   ]
//! }
//! ```
//!
//! World coordinates are meters in the spatial-anchor frame (x right, y down,
//! z forward at yaw 0). Keyframes are interpolated linearly in position, yaw
//! and pitch, and held constant outside their range.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, Scene};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub at_s: f64,
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
    #[serde(default)]
    pub pitch_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    Say(String),
    PalmOpen(bool),
    /// Row-major panel pose in world coordinates.
    MovePanel([f64; 16]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEvent {
    pub at_s: f64,
    pub action: Action,
}

fn default_ms_per_word() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ms_per_word")]
    pub synthesis_ms_per_word: f64,
    #[serde(default)]
    pub scene: Scene,
    #[serde(default)]
    pub trajectory: Vec<Keyframe>,
    #[serde(default)]
    pub events: Vec<ScenarioEvent>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad(format!("duration_s must be positive, got {}", self.duration_s));
        }
        if !(self.synthesis_ms_per_word.is_finite() && self.synthesis_ms_per_word >= 0.0) {
            return bad("synthesis_ms_per_word must be non-negative".into());
        }
        for e in &self.events {
            if !(0.0..=self.duration_s).contains(&e.at_s) {
                return bad(format!("event at {} s lies outside [0, {}]", e.at_s, self.duration_s));
            }
            match &e.action {
                Action::Say(t) if t.trim().is_empty() => return bad(format!("empty utterance at {} s", e.at_s)),
                Action::MovePanel(p) if !Pose::from_row_major(p).is_rigid(1e-6) => {
                    return bad(format!("panel pose at {} s is not rigid", e.at_s))
                }
                _ => {}
            }
        }
        if self.trajectory.windows(2).any(|w| w[1].at_s < w[0].at_s) {
            return bad("trajectory keyframes must be in time order".into());
        }
        for k in &self.trajectory {
            if !(k.at_s.is_finite()
                && k.position.iter().all(|v| v.is_finite())
                && k.yaw_deg.is_finite()
                && k.pitch_deg.is_finite())
            {
                return bad(format!("keyframe at {} s has non-finite values", k.at_s));
            }
        }
        for o in &self.scene.objects {
            if !(o.radius > 0.0 && o.center.iter().all(|v| v.is_finite())) {
                return bad(format!("scene object {:?} needs a finite center and positive radius", o.label));
            }
        }
        Ok(())
    }

    /// Head pose (camera to world) at `t_s` seconds.
    pub fn head_pose(&self, t_s: f64) -> Pose {
        let k = &self.trajectory;
        let (pos, yaw, pitch) = match k.iter().position(|f| f.at_s > t_s) {
            _ if k.is_empty() => ([0.0; 3], 0.0, 0.0),
            Some(0) => (k[0].position, k[0].yaw_deg, k[0].pitch_deg),
            None => {
                let f = &k[k.len() - 1];
                (f.position, f.yaw_deg, f.pitch_deg)
            }
            Some(i) => {
                let (a, b) = (&k[i - 1], &k[i]);
                let s = (t_s - a.at_s) / (b.at_s - a.at_s);
                let lerp = |x: f64, y: f64| x + (y - x) * s;
                (
                    [
                        lerp(a.position[0], b.position[0]),
                        lerp(a.position[1], b.position[1]),
                        lerp(a.position[2], b.position[2]),
                    ],
                    lerp(a.yaw_deg, b.yaw_deg),
                    lerp(a.pitch_deg, b.pitch_deg),
                )
            }
        };
        Pose::from_yaw_pitch(Vector3::from(pos), yaw.to_radians(), pitch.to_radians())
    }
}
