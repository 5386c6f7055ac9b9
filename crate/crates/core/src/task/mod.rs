//! Task library content model.
//!
//! `tasks.json` layout (schema version 1):
//!
//! ```json
//! {
//!   "schema": 1,
//!   "tasks": [
//!     {
//!       "name": "make coffee",
//!       "steps": [
//!         { "type": "gather", "instruction": "Find the mug.", "objects": ["mug"] },
//!         { "type": "simple", "instruction": "Boil water.", "expected_duration_s": 90,
//!           "holograms": [ { "kind": "straight_arrow", "pose_world": [1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1] } ] },
//!         { "type": "complex", "instruction": "Brew.",
//!           "substeps": [ { "instruction": "Add grounds." }, { "instruction": "Pour." } ] }
//!       ]
//!     }
//!   ]
//! }
//! ```
//!
//! Hologram `kind` is one of `"label"`, `"straight_arrow"`, `"curved_arrow"` or
//! `{ "model_ref": "<name>" }`; `pose_world` is a row-major 4×4 rigid transform
//! in the spatial-anchor frame; `text` is optional. Object labels are stored
//! lowercase.

mod generated;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose;

pub use generated::validate_generated_recipe;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("cannot read task library: {0}")]
    Io(#[from] std::io::Error),
    #[error("task library is not valid JSON: {0}")]
    Parse(String),
    #[error("schema error at {path}: {reason}")]
    Schema { path: String, reason: String },
    #[error("duplicate task name {0:?}")]
    DuplicateTaskName(String),
    #[error("unparseable recipe: {0}")]
    UnparseableRecipe(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LibrarySource {
    #[default]
    Library,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskLibrary {
    pub schema: u32,
    pub tasks: Vec<TaskRecipe>,
    #[serde(default, skip_serializing)]
    pub source: LibrarySource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecipe {
    pub name: String,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    Gather {
        instruction: String,
        objects: Vec<String>,
    },
    Simple {
        instruction: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expected_duration_s: Option<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        holograms: Vec<Hologram>,
    },
    Complex {
        instruction: String,
        substeps: Vec<SubStep>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubStep {
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub holograms: Vec<Hologram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HologramKind {
    Label,
    StraightArrow,
    CurvedArrow,
    ModelRef(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hologram {
    pub kind: HologramKind,
    pub pose_world: [f64; 16],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimerSpec {
    pub duration_s: f64,
    pub display_pose: [f64; 16],
}

/// Position in a recipe. Complex steps own one header position
/// (`substep: None`) followed by one position per substep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StepCursor {
    pub step: usize,
    pub substep: Option<usize>,
}

impl StepCursor {
    pub fn start() -> Self {
        StepCursor { step: 0, substep: None }
    }
}

impl Step {
    pub fn instruction(&self) -> &str {
        match self {
            Step::Gather { instruction, .. } | Step::Simple { instruction, .. } | Step::Complex { instruction, .. } => {
                instruction
            }
        }
    }
}

impl TaskRecipe {
    /// Every cursor position in execution order.
    pub fn positions(&self) -> Vec<StepCursor> {
        let mut out = Vec::new();
        for (i, step) in self.steps.iter().enumerate() {
            out.push(StepCursor { step: i, substep: None });
            if let Step::Complex { substeps, .. } = step {
                out.extend((0..substeps.len()).map(|k| StepCursor { step: i, substep: Some(k) }));
            }
        }
        out
    }

    pub fn position_count(&self) -> usize {
        self.steps
            .iter()
            .map(|s| match s {
                Step::Complex { substeps, .. } => 1 + substeps.len(),
                _ => 1,
            })
            .sum()
    }

    pub fn contains(&self, c: StepCursor) -> bool {
        match (self.steps.get(c.step), c.substep) {
            (Some(_), None) => true,
            (Some(Step::Complex { substeps, .. }), Some(k)) => k < substeps.len(),
            _ => false,
        }
    }

    pub fn next_position(&self, c: StepCursor) -> Option<StepCursor> {
        match (self.steps.get(c.step)?, c.substep) {
            (Step::Complex { substeps, .. }, None) if !substeps.is_empty() => {
                Some(StepCursor { step: c.step, substep: Some(0) })
            }
            (Step::Complex { substeps, .. }, Some(k)) if k + 1 < substeps.len() => {
                Some(StepCursor { step: c.step, substep: Some(k + 1) })
            }
            _ => (c.step + 1 < self.steps.len()).then_some(StepCursor { step: c.step + 1, substep: None }),
        }
    }

    pub fn previous_position(&self, c: StepCursor) -> Option<StepCursor> {
        match c.substep {
            Some(0) => Some(StepCursor { step: c.step, substep: None }),
            Some(k) => Some(StepCursor { step: c.step, substep: Some(k - 1) }),
            None if c.step == 0 => None,
            None => {
                let prev = c.step - 1;
                Some(match &self.steps[prev] {
                    Step::Complex { substeps, .. } if !substeps.is_empty() => {
                        StepCursor { step: prev, substep: Some(substeps.len() - 1) }
                    }
                    _ => StepCursor { step: prev, substep: None },
                })
            }
        }
    }

    /// Instruction and timing for the position under `c`.
    pub fn instruction_at(&self, c: StepCursor) -> Option<&str> {
        match (self.steps.get(c.step)?, c.substep) {
            (step, None) => Some(step.instruction()),
            (Step::Complex { substeps, .. }, Some(k)) => substeps.get(k).map(|s| s.instruction.as_str()),
            _ => None,
        }
    }

    pub fn duration_at(&self, c: StepCursor) -> Option<f64> {
        match (self.steps.get(c.step)?, c.substep) {
            (Step::Simple { expected_duration_s, .. }, None) => *expected_duration_s,
            (Step::Complex { substeps, .. }, Some(k)) => substeps.get(k)?.expected_duration_s,
            _ => None,
        }
    }

    pub fn holograms_at(&self, c: StepCursor) -> &[Hologram] {
        match (self.steps.get(c.step), c.substep) {
            (Some(Step::Simple { holograms, .. }), None) => holograms,
            (Some(Step::Complex { substeps, .. }), Some(k)) => substeps.get(k).map_or(&[], |s| &s.holograms),
            _ => &[],
        }
    }
}

impl TaskLibrary {
    pub fn new(tasks: Vec<TaskRecipe>, source: LibrarySource) -> Self {
        TaskLibrary { schema: SCHEMA_VERSION, tasks, source }
    }

    pub fn find(&self, name: &str) -> Option<&TaskRecipe> {
        let wanted = name.trim().to_lowercase();
        self.tasks.iter().find(|t| t.name.to_lowercase() == wanted)
    }

    pub fn names(&self) -> Vec<&str> {
        self.tasks.iter().map(|t| t.name.as_str()).collect()
    }

    pub fn from_json(text: &str) -> Result<TaskLibrary, TaskError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| TaskError::Parse(e.to_string()))?;
        let mut lib: TaskLibrary = serde_path_to_error::deserialize(value).map_err(|e| TaskError::Schema {
            path: json_pointer(&e.path().to_string()),
            reason: e.inner().to_string(),
        })?;
        lib.normalize();
        lib.validate()?;
        Ok(lib)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("library serializes");
        s.push('\n');
        s
    }

    fn normalize(&mut self) {
        for task in &mut self.tasks {
            for step in &mut task.steps {
                if let Step::Gather { objects, .. } = step {
                    for o in objects.iter_mut() {
                        *o = o.trim().to_lowercase();
                    }
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        let err = |path: String, reason: &str| Err(TaskError::Schema { path, reason: reason.to_string() });
        if self.schema != SCHEMA_VERSION {
            return err("/schema".into(), "unsupported schema version");
        }
        let mut names = std::collections::HashSet::new();
        for (ti, task) in self.tasks.iter().enumerate() {
            let base = format!("/tasks/{ti}");
            if task.name.trim().is_empty() {
                return err(format!("{base}/name"), "task name is empty");
            }
            if !names.insert(task.name.to_lowercase()) {
                return Err(TaskError::DuplicateTaskName(task.name.clone()));
            }
            if task.steps.is_empty() {
                return err(format!("{base}/steps"), "a task needs at least one step");
            }
            for (si, step) in task.steps.iter().enumerate() {
                let sp = format!("{base}/steps/{si}");
                if step.instruction().trim().is_empty() {
                    return err(format!("{sp}/instruction"), "instruction is empty");
                }
                match step {
                    Step::Gather { objects, .. } => {
                        if objects.is_empty() {
                            return err(format!("{sp}/objects"), "a gather step needs at least one object");
                        }
                        if let Some(k) = objects.iter().position(|o| o.is_empty()) {
                            return err(format!("{sp}/objects/{k}"), "object label is empty");
                        }
                    }
                    Step::Simple { expected_duration_s, holograms, .. } => {
                        check_duration(*expected_duration_s, &sp)?;
                        check_holograms(holograms, &sp)?;
                    }
                    Step::Complex { substeps, .. } => {
                        if substeps.is_empty() {
                            return err(format!("{sp}/substeps"), "a complex step needs at least one substep");
                        }
                        for (k, sub) in substeps.iter().enumerate() {
                            let subp = format!("{sp}/substeps/{k}");
                            if sub.instruction.trim().is_empty() {
                                return err(format!("{subp}/instruction"), "instruction is empty");
                            }
                            check_duration(sub.expected_duration_s, &subp)?;
                            check_holograms(&sub.holograms, &subp)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_duration(d: Option<f64>, path: &str) -> Result<(), TaskError> {
    match d {
        Some(d) if !(d > 0.0 && d.is_finite()) => Err(TaskError::Schema {
            path: format!("{path}/expected_duration_s"),
            reason: format!("duration must be positive, got {d}"),
        }),
        _ => Ok(()),
    }
}

fn check_holograms(holograms: &[Hologram], path: &str) -> Result<(), TaskError> {
    for (h, hologram) in holograms.iter().enumerate() {
        if !Pose::from_row_major(&hologram.pose_world).is_rigid(1e-4) {
            return Err(TaskError::Schema {
                path: format!("{path}/holograms/{h}/pose_world"),
                reason: "pose is not a rigid transform".into(),
            });
        }
    }
    Ok(())
}

/// `tasks[0].steps[2]` → `/tasks/0/steps/2`.
fn json_pointer(serde_path: &str) -> String {
    if serde_path == "." {
        return "/".into();
    }
    let mut out = String::new();
    for part in serde_path.split(['.', '[']) {
        let part = part.trim_end_matches(']');
        if !part.is_empty() {
            out.push('/');
            out.push_str(part);
        }
    }
    out
}

pub fn load_library(path: &Path) -> Result<TaskLibrary, TaskError> {
    TaskLibrary::from_json(&std::fs::read_to_string(path)?)
}

pub fn save_library(library: &TaskLibrary, path: &Path) -> Result<(), TaskError> {
    std::fs::write(path, library.to_json())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"schema":1,"tasks":[{"name":"tea","steps":[{"type":"simple","instruction":"Steep."}]}]}"#;

    #[test]
    fn minimal_library_loads() {
        let lib = TaskLibrary::from_json(MINIMAL).unwrap();
        assert_eq!(lib.tasks.len(), 1);
        assert_eq!(lib.source, LibrarySource::Library);
    }

    #[test]
    fn empty_substeps_reported_at_step() {
        let text = r#"{"schema":1,"tasks":[{"name":"t","steps":[
            {"type":"simple","instruction":"a"},
            {"type":"complex","instruction":"b","substeps":[]}]}]}"#;
        match TaskLibrary::from_json(text) {
            Err(TaskError::Schema { path, .. }) => assert_eq!(path, "/tasks/0/steps/1/substeps"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn serde_errors_carry_pointer() {
        let text = r#"{"schema":1,"tasks":[{"name":"t","steps":[{"type":"simple","instruction":"a","bogus":1}]}]}"#;
        match TaskLibrary::from_json(text) {
            Err(TaskError::Schema { path, .. }) => assert!(path.starts_with("/tasks/0/steps/0"), "{path}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(TaskLibrary::from_json("{"), Err(TaskError::Parse(_))));
    }

    #[test]
    fn duplicate_names_and_bad_durations() {
        let dup = r#"{"schema":1,"tasks":[
            {"name":"Tea","steps":[{"type":"simple","instruction":"a"}]},
            {"name":"tea","steps":[{"type":"simple","instruction":"a"}]}]}"#;
        assert!(matches!(TaskLibrary::from_json(dup), Err(TaskError::DuplicateTaskName(_))));
        let neg = r#"{"schema":1,"tasks":[{"name":"t","steps":[{"type":"simple","instruction":"a","expected_duration_s":0}]}]}"#;
        assert!(matches!(TaskLibrary::from_json(neg), Err(TaskError::Schema { .. })));
    }

    #[test]
    fn labels_lowercased() {
        let text =
            r#"{"schema":1,"tasks":[{"name":"t","steps":[{"type":"gather","instruction":"a","objects":[" Mug "]}]}]}"#;
        let lib = TaskLibrary::from_json(text).unwrap();
        assert_eq!(lib.tasks[0].steps[0], Step::Gather { instruction: "a".into(), objects: vec!["mug".into()] });
    }

    fn recipe() -> TaskRecipe {
        TaskRecipe {
            name: "r".into(),
            steps: vec![
                Step::Gather { instruction: "g".into(), objects: vec!["a".into()] },
                Step::Complex {
                    instruction: "c".into(),
                    substeps: vec![
                        SubStep { instruction: "c0".into(), expected_duration_s: None, holograms: vec![] },
                        SubStep { instruction: "c1".into(), expected_duration_s: Some(3.0), holograms: vec![] },
                    ],
                },
                Step::Simple { instruction: "s".into(), expected_duration_s: None, holograms: vec![] },
            ],
        }
    }

    #[test]
    fn cursor_walks_every_position_once() {
        let r = recipe();
        let positions = r.positions();
        assert_eq!(positions.len(), r.position_count());
        assert_eq!(positions.len(), 1 + 3 + 1);
        let mut walked = vec![StepCursor::start()];
        while let Some(n) = r.next_position(*walked.last().unwrap()) {
            walked.push(n);
        }
        assert_eq!(walked, positions);
        assert!(walked.windows(2).all(|w| w[0] < w[1]));
        let mut back = vec![*positions.last().unwrap()];
        while let Some(p) = r.previous_position(*back.last().unwrap()) {
            back.push(p);
        }
        back.reverse();
        assert_eq!(back, positions);
        assert_eq!(r.duration_at(StepCursor { step: 1, substep: Some(1) }), Some(3.0));
        assert_eq!(r.instruction_at(StepCursor { step: 1, substep: Some(0) }), Some("c0"));
        assert!(!r.contains(StepCursor { step: 1, substep: Some(2) }));
    }
}
