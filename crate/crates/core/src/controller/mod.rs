//! Dialog state machine: consumes utterances, object sightings, interface
//! state and service completions in one total order and produces interface
//! commands and service requests.

mod machine;
mod phrases;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::services::Bindings;
use crate::task::{Hologram, StepCursor, TaskLibrary, TaskRecipe, TimerSpec};

pub use machine::{advance, timer_tick, Controller, Transition};
pub use phrases::{normalize_utterance, parse_question_answer, suggestions_for, COMPLETION_PHRASES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelStep {
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub substeps: Vec<String>,
}

/// Server-to-headset interface command. JSON form is internally tagged by
/// `"type"` with snake_case variant names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InterfaceCommand {
    /// `cursor: null` marks the task as finished.
    SetTaskPanel {
        task: String,
        steps: Vec<PanelStep>,
        cursor: Option<StepCursor>,
    },
    AddChatBubble {
        side: Side,
        text: String,
    },
    ShowSuggestions {
        utterances: Vec<String>,
    },
    Speak {
        utterance_id: String,
        text: String,
    },
    PlaceHologram {
        id: String,
        hologram: Hologram,
    },
    RemoveHologram {
        id: String,
    },
    ShowObjectLabel {
        track_id: u64,
        label: String,
        position: [f64; 3],
    },
    StartTimer {
        id: String,
        timer: TimerSpec,
    },
    StopTimer {
        id: String,
    },
    MovePanelToUser {},
    ClearSuggestions {},
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisPhase {
    Started,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisEvent {
    pub utterance_id: String,
    pub event: SynthesisPhase,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PalmState {
    pub left: bool,
    pub right: bool,
}

impl PalmState {
    pub fn any(&self) -> bool {
        self.left || self.right
    }
}

/// Headset-to-server interface report. Absent fields mean "unchanged".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel_pose: Option<[f64; 16]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub synthesis_events: Vec<SynthesisEvent>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub timer_positions: BTreeMap<String, [f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub palm_open_up: Option<PalmState>,
}

impl InterfaceState {
    pub fn to_payload(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("interface state serializes")
    }
}

impl InterfaceCommand {
    pub fn to_payload(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("interface command serializes")
    }
}

/// Everything the controller reacts to, in pipeline order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControllerEvent {
    FinalUtterance { text: String },
    ObjectFound { label: String, position: [f64; 3], track_id: u64 },
    LlmCompleted { correlation: u64, text: String },
    LlmFailed { correlation: u64, error: String },
    SynthesisFinished { utterance_id: String },
    TimerExpired { id: String },
    Tick { time: u64 },
    UiState { palm_open_up: Option<PalmState>, panel_pose: Option<[f64; 16]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServiceRequest {
    Llm {
        correlation: u64,
        template_id: String,
        bindings: Bindings,
    },
    /// Labels the detector should look for from now on; empty means idle.
    SetDetectionVocabulary {
        labels: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceMode {
    /// Tasks come from the loaded library; the request is matched by intent.
    #[default]
    Library,
    /// Steps are generated for whatever the user asks after a few context questions.
    Generated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Phase {
    Greeting,
    TaskSelection,
    AwaitIntent,
    AwaitContextQuestions,
    ContextQuestions { index: usize },
    AwaitRecipe,
    Executing { cursor: StepCursor },
    AwaitAnswer { cursor: StepCursor },
    TaskComplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogTurn {
    pub side: Side,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimerState {
    pub id: String,
    pub position: StepCursor,
    pub duration_s: f64,
    pub started_at: u64,
    pub expires_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeenObject {
    pub track_id: u64,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub phase: Phase,
    pub task: Option<TaskRecipe>,
    pub gather_found: BTreeSet<String>,
    pub active_timers: Vec<TimerState>,
    pub dialog_history: Vec<DialogTurn>,
    /// Positions that already had a timer started.
    pub timed_positions: BTreeSet<StepCursor>,
    /// Latest sighting per label.
    pub seen_objects: BTreeMap<String, SeenObject>,
    pub awaiting: Option<u64>,
    pub requested_task: Option<String>,
    pub context_questions: Vec<String>,
    pub context_answers: Vec<String>,
    pub placed_holograms: Vec<String>,
    pub palm_open_up: PalmState,
    pub panel_pose: Option<[f64; 16]>,
    pub suggestions: Vec<String>,
    pub vocabulary: Vec<String>,
    pub next_correlation: u64,
    pub next_utterance: u64,
    pub next_timer: u64,
}

impl Default for ControllerState {
    fn default() -> Self {
        ControllerState {
            phase: Phase::Greeting,
            task: None,
            gather_found: BTreeSet::new(),
            active_timers: Vec::new(),
            dialog_history: Vec::new(),
            timed_positions: BTreeSet::new(),
            seen_objects: BTreeMap::new(),
            awaiting: None,
            requested_task: None,
            context_questions: Vec::new(),
            context_answers: Vec::new(),
            placed_holograms: Vec::new(),
            palm_open_up: PalmState::default(),
            panel_pose: None,
            suggestions: Vec::new(),
            vocabulary: Vec::new(),
            next_correlation: 1,
            next_utterance: 1,
            next_timer: 1,
        }
    }
}

/// Fixed inputs of a session.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub mode: GuidanceMode,
    pub library: TaskLibrary,
}

/// Record of one phase change, persisted on the controller-transition stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseChange {
    pub from: Phase,
    pub to: Phase,
    pub event: ControllerEvent,
}
