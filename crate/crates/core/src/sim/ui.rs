use std::collections::BTreeMap;

use serde::Serialize;

use crate::controller::{InterfaceCommand, PanelStep, Side};
use crate::task::{Hologram, StepCursor, TimerSpec};

/// What the simulated headset is currently showing.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct UiModel {
    pub chat: Vec<(Side, String)>,
    pub suggestions: Vec<String>,
    pub task: Option<String>,
    pub steps: Vec<PanelStep>,
    pub cursor: Option<StepCursor>,
    pub holograms: BTreeMap<String, Hologram>,
    pub object_labels: BTreeMap<u64, (String, [f64; 3])>,
    pub timers: BTreeMap<String, TimerSpec>,
    pub spoken: Vec<String>,
    pub panel_moves: usize,
}

impl UiModel {
    pub fn apply(&mut self, cmd: &InterfaceCommand) {
        match cmd {
            InterfaceCommand::SetTaskPanel { task, steps, cursor } => {
                self.task = Some(task.clone());
                self.steps = steps.clone();
                self.cursor = *cursor;
            }
            InterfaceCommand::AddChatBubble { side, text } => self.chat.push((*side, text.clone())),
            InterfaceCommand::ShowSuggestions { utterances } => self.suggestions = utterances.clone(),
            InterfaceCommand::ClearSuggestions {} => self.suggestions.clear(),
            InterfaceCommand::Speak { text, .. } => self.spoken.push(text.clone()),
            InterfaceCommand::PlaceHologram { id, hologram } => {
                self.holograms.insert(id.clone(), hologram.clone());
            }
            InterfaceCommand::RemoveHologram { id } => {
                self.holograms.remove(id);
            }
            InterfaceCommand::ShowObjectLabel { track_id, label, position } => {
                self.object_labels.insert(*track_id, (label.clone(), *position));
            }
            InterfaceCommand::StartTimer { id, timer } => {
                self.timers.insert(id.clone(), timer.clone());
            }
            InterfaceCommand::StopTimer { id } => {
                self.timers.remove(id);
            }
            InterfaceCommand::MovePanelToUser {} => self.panel_moves += 1,
        }
    }

    /// Whether the task panel shows a finished task.
    pub fn task_complete(&self) -> bool {
        self.task.is_some() && self.cursor.is_none()
    }
}
