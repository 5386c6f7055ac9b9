use super::phrases::{
    declared_labels, describe_duration, is_come_here, is_completion, is_go_back, is_start_timer, normalize_utterance,
    parse_question_answer, suggestions_for,
};
use super::*;
use crate::services::prompts::{CONTEXT_QUESTIONS, INTENT_RECOGNITION, QUESTION_ANSWER, RECIPE_GENERATION};
use crate::task::{validate_generated_recipe, Step};

const GREETING: &str = "Hi! Which task would you like help with today?";
const UNKNOWN_TASK: &str = "Sorry, I don't know that task. Which task would you like help with?";
const NO_RECIPE: &str = "Sorry, I couldn't put together steps for that. Which task would you like help with?";
const NO_ANSWER: &str = "Sorry, I couldn't get an answer to that right now.";
const ALL_FOUND: &str = "Great, you have everything you need.";
const FIRST_STEP: &str = "We're already at the first step.";
const NO_TIMER: &str = "There's no timer for this step.";
const TIMER_RUNNING: &str = "The timer for this step was already started.";
const FINISHED: &str = "That was the last step. You're all done!";

/// Default timer placement when the panel pose is unknown: one meter ahead
/// of the spatial anchor.
const DEFAULT_TIMER_POSE: [f64; 16] = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0];

/// Output of one step of the state machine.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transition {
    pub commands: Vec<InterfaceCommand>,
    pub requests: Vec<ServiceRequest>,
    /// Set when the phase changed.
    pub phase_change: Option<PhaseChange>,
    /// Set when the event is not meaningful in the current phase; the state
    /// is left untouched apart from bookkeeping.
    pub illegal: Option<String>,
}

/// Pure form of [`Controller::handle`].
pub fn advance(
    config: &ControllerConfig,
    state: &ControllerState,
    time: u64,
    event: &ControllerEvent,
) -> (ControllerState, Transition) {
    let mut next = state.clone();
    let t = step(config, &mut next, time, event);
    (next, t)
}

/// Expires every timer due at `now`, earliest expiry first (ties by id).
pub fn timer_tick(state: &ControllerState, now: u64) -> (ControllerState, Vec<InterfaceCommand>) {
    let mut next = state.clone();
    let mut cx = Cx::new(&mut next);
    cx.expire_timers(now);
    let commands = cx.commands;
    (next, commands)
}

/// Owning wrapper used by the pipeline.
#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    state: ControllerState,
}

impl Controller {
    pub fn new(config: ControllerConfig) -> Self {
        Controller { config, state: ControllerState::default() }
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn handle(&mut self, time: u64, event: &ControllerEvent) -> Transition {
        let t = step(&self.config, &mut self.state, time, event);
        if let Some(reason) = &t.illegal {
            log::warn!("ignored event in {:?}: {reason}", self.state.phase);
        }
        t
    }
}

fn step(config: &ControllerConfig, state: &mut ControllerState, time: u64, event: &ControllerEvent) -> Transition {
    let before = state.phase;
    let mut cx = Cx::new(state);
    cx.dispatch(config, time, event);
    let suggestions = suggestions_for(config, cx.st);
    if suggestions != cx.st.suggestions {
        cx.commands.push(if suggestions.is_empty() {
            InterfaceCommand::ClearSuggestions {}
        } else {
            InterfaceCommand::ShowSuggestions { utterances: suggestions.clone() }
        });
        cx.st.suggestions = suggestions;
    }
    let after = cx.st.phase;
    Transition {
        commands: cx.commands,
        requests: cx.requests,
        phase_change: (before != after).then(|| PhaseChange { from: before, to: after, event: event.clone() }),
        illegal: cx.illegal,
    }
}

struct Cx<'a> {
    st: &'a mut ControllerState,
    commands: Vec<InterfaceCommand>,
    requests: Vec<ServiceRequest>,
    illegal: Option<String>,
}

impl<'a> Cx<'a> {
    fn new(st: &'a mut ControllerState) -> Self {
        Cx { st, commands: Vec::new(), requests: Vec::new(), illegal: None }
    }

    fn reject(&mut self, what: impl Into<String>) {
        self.illegal = Some(what.into());
    }

    fn say(&mut self, text: impl Into<String>) {
        let text = text.into();
        let utterance_id = format!("u{}", self.st.next_utterance);
        self.st.next_utterance += 1;
        self.bubble(Side::System, text.clone());
        self.commands.push(InterfaceCommand::Speak { utterance_id, text });
    }

    fn bubble(&mut self, side: Side, text: String) {
        self.st.dialog_history.push(DialogTurn { side, text: text.clone() });
        self.commands.push(InterfaceCommand::AddChatBubble { side, text });
    }

    fn ask_llm(&mut self, template_id: &str, bindings: &[(&str, String)]) {
        let correlation = self.st.next_correlation;
        self.st.next_correlation += 1;
        self.st.awaiting = Some(correlation);
        self.requests.push(ServiceRequest::Llm {
            correlation,
            template_id: template_id.to_string(),
            bindings: bindings.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        });
    }

    fn set_vocabulary(&mut self, labels: Vec<String>) {
        if labels != self.st.vocabulary {
            self.st.vocabulary = labels.clone();
            self.requests.push(ServiceRequest::SetDetectionVocabulary { labels });
        }
    }

    fn dispatch(&mut self, config: &ControllerConfig, time: u64, event: &ControllerEvent) {
        if self.st.phase == Phase::Greeting {
            self.say(GREETING);
            self.st.phase = Phase::TaskSelection;
            if matches!(event, ControllerEvent::Tick { .. }) {
                return;
            }
        }
        match event {
            ControllerEvent::Tick { time: now } => self.expire_timers(*now),
            ControllerEvent::TimerExpired { id } => match self.st.active_timers.iter().find(|t| t.id == *id) {
                Some(t) => {
                    let now = t.expires_at;
                    self.expire_matching(now, |t| t.id == *id);
                }
                None => self.reject(format!("no active timer {id}")),
            },
            ControllerEvent::UiState { palm_open_up, panel_pose } => {
                if let Some(p) = palm_open_up {
                    self.st.palm_open_up = *p;
                }
                if let Some(p) = panel_pose {
                    self.st.panel_pose = Some(*p);
                }
            }
            ControllerEvent::SynthesisFinished { .. } => {}
            ControllerEvent::FinalUtterance { text } => self.on_utterance(config, time, text),
            ControllerEvent::ObjectFound { label, position, track_id } => {
                self.on_object(label, *position, *track_id);
            }
            ControllerEvent::LlmCompleted { correlation, text } => {
                if self.st.awaiting != Some(*correlation) {
                    return self.reject(format!("unexpected completion {correlation}"));
                }
                self.st.awaiting = None;
                self.on_llm(config, Ok(text));
            }
            ControllerEvent::LlmFailed { correlation, error } => {
                if self.st.awaiting != Some(*correlation) {
                    return self.reject(format!("unexpected failure {correlation}"));
                }
                self.st.awaiting = None;
                log::warn!("llm request {correlation} failed: {error}");
                self.on_llm(config, Err(error));
            }
        }
    }

    fn on_utterance(&mut self, config: &ControllerConfig, time: u64, text: &str) {
        let text = text.trim();
        if text.is_empty() {
            return self.reject("empty utterance");
        }
        self.bubble(Side::User, text.to_string());
        let norm = normalize_utterance(text);
        if is_come_here(&norm) && self.st.palm_open_up.any() {
            self.commands.push(InterfaceCommand::MovePanelToUser {});
            return;
        }
        match self.st.phase {
            Phase::TaskSelection => match config.mode {
                GuidanceMode::Library => {
                    let tasks = config.library.names().join("\n");
                    self.ask_llm(INTENT_RECOGNITION, &[("tasks", tasks), ("utterance", text.to_string())]);
                    self.st.phase = Phase::AwaitIntent;
                }
                GuidanceMode::Generated => {
                    self.st.requested_task = Some(text.to_string());
                    self.ask_llm(CONTEXT_QUESTIONS, &[("task", text.to_string())]);
                    self.st.phase = Phase::AwaitContextQuestions;
                }
            },
            Phase::ContextQuestions { index } => {
                self.st.context_answers.push(text.to_string());
                if index + 1 < self.st.context_questions.len() {
                    self.st.phase = Phase::ContextQuestions { index: index + 1 };
                    let q = self.st.context_questions[index + 1].clone();
                    self.say(q);
                } else {
                    self.request_recipe();
                }
            }
            Phase::Executing { cursor } => self.on_executing_utterance(time, cursor, text, &norm),
            _ => self.reject(format!("utterance {text:?} while waiting")),
        }
    }

    fn on_executing_utterance(&mut self, time: u64, cursor: StepCursor, text: &str, norm: &str) {
        let task = self.st.task.clone().expect("executing without a task");
        if let Step::Gather { objects, .. } = &task.steps[cursor.step] {
            let missing: Vec<String> = objects.iter().filter(|o| !self.st.gather_found.contains(*o)).cloned().collect();
            let declared: Vec<String> = declared_labels(norm, &missing).into_iter().cloned().collect();
            if !declared.is_empty() {
                for label in &declared {
                    self.st.gather_found.insert(label.clone());
                }
                self.say(format!("Okay, you have the {}.", declared.join(" and the ")));
                self.check_gather_complete(&task, cursor);
                return;
            }
            if is_completion(norm) {
                self.st.gather_found.extend(objects.iter().cloned());
                self.say(ALL_FOUND);
                return self.move_forward(&task, cursor);
            }
        } else if is_completion(norm) {
            return self.move_forward(&task, cursor);
        }
        if is_go_back(norm) {
            match task.previous_position(cursor) {
                Some(prev) => self.enter(&task, prev),
                None => self.say(FIRST_STEP),
            }
            return;
        }
        if is_start_timer(norm) {
            return self.start_timer(&task, cursor, time);
        }
        let step = task.instruction_at(cursor).unwrap_or_default().to_string();
        self.ask_llm(QUESTION_ANSWER, &[("task", task.name.clone()), ("step", step), ("utterance", text.to_string())]);
        self.st.phase = Phase::AwaitAnswer { cursor };
    }

    fn start_timer(&mut self, task: &TaskRecipe, cursor: StepCursor, time: u64) {
        let Some(duration_s) = task.duration_at(cursor) else {
            return self.say(NO_TIMER);
        };
        if !self.st.timed_positions.insert(cursor) {
            return self.say(TIMER_RUNNING);
        }
        let id = format!("timer-{}", self.st.next_timer);
        self.st.next_timer += 1;
        let display_pose = self.st.panel_pose.unwrap_or(DEFAULT_TIMER_POSE);
        self.st.active_timers.push(TimerState {
            id: id.clone(),
            position: cursor,
            duration_s,
            started_at: time,
            expires_at: time + (duration_s * 1e9).round() as u64,
        });
        self.commands.push(InterfaceCommand::StartTimer { id, timer: TimerSpec { duration_s, display_pose } });
        self.say(format!("Starting a timer for {}.", describe_duration(duration_s)));
    }

    fn expire_timers(&mut self, now: u64) {
        self.expire_matching(now, |_| true);
    }

    fn expire_matching(&mut self, now: u64, pick: impl Fn(&TimerState) -> bool) {
        let mut due: Vec<TimerState> =
            self.st.active_timers.iter().filter(|t| t.expires_at <= now && pick(t)).cloned().collect();
        if due.is_empty() {
            return;
        }
        due.sort_by(|a, b| (a.expires_at, &a.id).cmp(&(b.expires_at, &b.id)));
        self.st.active_timers.retain(|t| !due.iter().any(|d| d.id == t.id));
        for t in due {
            self.say(format!("Time's up! Your timer for {} has finished.", describe_duration(t.duration_s)));
            self.commands.push(InterfaceCommand::StopTimer { id: t.id });
        }
    }

    fn on_object(&mut self, label: &str, position: [f64; 3], track_id: u64) {
        self.st.seen_objects.insert(label.to_string(), SeenObject { track_id, position });
        let cursor = match self.st.phase {
            Phase::Executing { cursor } | Phase::AwaitAnswer { cursor } => cursor,
            _ => return,
        };
        let task = self.st.task.clone().expect("executing without a task");
        let Step::Gather { objects, .. } = &task.steps[cursor.step] else { return };
        if !objects.iter().any(|o| o == label) || self.st.gather_found.contains(label) {
            return;
        }
        self.st.gather_found.insert(label.to_string());
        self.commands.push(InterfaceCommand::ShowObjectLabel { track_id, label: label.to_string(), position });
        self.say(format!("I found the {label}."));
        if matches!(self.st.phase, Phase::Executing { .. }) {
            self.check_gather_complete(&task, cursor);
        } else {
            let missing = self.missing_objects(&task, cursor);
            self.set_vocabulary(missing);
        }
    }

    fn missing_objects(&self, task: &TaskRecipe, cursor: StepCursor) -> Vec<String> {
        match &task.steps[cursor.step] {
            Step::Gather { objects, .. } => {
                objects.iter().filter(|o| !self.st.gather_found.contains(*o)).cloned().collect()
            }
            _ => Vec::new(),
        }
    }

    fn check_gather_complete(&mut self, task: &TaskRecipe, cursor: StepCursor) {
        let missing = self.missing_objects(task, cursor);
        if missing.is_empty() {
            self.say(ALL_FOUND);
            self.move_forward(task, cursor);
        } else {
            self.set_vocabulary(missing);
        }
    }

    fn on_llm(&mut self, config: &ControllerConfig, result: Result<&String, &String>) {
        match self.st.phase {
            Phase::AwaitIntent => {
                let found = result.ok().and_then(|text| config.library.find(text.trim())).cloned();
                match found {
                    Some(task) => self.start_task(task),
                    None => {
                        self.say(UNKNOWN_TASK);
                        self.st.phase = Phase::TaskSelection;
                    }
                }
            }
            Phase::AwaitContextQuestions => {
                let questions = result
                    .ok()
                    .and_then(|text| validate_generated_recipe("questions", text).ok())
                    .map(|r| r.steps.iter().map(|s| s.instruction().to_string()).collect::<Vec<_>>())
                    .unwrap_or_default();
                self.st.context_questions = questions;
                self.st.context_answers.clear();
                if self.st.context_questions.is_empty() {
                    self.request_recipe();
                } else {
                    self.st.phase = Phase::ContextQuestions { index: 0 };
                    let q = self.st.context_questions[0].clone();
                    self.say(q);
                }
            }
            Phase::AwaitRecipe => {
                let name = self.st.requested_task.clone().unwrap_or_default();
                match result.ok().map(|text| validate_generated_recipe(&name, text)) {
                    Some(Ok(recipe)) => self.start_task(recipe),
                    Some(Err(e)) => {
                        log::warn!("generated recipe rejected: {e}");
                        self.say(NO_RECIPE);
                        self.st.phase = Phase::TaskSelection;
                    }
                    None => {
                        self.say(NO_RECIPE);
                        self.st.phase = Phase::TaskSelection;
                    }
                }
            }
            Phase::AwaitAnswer { cursor } => {
                self.st.phase = Phase::Executing { cursor };
                match result {
                    Ok(text) => {
                        if let Some(answer) = parse_question_answer(text) {
                            self.say(answer);
                        }
                    }
                    Err(_) => self.say(NO_ANSWER),
                }
                let task = self.st.task.clone().expect("executing without a task");
                if matches!(task.steps[cursor.step], Step::Gather { .. }) {
                    self.check_gather_complete(&task, cursor);
                }
            }
            _ => self.reject("completion outside a waiting phase"),
        }
    }

    fn request_recipe(&mut self) {
        let task = self.st.requested_task.clone().unwrap_or_default();
        let context: Vec<String> = self
            .st
            .context_questions
            .iter()
            .zip(&self.st.context_answers)
            .map(|(q, a)| format!("Q: {q}\nA: {a}"))
            .collect();
        let context = if context.is_empty() { "(none)".to_string() } else { context.join("\n") };
        self.ask_llm(RECIPE_GENERATION, &[("task", task), ("context", context)]);
        self.st.phase = Phase::AwaitRecipe;
    }

    fn start_task(&mut self, task: TaskRecipe) {
        self.say(format!("Okay, let's {}.", task.name));
        self.st.task = Some(task.clone());
        self.enter(&task, StepCursor::start());
    }

    fn panel(&mut self, task: &TaskRecipe, cursor: Option<StepCursor>) {
        let steps = task
            .steps
            .iter()
            .map(|s| PanelStep {
                instruction: s.instruction().to_string(),
                substeps: match s {
                    Step::Complex { substeps, .. } => substeps.iter().map(|k| k.instruction.clone()).collect(),
                    _ => Vec::new(),
                },
            })
            .collect();
        self.commands.push(InterfaceCommand::SetTaskPanel { task: task.name.clone(), steps, cursor });
    }

    fn remove_holograms(&mut self) {
        for id in std::mem::take(&mut self.st.placed_holograms) {
            self.commands.push(InterfaceCommand::RemoveHologram { id });
        }
    }

    fn enter(&mut self, task: &TaskRecipe, cursor: StepCursor) {
        self.remove_holograms();
        let leaving_gather = match self.st.phase {
            Phase::Executing { cursor: c } | Phase::AwaitAnswer { cursor: c } => c.step != cursor.step,
            _ => true,
        };
        self.st.phase = Phase::Executing { cursor };
        self.panel(task, Some(cursor));
        let instruction = task.instruction_at(cursor).unwrap_or_default().to_string();
        match &task.steps[cursor.step] {
            Step::Gather { objects, .. } => {
                if leaving_gather {
                    self.st.gather_found.clear();
                }
                self.say(instruction);
                let mut seen: Vec<(String, SeenObject)> = Vec::new();
                for label in objects {
                    if let Some(s) = self.st.seen_objects.get(label) {
                        if self.st.gather_found.insert(label.clone()) {
                            seen.push((label.clone(), s.clone()));
                        }
                    }
                }
                for (label, s) in seen {
                    self.commands.push(InterfaceCommand::ShowObjectLabel {
                        track_id: s.track_id,
                        label: label.clone(),
                        position: s.position,
                    });
                    self.say(format!("I found the {label}."));
                }
                self.check_gather_complete(task, cursor);
            }
            Step::Complex { .. } if cursor.substep.is_none() => {
                self.set_vocabulary(Vec::new());
                self.say(instruction);
                match task.next_position(cursor) {
                    Some(first) if first.step == cursor.step => self.enter(task, first),
                    _ => {}
                }
            }
            _ => {
                self.set_vocabulary(Vec::new());
                self.say(instruction);
                for (k, hologram) in task.holograms_at(cursor).iter().enumerate() {
                    let id = match cursor.substep {
                        Some(s) => format!("h-{}-{}-{k}", cursor.step, s),
                        None => format!("h-{}-{k}", cursor.step),
                    };
                    self.st.placed_holograms.push(id.clone());
                    self.commands.push(InterfaceCommand::PlaceHologram { id, hologram: hologram.clone() });
                }
            }
        }
    }

    fn move_forward(&mut self, task: &TaskRecipe, cursor: StepCursor) {
        match task.next_position(cursor) {
            Some(next) => self.enter(task, next),
            None => self.finish(task),
        }
    }

    fn finish(&mut self, task: &TaskRecipe) {
        self.remove_holograms();
        self.set_vocabulary(Vec::new());
        for t in std::mem::take(&mut self.st.active_timers) {
            self.commands.push(InterfaceCommand::StopTimer { id: t.id });
        }
        self.st.phase = Phase::TaskComplete;
        self.panel(task, None);
        self.say(FINISHED);
    }
}
