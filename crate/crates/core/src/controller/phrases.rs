use super::{ControllerConfig, ControllerState, Phase};
use crate::task::Step;

pub const COMPLETION_PHRASES: [&str; 5] = ["done", "next", "next step", "finished", "ok done"];
const GO_BACK: &str = "go back";
const START_TIMER: [&str; 2] = ["start the timer", "start timer"];
const COME_HERE: &str = "come here";
const DECLARATION_CUES: [&str; 2] = ["i have", "found the"];

/// Lowercases, drops everything except letters, digits and whitespace, and
/// collapses whitespace runs to single spaces.
pub fn normalize_utterance(text: &str) -> String {
    let kept: String =
        text.chars().filter(|c| c.is_alphanumeric() || c.is_whitespace()).flat_map(char::to_lowercase).collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub(crate) fn is_completion(norm: &str) -> bool {
    COMPLETION_PHRASES.contains(&norm)
}

pub(crate) fn is_go_back(norm: &str) -> bool {
    norm == GO_BACK
}

pub(crate) fn is_start_timer(norm: &str) -> bool {
    START_TIMER.contains(&norm)
}

pub(crate) fn is_come_here(norm: &str) -> bool {
    norm == COME_HERE
}

fn contains_phrase(norm: &str, phrase: &str) -> bool {
    format!(" {norm} ").contains(&format!(" {phrase} "))
}

/// Labels from `missing` that the utterance declares as available.
pub(crate) fn declared_labels<'a>(norm: &str, missing: &'a [String]) -> Vec<&'a String> {
    if !DECLARATION_CUES.iter().any(|cue| contains_phrase(norm, cue)) {
        return Vec::new();
    }
    missing.iter().filter(|label| contains_phrase(norm, &normalize_utterance(label))).collect()
}

/// Reads a `QUESTION: yes|no` / `ANSWER: …` response. Returns the answer
/// when the utterance was a question with a non-empty answer.
pub fn parse_question_answer(response: &str) -> Option<String> {
    let mut lines = response.lines().map(str::trim).filter(|l| !l.is_empty());
    let first = lines.next()?;
    let verdict = strip_label(first, "QUESTION:")?;
    if !verdict.trim().eq_ignore_ascii_case("yes") {
        return None;
    }
    let rest: Vec<&str> = lines.collect();
    let (head, tail) = rest.split_first()?;
    let mut answer = strip_label(head, "ANSWER:")?.trim().to_string();
    for line in tail {
        answer.push(' ');
        answer.push_str(line);
    }
    (!answer.is_empty()).then_some(answer)
}

fn strip_label<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let head = line.get(..label.len())?;
    head.eq_ignore_ascii_case(label).then(|| &line[label.len()..])
}

pub(crate) fn describe_duration(seconds: f64) -> String {
    let total = seconds.round().max(0.0) as u64;
    let unit = |n: u64, word: &str| if n == 1 { format!("1 {word}") } else { format!("{n} {word}s") };
    match (total / 60, total % 60) {
        (0, s) => unit(s, "second"),
        (m, 0) => unit(m, "minute"),
        (m, s) => format!("{} and {}", unit(m, "minute"), unit(s, "second")),
    }
}

/// At most three example utterances for the current phase.
pub fn suggestions_for(config: &ControllerConfig, state: &ControllerState) -> Vec<String> {
    let mut out = Vec::new();
    match state.phase {
        Phase::TaskSelection => {
            for name in config.library.names().into_iter().take(3) {
                if name.split_whitespace().count() > 1 {
                    out.push(format!("Help me {name}"));
                } else {
                    out.push(format!("Help me make {name}"));
                }
            }
        }
        Phase::Executing { cursor } => {
            let Some(task) = &state.task else { return out };
            match (&task.steps[cursor.step], cursor.substep) {
                (Step::Gather { objects, .. }, _) => {
                    if let Some(first) = objects.iter().find(|o| !state.gather_found.contains(*o)) {
                        out.push(format!("I have the {first}"));
                    }
                }
                _ => {
                    out.push("Done".to_string());
                    if task.duration_at(cursor).is_some() && !state.timed_positions.contains(&cursor) {
                        out.push("Start the timer".to_string());
                    }
                }
            }
            if out.len() < 3 && task.previous_position(cursor).is_some() {
                out.push("Go back".to_string());
            }
        }
        _ => {}
    }
    out.truncate(3);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{LibrarySource, TaskLibrary, TaskRecipe};

    #[test]
    fn normalization() {
        assert_eq!(normalize_utterance("  OK, done!  "), "ok done");
        assert_eq!(normalize_utterance("Next   step."), "next step");
        assert_eq!(normalize_utterance("Come here!"), "come here");
    }

    #[test]
    fn declarations_need_a_cue_and_a_missing_label() {
        let missing = vec!["filter".to_string(), "coffee beans".to_string()];
        assert_eq!(declared_labels("i have the filter", &missing), vec![&missing[0]]);
        assert_eq!(declared_labels("found the coffee beans", &missing), vec![&missing[1]]);
        assert!(declared_labels("where is the filter", &missing).is_empty());
        assert!(declared_labels("i have the filters", &missing).is_empty());
    }

    #[test]
    fn question_answer_format() {
        assert_eq!(
            parse_question_answer("QUESTION: yes\nANSWER: Wait for the click."),
            Some("Wait for the click.".into())
        );
        assert_eq!(parse_question_answer("question: YES\n\nanswer: a\nb"), Some("a b".into()));
        assert_eq!(parse_question_answer("QUESTION: no"), None);
        assert_eq!(parse_question_answer("QUESTION: yes"), None);
        assert_eq!(parse_question_answer("MOCK-UNKNOWN"), None);
    }

    #[test]
    fn durations() {
        assert_eq!(describe_duration(10.0), "10 seconds");
        assert_eq!(describe_duration(1.0), "1 second");
        assert_eq!(describe_duration(120.0), "2 minutes");
        assert_eq!(describe_duration(90.0), "1 minute and 30 seconds");
    }

    #[test]
    fn task_selection_suggestions_fill_template() {
        let task = |name: &str| TaskRecipe { name: name.into(), steps: vec![] };
        let config = ControllerConfig {
            mode: Default::default(),
            library: TaskLibrary::new(vec![task("coffee"), task("tea")], LibrarySource::Library),
        };
        let state = ControllerState { phase: Phase::TaskSelection, ..Default::default() };
        assert_eq!(suggestions_for(&config, &state), vec!["Help me make coffee", "Help me make tea"]);
    }
}
