//! Drives the dialog controller through the start of the coffee recipe by
//! hand, answering its language-model requests inline.

use taskguide::controller::{
    advance, ControllerConfig, ControllerEvent, ControllerState, GuidanceMode, InterfaceCommand, ServiceRequest,
};
use taskguide::task::TaskLibrary;

fn main() {
    let library = TaskLibrary::from_json(include_str!("../assets/tasks.json")).unwrap();
    let config = ControllerConfig { mode: GuidanceMode::Library, library };
    let mut state = ControllerState::default();
    let mut time = 0;
    let mut pending = Vec::new();

    let mut send = |event: ControllerEvent, state: &mut ControllerState, pending: &mut Vec<ServiceRequest>| {
        time += 1_000_000_000;
        let (next, t) = advance(&config, state, time, &event);
        *state = next;
        for c in &t.commands {
            match c {
                InterfaceCommand::Speak { text, .. } => println!("guide: {text}"),
                InterfaceCommand::ShowSuggestions { utterances } => println!("       suggestions {utterances:?}"),
                _ => {}
            }
        }
        *pending = t.requests;
    };

    send(ControllerEvent::Tick { time: 0 }, &mut state, &mut pending);
    let script = ["help me make coffee", "I have the mug", "I have the kettle", "I have the filter", "done", "done"];
    for line in script {
        println!("user:  {line}");
        send(ControllerEvent::FinalUtterance { text: line.into() }, &mut state, &mut pending);
        // The only model call here picks the task from the utterance.
        for r in std::mem::take(&mut pending) {
            if let ServiceRequest::Llm { correlation, .. } = r {
                send(
                    ControllerEvent::LlmCompleted { correlation, text: "make coffee".into() },
                    &mut state,
                    &mut pending,
                );
            }
        }
    }
    println!("phase: {:?}", state.phase);
}
