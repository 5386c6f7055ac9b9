//! Starts the HTTP stub that stands in for the language-model, detector and
//! speech services, then talks to it through the regular HTTP clients.

use std::collections::BTreeMap;
use std::time::Duration;

use taskguide::services::prompts::QUESTION_DETECTION;
use taskguide::services::{
    HttpLlm, HttpSpeech, LlmBackend, LlmQuery, MockFixtures, PromptLibrary, RecognizedText, SpeechBackend, StubConfig,
    StubServer,
};

fn main() {
    let bindings = BTreeMap::from([("utterance".to_string(), "where is the filter".to_string())]);
    let mut fixtures = MockFixtures::default();
    fixtures.insert(QUESTION_DETECTION, &bindings, "QUESTION: yes");
    let config = StubConfig {
        fixtures,
        asr_script: vec![
            RecognizedText::Partial { text: "where is".into() },
            RecognizedText::Final { text: "where is the filter".into() },
        ],
        ..StubConfig::default()
    };
    let server = StubServer::start("127.0.0.1:0", config).unwrap();
    println!("stub on {}", server.url());

    let llm = HttpLlm::new(&server.url(), Duration::from_secs(5));
    let query = LlmQuery::new(&PromptLibrary::builtin(), 1, QUESTION_DETECTION, bindings).unwrap();
    println!("prompt:\n{}\n", query.prompt);
    let reply = llm.complete(&query).unwrap();
    println!("reply from {}: {:?}", reply.backend, reply.text);

    let asr = HttpSpeech::new(&server.url(), Duration::from_secs(5));
    let silence = vec![0.0f32; 1600];
    for i in 0..3u64 {
        for event in asr.on_audio(&silence, i * 100_000_000).unwrap() {
            println!("speech: {event:?}");
        }
    }
}
