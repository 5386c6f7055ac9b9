use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::http::JsonClient;
use super::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpeechEvent {
    Partial { text: String, time: u64 },
    Final { text: String, time: u64 },
}

impl SpeechEvent {
    pub fn text(&self) -> &str {
        match self {
            SpeechEvent::Partial { text, .. } | SpeechEvent::Final { text, .. } => text,
        }
    }

    pub fn is_final(&self) -> bool {
        matches!(self, SpeechEvent::Final { .. })
    }
}

pub trait SpeechBackend: Send + Sync {
    fn id(&self) -> &str;

    /// Whether audio envelopes should be forwarded to [`SpeechBackend::on_audio`].
    fn consumes_audio(&self) -> bool;

    /// Typed input is taken as an already-recognized final utterance.
    fn on_text(&self, text: &str, time: u64) -> Vec<SpeechEvent> {
        vec![SpeechEvent::Final { text: text.to_string(), time }]
    }

    fn on_audio(&self, samples: &[f32], time: u64) -> Result<Vec<SpeechEvent>, ServiceError>;
}

/// Ignores audio; every text input becomes one final result.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockSpeech;

impl SpeechBackend for MockSpeech {
    fn id(&self) -> &str {
        "mock"
    }

    fn consumes_audio(&self) -> bool {
        false
    }

    fn on_audio(&self, _samples: &[f32], _time: u64) -> Result<Vec<SpeechEvent>, ServiceError> {
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct TranscribeBody {
    pub sample_rate: u32,
    pub samples_f32le_base64: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RecognizedText {
    Partial { text: String },
    Final { text: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct TranscribeReply {
    pub events: Vec<RecognizedText>,
}

/// Sends each audio buffer to `POST /transcribe` and relays the returned
/// events, stamped with the buffer's originating time.
#[derive(Debug, Clone)]
pub struct HttpSpeech {
    client: JsonClient,
}

impl HttpSpeech {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        HttpSpeech { client: JsonClient::new(base_url, timeout) }
    }
}

impl SpeechBackend for HttpSpeech {
    fn id(&self) -> &str {
        "http"
    }

    fn consumes_audio(&self) -> bool {
        true
    }

    fn on_audio(&self, samples: &[f32], time: u64) -> Result<Vec<SpeechEvent>, ServiceError> {
        let bytes: Vec<u8> = samples.iter().flat_map(|s| s.to_le_bytes()).collect();
        let body = TranscribeBody {
            sample_rate: crate::wire::AUDIO_SAMPLE_RATE,
            samples_f32le_base64: base64::engine::general_purpose::STANDARD.encode(bytes),
        };
        let reply: TranscribeReply = self.client.post("/transcribe", &body)?;
        Ok(reply
            .events
            .into_iter()
            .map(|e| match e {
                RecognizedText::Partial { text } => SpeechEvent::Partial { text, time },
                RecognizedText::Final { text } => SpeechEvent::Final { text, time },
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_passes_text_through_in_order() {
        let s = MockSpeech;
        let mut events = s.on_text("next step", 10);
        events.extend(s.on_text("done", 20));
        assert_eq!(
            events,
            vec![
                SpeechEvent::Final { text: "next step".into(), time: 10 },
                SpeechEvent::Final { text: "done".into(), time: 20 }
            ]
        );
        assert!(s.on_audio(&[0.0; 1600], 0).unwrap().is_empty());
    }
}
