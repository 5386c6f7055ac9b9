use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::http::JsonClient;
use super::prompts::{bindings_hash, Bindings, PromptLibrary};
use super::ServiceError;

/// Answer of the mock backend for queries without a fixture.
pub const MOCK_UNKNOWN: &str = "MOCK-UNKNOWN";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmQuery {
    pub correlation: u64,
    pub template_id: String,
    pub bindings: Bindings,
    pub prompt: String,
}

impl LlmQuery {
    /// Renders `template_id` from `library`; fails on missing or unknown slots.
    pub fn new(
        library: &PromptLibrary,
        correlation: u64,
        template_id: &str,
        bindings: Bindings,
    ) -> Result<Self, ServiceError> {
        let prompt = library.render(template_id, &bindings)?;
        Ok(LlmQuery { correlation, template_id: template_id.to_string(), bindings, prompt })
    }

    pub fn fixture_key(&self) -> String {
        MockFixtures::key(&self.template_id, &self.bindings)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub correlation: u64,
    pub text: String,
    pub latency_ms: u64,
    pub backend: String,
}

pub trait LlmBackend: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, query: &LlmQuery) -> Result<LlmResponse, ServiceError>;
}

/// Fixture table mapping `"template_id:bindings_hash"` to response text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MockFixtures(pub BTreeMap<String, String>);

impl MockFixtures {
    pub fn key(template_id: &str, bindings: &Bindings) -> String {
        format!("{template_id}:{}", bindings_hash(bindings))
    }

    pub fn from_json(text: &str) -> Result<Self, ServiceError> {
        serde_json::from_str(text).map_err(|e| ServiceError::InvalidRequest(format!("fixture file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::InvalidRequest(format!("fixture file {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn insert(&mut self, template_id: &str, bindings: &Bindings, text: impl Into<String>) {
        self.0.insert(Self::key(template_id, bindings), text.into());
    }

    pub fn lookup(&self, template_id: &str, bindings: &Bindings) -> &str {
        self.0.get(&Self::key(template_id, bindings)).map_or(MOCK_UNKNOWN, String::as_str)
    }
}

#[derive(Debug, Clone, Default)]
pub struct MockLlm {
    fixtures: MockFixtures,
}

impl MockLlm {
    pub fn new(fixtures: MockFixtures) -> Self {
        MockLlm { fixtures }
    }
}

impl LlmBackend for MockLlm {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, query: &LlmQuery) -> Result<LlmResponse, ServiceError> {
        Ok(LlmResponse {
            correlation: query.correlation,
            text: self.fixtures.lookup(&query.template_id, &query.bindings).to_string(),
            latency_ms: 0,
            backend: "mock".into(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct HttpLlm {
    client: JsonClient,
}

#[derive(Deserialize)]
struct CompleteReply {
    text: String,
}

impl HttpLlm {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        HttpLlm { client: JsonClient::new(base_url, timeout) }
    }
}

impl LlmBackend for HttpLlm {
    fn id(&self) -> &str {
        "http"
    }

    fn complete(&self, query: &LlmQuery) -> Result<LlmResponse, ServiceError> {
        let start = Instant::now();
        let reply: CompleteReply = self.client.post("/complete", query)?;
        Ok(LlmResponse {
            correlation: query.correlation,
            text: reply.text,
            latency_ms: start.elapsed().as_millis() as u64,
            backend: "http".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_looks_up_fixture_or_falls_back() {
        let lib = PromptLibrary::builtin();
        let bindings: Bindings = [("task".to_string(), "make coffee".to_string())].into();
        let mut fixtures = MockFixtures::default();
        fixtures.insert("context_questions", &bindings, "1. Do you have a kettle?");
        let llm = MockLlm::new(fixtures);
        let q = LlmQuery::new(&lib, 7, "context_questions", bindings).unwrap();
        let r = llm.complete(&q).unwrap();
        assert_eq!((r.correlation, r.text.as_str()), (7, "1. Do you have a kettle?"));
        let other: Bindings = [("task".to_string(), "make tea".to_string())].into();
        let q = LlmQuery::new(&lib, 8, "context_questions", other).unwrap();
        assert_eq!(llm.complete(&q).unwrap().text, MOCK_UNKNOWN);
    }

    #[test]
    fn query_rendering_rejects_bad_bindings() {
        let lib = PromptLibrary::builtin();
        assert_eq!(
            LlmQuery::new(&lib, 1, "context_questions", Bindings::new()),
            Err(ServiceError::MissingSlot("task".into()))
        );
        assert!(matches!(LlmQuery::new(&lib, 1, "nope", Bindings::new()), Err(ServiceError::UnknownTemplate(_))));
    }
}
