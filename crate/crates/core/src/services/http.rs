use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::ServiceError;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Blocking JSON-over-HTTP POST client shared by the HTTP backends.
#[derive(Debug, Clone)]
pub(crate) struct JsonClient {
    agent: ureq::Agent,
    base_url: String,
}

impl JsonClient {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder().http_status_as_error(false).timeout_global(Some(timeout)).build();
        JsonClient { agent: ureq::Agent::new_with_config(config), base_url: base_url.trim_end_matches('/').to_string() }
    }

    pub fn post<Q: Serialize, R: DeserializeOwned>(&self, path: &str, body: &Q) -> Result<R, ServiceError> {
        let bytes = serde_json::to_vec(body).map_err(|e| ServiceError::InvalidRequest(e.to_string()))?;
        let url = format!("{}{}", self.base_url, path);
        let mut resp = self
            .agent
            .post(&url)
            .header("content-type", "application/json")
            .send(&bytes[..])
            .map_err(transport_error)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().with_config().limit(64 << 20).read_to_string().map_err(transport_error)?;
        if !(200..300).contains(&status) {
            return Err(ServiceError::BackendError { status, body: text });
        }
        serde_json::from_str(&text)
            .map_err(|e| ServiceError::BackendError { status, body: format!("unreadable response ({e}): {text}") })
    }
}

fn transport_error(e: ureq::Error) -> ServiceError {
    match e {
        ureq::Error::Timeout(_) => ServiceError::BackendTimeout,
        ureq::Error::Io(io) if matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) => {
            ServiceError::BackendTimeout
        }
        other => ServiceError::BackendError { status: 0, body: other.to_string() },
    }
}
