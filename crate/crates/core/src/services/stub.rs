//! In-process HTTP server answering the three service endpoints from
//! fixtures, for integration tests and local runs without real models.

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::Serialize;

use super::detect::{DetectBody, DetectReply};
use super::llm::{LlmQuery, MockFixtures};
use super::speech::{RecognizedText, TranscribeBody, TranscribeReply};
use crate::geometry::{CameraModel, Pose, Scene};

#[derive(Debug, Clone, Default)]
pub struct StubConfig {
    pub fixtures: MockFixtures,
    pub scene: Scene,
    /// Each `/transcribe` call returns the next scripted event (or none once
    /// the script is exhausted).
    pub asr_script: Vec<RecognizedText>,
    /// Delay before answering `/complete`.
    pub complete_delay: Duration,
}

struct Shared {
    fixtures: MockFixtures,
    scene: Scene,
    asr_script: Mutex<VecDeque<RecognizedText>>,
    complete_delay: Duration,
}

pub struct StubServer {
    server: Arc<tiny_http::Server>,
    addr: SocketAddr,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(listen: &str, config: StubConfig) -> std::io::Result<StubServer> {
        let server = tiny_http::Server::http(listen).map_err(std::io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("stub server is not bound to an IP address"))?;
        let server = Arc::new(server);
        let shared = Arc::new(Shared {
            fixtures: config.fixtures,
            scene: config.scene,
            asr_script: Mutex::new(config.asr_script.into()),
            complete_delay: config.complete_delay,
        });
        let accept = Arc::clone(&server);
        let handle = std::thread::Builder::new().name("stub-http".into()).spawn(move || {
            for request in accept.incoming_requests() {
                let shared = Arc::clone(&shared);
                std::thread::spawn(move || handle_request(&shared, request));
            }
        })?;
        Ok(StubServer { server, addr, handle: Some(handle) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the accept loop ends.
    pub fn wait(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn handle_request(shared: &Shared, mut request: tiny_http::Request) {
    let mut body = Vec::new();
    if let Err(e) = request.as_reader().read_to_end(&mut body) {
        log::warn!("stub: failed to read request body: {e}");
        return;
    }
    let is_post = *request.method() == tiny_http::Method::Post;
    let (status, text) = match (is_post, request.url()) {
        (true, "/complete") => complete(shared, &body),
        (true, "/detect") => detect(shared, &body),
        (true, "/transcribe") => transcribe(shared, &body),
        _ => (404, "{\"error\":\"not found\"}".to_string()),
    };
    let header = tiny_http::Header::from_bytes(&b"content-type"[..], &b"application/json"[..]).expect("static header");
    let response = tiny_http::Response::from_string(text).with_status_code(status).with_header(header);
    if let Err(e) = request.respond(response) {
        log::debug!("stub: client went away: {e}");
    }
}

fn json<T: Serialize>(value: &T) -> (u16, String) {
    (200, serde_json::to_string(value).expect("reply serializes"))
}

fn bad_request(e: impl std::fmt::Display) -> (u16, String) {
    (400, serde_json::json!({ "error": e.to_string() }).to_string())
}

fn complete(shared: &Shared, body: &[u8]) -> (u16, String) {
    let query: LlmQuery = match serde_json::from_slice(body) {
        Ok(q) => q,
        Err(e) => return bad_request(e),
    };
    if !shared.complete_delay.is_zero() {
        std::thread::sleep(shared.complete_delay);
    }
    json(&serde_json::json!({ "text": shared.fixtures.lookup(&query.template_id, &query.bindings) }))
}

fn detect(shared: &Shared, body: &[u8]) -> (u16, String) {
    let req: DetectBody = match serde_json::from_slice(body) {
        Ok(r) => r,
        Err(e) => return bad_request(e),
    };
    let camera = CameraModel {
        fx: req.intrinsics.fx,
        fy: req.intrinsics.fy,
        cx: req.intrinsics.cx,
        cy: req.intrinsics.cy,
        width: req.width,
        height: req.height,
    };
    if let Err(e) = camera.validate() {
        return bad_request(e);
    }
    let masks = shared.scene.render_masks(&camera, &Pose::from_wire(&req.extrinsics), &req.vocabulary);
    json(&DetectReply { masks })
}

fn transcribe(shared: &Shared, body: &[u8]) -> (u16, String) {
    if let Err(e) = serde_json::from_slice::<TranscribeBody>(body) {
        return bad_request(e);
    }
    let next = shared.asr_script.lock().expect("asr script poisoned").pop_front();
    json(&TranscribeReply { events: next.into_iter().collect() })
}
