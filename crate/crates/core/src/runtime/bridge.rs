//! Websocket bridge for the operator UI.
//!
//! Server to UI, one JSON text message per interface command:
//! `{"type": "command", "time": <ns>, "command": InterfaceCommand}`, and
//! `{"type": "error", "message": "..."}` in reply to a rejected UI message.
//!
//! UI to server, exactly one key per message:
//! `{"utterance": "text"}`, `{"step_done": {}}`, `{"declare_object": "label"}`,
//! `{"move_panel": [16 numbers, row-major]}`, `{"palm_open": true}`.
//!
//! At most one UI is connected; further handshakes get HTTP 409.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver, Sender};
use serde::{Deserialize, Serialize};
use tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tungstenite::{Message, WebSocket};

use super::streams::{UI_STATE_STREAM, UI_TEXT_STREAM};
use crate::controller::{InterfaceState, PalmState};
use crate::wire::{StreamId, TextInputPayload};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum UiMessage {
    Utterance(String),
    StepDone {},
    DeclareObject(String),
    MovePanel([f64; 16]),
    PalmOpen(bool),
}

impl UiMessage {
    pub fn parse(text: &str) -> Result<UiMessage, String> {
        let msg: UiMessage = serde_json::from_str(text).map_err(|e| e.to_string())?;
        match &msg {
            UiMessage::Utterance(t) | UiMessage::DeclareObject(t) if t.trim().is_empty() => {
                Err("text must not be empty".into())
            }
            UiMessage::MovePanel(m) if m.iter().any(|v| !v.is_finite()) => Err("pose must be finite".into()),
            _ => Ok(msg),
        }
    }

    /// Stream and payload of the envelope this message becomes.
    pub fn to_input(&self) -> (StreamId, Vec<u8>) {
        let text = |t: String| (UI_TEXT_STREAM, TextInputPayload { text: t }.encode());
        let state = |s: InterfaceState| (UI_STATE_STREAM, s.to_payload());
        match self {
            UiMessage::Utterance(t) => text(t.clone()),
            UiMessage::StepDone {} => text("done".into()),
            UiMessage::DeclareObject(label) => text(format!("I have the {label}")),
            UiMessage::MovePanel(pose) => state(InterfaceState { panel_pose: Some(*pose), ..Default::default() }),
            UiMessage::PalmOpen(open) => state(InterfaceState {
                palm_open_up: Some(PalmState { left: *open, right: *open }),
                ..Default::default()
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UiEvent {
    Connected,
    Message(UiMessage),
    Disconnected,
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Outbound<'a> {
    Command { time: u64, command: serde_json::Value },
    Error { message: &'a str },
}

pub struct WsBridge {
    addr: SocketAddr,
    events: Receiver<UiEvent>,
    outbound: Sender<String>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl WsBridge {
    pub fn start(listen: &str) -> io::Result<WsBridge> {
        let listener = TcpListener::bind(listen)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let (ev_tx, events) = unbounded();
        let (outbound, out_rx) = unbounded();
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let thread =
            std::thread::Builder::new().name("ws-bridge".into()).spawn(move || serve(listener, ev_tx, out_rx, flag))?;
        Ok(WsBridge { addr, events, outbound, stop, thread: Some(thread) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn events(&self) -> &Receiver<UiEvent> {
        &self.events
    }

    /// Mirrors one interface command (its JSON payload) to the UI, if one is connected.
    pub fn send_command(&self, time: u64, payload: &[u8]) {
        let Ok(command) = serde_json::from_slice(payload) else { return };
        let msg = serde_json::to_string(&Outbound::Command { time, command }).expect("serializes");
        let _ = self.outbound.send(msg);
    }
}

impl Drop for WsBridge {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn error_message(message: &str) -> String {
    serde_json::to_string(&Outbound::Error { message }).expect("serializes")
}

// The callback signature is fixed by tungstenite.
#[allow(clippy::result_large_err)]
fn reject_busy(stream: TcpStream) {
    let _ = stream.set_nonblocking(false);
    let _ = stream.set_read_timeout(Some(Duration::from_secs(2)));
    let callback = |_: &Request, _: Response| -> Result<Response, ErrorResponse> {
        let mut resp = ErrorResponse::new(Some("another UI session is active".into()));
        *resp.status_mut() = tungstenite::http::StatusCode::CONFLICT;
        Err(resp)
    };
    let _ = tungstenite::accept_hdr(stream, callback);
}

fn open(stream: TcpStream) -> Option<WebSocket<TcpStream>> {
    stream.set_nonblocking(false).ok()?;
    stream.set_nodelay(true).ok()?;
    stream.set_read_timeout(Some(Duration::from_secs(2))).ok()?;
    let ws = tungstenite::accept(stream).map_err(|e| log::warn!("websocket handshake failed: {e}")).ok()?;
    ws.get_ref().set_read_timeout(Some(Duration::from_millis(5))).ok()?;
    Some(ws)
}

fn serve(listener: TcpListener, events: Sender<UiEvent>, outbound: Receiver<String>, stop: Arc<AtomicBool>) {
    let mut client: Option<WebSocket<TcpStream>> = None;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) if client.is_some() => {
                log::warn!("rejecting second UI connection from {peer}");
                reject_busy(stream);
            }
            Ok((stream, peer)) => {
                if let Some(ws) = open(stream) {
                    log::info!("UI connected from {peer}");
                    // Commands produced while nobody was listening are not replayed.
                    while outbound.try_recv().is_ok() {}
                    client = Some(ws);
                    let _ = events.send(UiEvent::Connected);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {}
            Err(e) => log::warn!("bridge accept failed: {e}"),
        }
        let Some(ws) = client.as_mut() else {
            std::thread::sleep(Duration::from_millis(5));
            continue;
        };
        let mut alive = true;
        match ws.read() {
            Ok(Message::Text(text)) => match UiMessage::parse(&text) {
                Ok(m) => {
                    let _ = events.send(UiEvent::Message(m));
                }
                Err(e) => alive = ws.send(Message::Text(error_message(&format!("invalid message: {e}")))).is_ok(),
            },
            Ok(Message::Binary(_)) => {
                alive = ws.send(Message::Text(error_message("binary messages are not supported"))).is_ok()
            }
            Ok(Message::Close(_)) => alive = false,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => {
                log::info!("UI connection ended: {e}");
                alive = false;
            }
        }
        while alive {
            match outbound.try_recv() {
                Ok(msg) => alive = ws.send(Message::Text(msg)).is_ok(),
                Err(_) => break,
            }
        }
        if !alive {
            client = None;
            let _ = events.send(UiEvent::Disconnected);
        }
    }
    if let Some(mut ws) = client {
        let _ = ws.close(None);
        let _ = ws.flush();
    }
}
