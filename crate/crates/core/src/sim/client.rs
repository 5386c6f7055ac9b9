//! Lock-step scenario player.
//!
//! Virtual time drives everything. Envelopes sharing an originating time are
//! sent in stream-id order, followed by a `Sync` barrier; the next group is
//! sent only after the server's `SyncAck`, by which point every command the
//! group caused has arrived. Replies to those commands (speech-synthesis
//! progress, panel pose) are therefore scheduled at times that depend only on
//! the scenario, which keeps whole sessions reproducible.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::{self, BufWriter, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};
use nalgebra::Vector3;
use thiserror::Error;

use super::sensors::{client_manifest, periodic_streams, sample_times, SensorRig, STATE_STREAM, TEXT_STREAM};
use super::ui::UiModel;
use super::{Action, Scenario};
use crate::controller::{InterfaceCommand, InterfaceState, PalmState, SynthesisEvent, SynthesisPhase};
use crate::geometry::{Pose, DEFAULT_MAX_RANGE_MM};
use crate::runtime::streams::COMMAND_STREAM;
use crate::store::Pacing;
use crate::wire::{encode_envelope, ControlMessage, FrameReader, SensorEnvelope, StreamId, TextInputPayload};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cannot connect to {addr}: {source}")]
    ConnectFailure { addr: String, source: io::Error },
    #[error("connection lost: {0}")]
    ConnectionLost(String),
    #[error("server did not acknowledge sync {0} in time")]
    AckTimeout(u64),
    #[error(transparent)]
    Scenario(#[from] super::ScenarioError),
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub pacing: Pacing,
    /// How long to keep retrying the initial connection.
    pub connect_timeout: Duration,
    pub ack_timeout: Duration,
    pub max_range_mm: u16,
    pub session_id: Option<uuid::Uuid>,
    /// Originating time zero in microseconds since the Unix epoch; defaults to now.
    pub epoch_utc: Option<u64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            pacing: Pacing::AsFast,
            connect_timeout: Duration::from_secs(5),
            ack_timeout: Duration::from_secs(30),
            max_range_mm: DEFAULT_MAX_RANGE_MM,
            session_id: None,
            epoch_utc: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionReport {
    pub session_id: uuid::Uuid,
    pub sent: BTreeMap<StreamId, u64>,
    pub commands: Vec<(u64, InterfaceCommand)>,
    pub ui: UiModel,
    pub wall: Duration,
}

enum FromServer {
    Command(u64, InterfaceCommand),
    Ack(u64),
    Closed(Option<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Item {
    Periodic,
    Text(String),
}

fn connect(addr: &str, timeout: Duration) -> Result<TcpStream, SimError> {
    let deadline = Instant::now() + timeout;
    loop {
        let attempt = addr
            .to_socket_addrs()
            .and_then(|mut a| a.next().ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, "no address")))
            .and_then(|a| TcpStream::connect_timeout(&a, Duration::from_secs(1)));
        match attempt {
            Ok(s) => return Ok(s),
            Err(e) if Instant::now() >= deadline => {
                return Err(SimError::ConnectFailure { addr: addr.to_string(), source: e })
            }
            Err(_) => std::thread::sleep(Duration::from_millis(50)),
        }
    }
}

fn read_server(stream: TcpStream, tx: Sender<FromServer>) {
    let mut reader = FrameReader::new(io::BufReader::new(stream));
    let closed = loop {
        match reader.next_frame() {
            Ok(Some(env)) if env.stream_id == COMMAND_STREAM => match serde_json::from_slice(&env.payload) {
                Ok(cmd) => {
                    let _ = tx.send(FromServer::Command(env.originating_time, cmd));
                }
                Err(e) => break Some(format!("undecodable command: {e}")),
            },
            Ok(Some(env)) if env.stream_id.is_control() => {
                if let Ok(ControlMessage::SyncAck { seq }) = ControlMessage::from_payload(&env.payload) {
                    let _ = tx.send(FromServer::Ack(seq));
                }
            }
            Ok(Some(_)) => {}
            Ok(None) => break None,
            Err(e) => break Some(e.to_string()),
        }
    };
    let _ = tx.send(FromServer::Closed(closed));
}

struct Player<'a> {
    scenario: &'a Scenario,
    rig: SensorRig<'a>,
    queue: BinaryHeap<Reverse<(u64, StreamId, Item)>>,
    /// Interface-state replies keyed by the time they are due.
    replies: BTreeMap<u64, InterfaceState>,
    ui: UiModel,
    commands: Vec<(u64, InterfaceCommand)>,
    now: u64,
}

impl Player<'_> {
    fn reply_at(&mut self, wanted: u64) -> &mut InterfaceState {
        self.replies.entry(wanted.max(self.now + 1)).or_default()
    }

    fn on_command(&mut self, time: u64, cmd: InterfaceCommand) {
        self.ui.apply(&cmd);
        match &cmd {
            InterfaceCommand::Speak { utterance_id, text } => {
                let words = text.split_whitespace().count() as f64;
                let took = (words * self.scenario.synthesis_ms_per_word * 1e6).round() as u64;
                for (phase, at) in [(SynthesisPhase::Started, time), (SynthesisPhase::Finished, time + took)] {
                    let ev = SynthesisEvent { utterance_id: utterance_id.clone(), event: phase };
                    self.reply_at(at).synthesis_events.push(ev);
                }
            }
            InterfaceCommand::MovePanelToUser {} => {
                let head = self.rig.head_pose(self.now);
                let panel = head.compose(&Pose::from_translation(Vector3::new(0.0, 0.0, 0.5)));
                self.reply_at(time).panel_pose = Some(panel.to_row_major());
            }
            _ => {}
        }
        self.commands.push((time, cmd));
    }

    fn next_time(&self) -> Option<u64> {
        let q = self.queue.peek().map(|Reverse((t, _, _))| *t);
        let r = self.replies.keys().next().copied();
        match (q, r) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Envelopes due at `t`, in stream-id order.
    fn group(&mut self, t: u64) -> Vec<SensorEnvelope> {
        let mut out = Vec::new();
        while let Some(Reverse((qt, _, _))) = self.queue.peek() {
            if *qt != t {
                break;
            }
            let Reverse((_, stream, item)) = self.queue.pop().expect("peeked");
            let payload = match item {
                Item::Periodic => self.rig.sample(stream, t),
                Item::Text(text) => TextInputPayload { text }.encode(),
            };
            out.push(SensorEnvelope::new(stream, t, payload));
        }
        if let Some(state) = self.replies.remove(&t) {
            out.push(SensorEnvelope::new(STATE_STREAM, t, state.to_payload()));
        }
        out.sort_by_key(|e| e.stream_id);
        out
    }
}

/// Plays `scenario` against the server at `addr`.
pub fn run_scenario(scenario: &Scenario, addr: &str, options: &SimOptions) -> Result<SessionReport, SimError> {
    scenario.validate()?;
    let started = Instant::now();
    let duration_ns = (scenario.duration_s * 1e9).round() as u64;
    let session_id = options.session_id.unwrap_or_else(uuid::Uuid::new_v4);
    let epoch = options.epoch_utc.unwrap_or_else(crate::runtime::utc_now_us);

    let mut player = Player {
        scenario,
        rig: SensorRig::new(scenario, options.max_range_mm),
        queue: BinaryHeap::new(),
        replies: BTreeMap::new(),
        ui: UiModel::default(),
        commands: Vec::new(),
        now: 0,
    };
    for (stream, rate) in periodic_streams() {
        for t in sample_times(rate, duration_ns) {
            player.queue.push(Reverse((t, stream, Item::Periodic)));
        }
    }
    let mut last_text = None;
    let mut scripted: Vec<_> = scenario.events.iter().collect();
    scripted.sort_by(|a, b| a.at_s.total_cmp(&b.at_s));
    for e in scripted {
        let t = (e.at_s * 1e9).round() as u64;
        match &e.action {
            Action::Say(text) => {
                // Simultaneous utterances keep their file order.
                let t = last_text.map_or(t, |l: u64| t.max(l + 1));
                last_text = Some(t);
                player.queue.push(Reverse((t, TEXT_STREAM, Item::Text(text.clone()))));
            }
            Action::PalmOpen(open) => {
                player.replies.entry(t).or_default().palm_open_up = Some(PalmState { left: *open, right: *open })
            }
            Action::MovePanel(pose) => player.replies.entry(t).or_default().panel_pose = Some(*pose),
        }
    }

    let stream = connect(addr, options.connect_timeout)?;
    stream.set_nodelay(true).ok();
    let lost = |e: io::Error| SimError::ConnectionLost(e.to_string());
    let (tx, rx): (Sender<FromServer>, Receiver<FromServer>) = unbounded();
    let read_half = stream.try_clone().map_err(lost)?;
    let reader = std::thread::Builder::new()
        .name("sim-reader".into())
        .spawn(move || read_server(read_half, tx))
        .map_err(lost)?;
    let mut out = BufWriter::with_capacity(1 << 20, stream.try_clone().map_err(lost)?);
    let manifest = client_manifest(session_id, epoch);
    let control = |t: u64, msg: ControlMessage| encode_envelope(&SensorEnvelope::new(StreamId(0), t, msg.to_payload()));
    out.write_all(&control(0, ControlMessage::Manifest(manifest))).map_err(lost)?;

    let mut sent: BTreeMap<StreamId, u64> = BTreeMap::new();
    let mut seq = 0u64;
    while let Some(t) = player.next_time() {
        player.now = t;
        if let Pacing::RealTime { scale } = options.pacing {
            let due = started + Duration::from_secs_f64(t as f64 * 1e-9 * scale.max(0.0));
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
        for env in player.group(t) {
            *sent.entry(env.stream_id).or_default() += 1;
            out.write_all(&encode_envelope(&env)).map_err(lost)?;
        }
        seq += 1;
        out.write_all(&control(t, ControlMessage::Sync { seq })).map_err(lost)?;
        out.flush().map_err(lost)?;
        loop {
            match rx.recv_timeout(options.ack_timeout) {
                Ok(FromServer::Command(time, cmd)) => player.on_command(time, cmd),
                Ok(FromServer::Ack(s)) if s == seq => break,
                Ok(FromServer::Ack(_)) => {}
                Ok(FromServer::Closed(reason)) => {
                    return Err(SimError::ConnectionLost(
                        reason.unwrap_or_else(|| "server closed the connection".into()),
                    ))
                }
                Err(RecvTimeoutError::Timeout) => return Err(SimError::AckTimeout(seq)),
                Err(RecvTimeoutError::Disconnected) => return Err(SimError::ConnectionLost("reader stopped".into())),
            }
        }
        // Replies scheduled past the end of the scenario are never sent.
        if player.queue.is_empty() {
            player.replies.retain(|&rt, _| rt <= duration_ns);
        }
    }
    out.flush().map_err(lost)?;
    stream.shutdown(Shutdown::Write).map_err(lost)?;
    // Commands produced while the server wraps up still arrive.
    for msg in rx.iter() {
        match msg {
            FromServer::Command(time, cmd) => player.on_command(time, cmd),
            FromServer::Ack(_) => {}
            FromServer::Closed(_) => break,
        }
    }
    let _ = reader.join();
    Ok(SessionReport { session_id, sent, commands: player.commands, ui: player.ui, wall: started.elapsed() })
}
