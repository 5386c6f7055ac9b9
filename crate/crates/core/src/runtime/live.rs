use std::io::{self, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crossbeam_channel::{never, select, unbounded, Receiver, Sender};

use super::bridge::{UiEvent, WsBridge};
use super::clock::{utc_now_us, PipelineClock};
use super::config::ServerConfig;
use super::pipeline::Pipeline;
use super::replay::{build_pipeline, RuntimeError};
use super::streams::{check_client_manifest, live_manifest, ui_descriptors, COMMAND_STREAM};
use crate::store::StoreWriter;
use crate::wire::{
    decode_payload, encode_envelope, ControlMessage, FrameReadError, FrameReader, SensorEnvelope, StreamId,
    StreamManifest, StreamOrderGuard,
};

const POLL: Duration = Duration::from_millis(10);
const MANIFEST_TIMEOUT: Duration = Duration::from_secs(10);
const HEARTBEAT: Duration = Duration::from_secs(1);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionEnd {
    ClientDisconnected,
    UiDisconnected,
    Signal,
    ProtocolError(String),
}

#[derive(Debug, Clone)]
pub struct LiveReport {
    /// `None` when shut down before any session started.
    pub session_dir: Option<PathBuf>,
    pub envelopes: u64,
    pub commands: u64,
    pub end: SessionEnd,
}

enum Inbound {
    Envelope(SensorEnvelope),
    Sync(u64),
    Closed(Option<String>),
}

/// A bound server waiting for its session.
pub struct LiveServer {
    config: ServerConfig,
    listener: TcpListener,
    bridge: Option<WsBridge>,
}

impl LiveServer {
    pub fn bind(config: &ServerConfig) -> Result<LiveServer, RuntimeError> {
        let listener = TcpListener::bind(&config.listen)
            .map_err(|source| RuntimeError::BindFailure { addr: config.listen.clone(), source })?;
        listener.set_nonblocking(true)?;
        let bridge = match &config.ws_bridge {
            Some(addr) => {
                Some(WsBridge::start(addr).map_err(|source| RuntimeError::BindFailure { addr: addr.clone(), source })?)
            }
            None => None,
        };
        Ok(LiveServer { config: config.clone(), listener, bridge })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    pub fn bridge_addr(&self) -> Option<SocketAddr> {
        self.bridge.as_ref().map(WsBridge::local_addr)
    }

    /// Serves one session: a headset client, or the UI alone if it connects
    /// first. Returns when the session ends or `shutdown` is raised.
    pub fn run(self, shutdown: &AtomicBool) -> Result<LiveReport, RuntimeError> {
        loop {
            if shutdown.load(Ordering::SeqCst) {
                return Ok(LiveReport { session_dir: None, envelopes: 0, commands: 0, end: SessionEnd::Signal });
            }
            if let Some(bridge) = &self.bridge {
                while let Ok(ev) = bridge.events().try_recv() {
                    if ev == UiEvent::Connected {
                        log::info!("starting a UI-only session");
                        return self.session(None, shutdown);
                    }
                }
            }
            match self.listener.accept() {
                Ok((stream, peer)) => match handshake(&stream) {
                    Ok(manifest) => {
                        log::info!("client {peer} connected with {} streams", manifest.streams.len());
                        return self.session(Some((stream, manifest)), shutdown);
                    }
                    Err(e) => {
                        log::warn!("dropping connection from {peer}: {e}");
                        let _ = stream.shutdown(Shutdown::Both);
                    }
                },
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => std::thread::sleep(POLL),
                Err(e) => return Err(e.into()),
            }
        }
    }

    fn session(
        &self,
        client: Option<(TcpStream, StreamManifest)>,
        shutdown: &AtomicBool,
    ) -> Result<LiveReport, RuntimeError> {
        let (stream, client_manifest) = match client {
            Some((s, m)) => (Some(s), m),
            None => (
                None,
                StreamManifest { session_id: uuid::Uuid::new_v4(), epoch_utc: utc_now_us(), streams: Vec::new() },
            ),
        };
        let headset = stream.is_some();
        let mut inputs = client_manifest.clone();
        inputs.streams.extend(ui_descriptors());
        let pipeline = build_pipeline(&self.config, &inputs, PipelineClock::live(client_manifest.epoch_utc))?;
        let mut writer = StoreWriter::create(&self.config.store_root, live_manifest(&client_manifest))?;
        writer.set_checkpoint_interval(Duration::from_millis(self.config.checkpoint_interval_ms));
        let (tx, rx) = unbounded();
        let mut out = None;
        let mut reader_stream = None;
        if let Some(s) = stream {
            s.set_read_timeout(None)?;
            s.set_nodelay(true)?;
            reader_stream = Some(s.try_clone()?);
            let rs = s.try_clone()?;
            let manifest = client_manifest.clone();
            std::thread::Builder::new().name("client-reader".into()).spawn(move || read_client(rs, manifest, tx))?;
            out = Some(BufWriter::with_capacity(1 << 16, s));
        } else {
            drop(tx);
        }
        let mut session = Session {
            pipeline,
            writer,
            out,
            bridge: self.bridge.as_ref(),
            ui_connected: !headset,
            last_ui: Default::default(),
            envelopes: 0,
            commands: 0,
        };
        let inbound: Receiver<Inbound> = if headset { rx } else { never() };
        let ui_events = self.bridge.as_ref().map_or_else(never, |b| b.events().clone());
        let mut last_heartbeat = Instant::now();
        let end = loop {
            if shutdown.load(Ordering::SeqCst) {
                break SessionEnd::Signal;
            }
            select! {
                recv(inbound) -> msg => match msg {
                    Ok(Inbound::Envelope(env)) => session.process(env)?,
                    Ok(Inbound::Sync(seq)) => session.ack(seq),
                    Ok(Inbound::Closed(None)) | Err(_) => break SessionEnd::ClientDisconnected,
                    Ok(Inbound::Closed(Some(e))) => {
                        log::error!("protocol error, dropping client: {e}");
                        break SessionEnd::ProtocolError(e);
                    }
                },
                recv(ui_events) -> ev => match ev {
                    Ok(UiEvent::Message(m)) => {
                        let (stream_id, payload) = m.to_input();
                        session.inject(stream_id, payload, !headset)?;
                    }
                    Ok(UiEvent::Connected) => session.ui_connected = true,
                    Ok(UiEvent::Disconnected) | Err(_) => {
                        session.ui_connected = false;
                        if !headset {
                            break SessionEnd::UiDisconnected;
                        }
                    }
                },
                default(POLL) => {}
            }
            if !headset {
                // Keeps originating time, and with it timers, moving while only the UI is attached.
                if last_heartbeat.elapsed() >= HEARTBEAT {
                    last_heartbeat = Instant::now();
                    session.inject(super::streams::UI_STATE_STREAM, b"{}".to_vec(), true)?;
                }
                reject_headsets(&self.listener);
            }
            let outs = session.pipeline.poll_async();
            session.emit(outs)?;
            session.writer.maybe_checkpoint()?;
        };
        if let Some(s) = reader_stream {
            let _ = s.shutdown(Shutdown::Both);
        }
        let outs = session.pipeline.finish();
        session.emit(outs)?;
        let session_dir = Some(session.writer.dir().to_path_buf());
        let Session { writer, envelopes, commands, .. } = session;
        writer.close()?;
        log::info!("session ended ({end:?}): {envelopes} envelopes in, {commands} commands out");
        Ok(LiveReport { session_dir, envelopes, commands, end })
    }
}

/// Reads the opening manifest frame.
fn handshake(stream: &TcpStream) -> Result<StreamManifest, RuntimeError> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(MANIFEST_TIMEOUT))?;
    let mut reader = FrameReader::new(stream);
    let env = match reader.next_frame() {
        Ok(Some(env)) => env,
        Ok(None) => return Err(RuntimeError::Protocol("connection closed before the manifest".into())),
        Err(e) => return Err(RuntimeError::Protocol(e.to_string())),
    };
    if !env.stream_id.is_control() {
        return Err(RuntimeError::Protocol(format!(
            "first frame is on stream {}, expected the manifest",
            env.stream_id
        )));
    }
    match ControlMessage::from_payload(&env.payload)? {
        ControlMessage::Manifest(m) => {
            check_client_manifest(&m)?;
            Ok(m)
        }
        other => Err(RuntimeError::Protocol(format!("expected a manifest, got {other:?}"))),
    }
}

fn reject_headsets(listener: &TcpListener) {
    if let Ok((stream, peer)) = listener.accept() {
        log::warn!("rejecting headset {peer}: a UI-only session is active");
        let _ = stream.shutdown(Shutdown::Both);
    }
}

fn read_client(stream: TcpStream, manifest: StreamManifest, tx: Sender<Inbound>) {
    let kinds: std::collections::HashMap<StreamId, _> =
        manifest.streams.iter().map(|d| (d.stream_id, d.kind)).collect();
    let mut guard = StreamOrderGuard::with_manifest(&manifest);
    let mut reader = FrameReader::new(io::BufReader::with_capacity(1 << 16, stream));
    let closed = loop {
        let env = match reader.next_frame() {
            Ok(Some(env)) => env,
            Ok(None) => break None,
            Err(FrameReadError::Io(e)) => {
                log::info!("client connection closed: {e}");
                break None;
            }
            Err(FrameReadError::TruncatedAtEof { have }) => {
                log::warn!("client disconnected {have} bytes into a frame");
                break None;
            }
            Err(FrameReadError::Wire(e)) => break Some(e.to_string()),
        };
        if env.stream_id.is_control() {
            match ControlMessage::from_payload(&env.payload) {
                Ok(ControlMessage::Sync { seq }) => {
                    if tx.send(Inbound::Sync(seq)).is_err() {
                        return;
                    }
                }
                Ok(other) => break Some(format!("unexpected control message {other:?}")),
                Err(e) => break Some(e.to_string()),
            }
            continue;
        }
        if let Err(e) = guard.admit(&env) {
            break Some(e.to_string());
        }
        if let Err(e) = decode_payload(kinds[&env.stream_id], &env.payload) {
            break Some(format!("stream {}: {e}", env.stream_id));
        }
        if tx.send(Inbound::Envelope(env)).is_err() {
            return;
        }
    };
    let _ = tx.send(Inbound::Closed(closed));
}

struct Session<'a> {
    pipeline: Pipeline,
    writer: StoreWriter,
    out: Option<BufWriter<TcpStream>>,
    bridge: Option<&'a WsBridge>,
    ui_connected: bool,
    last_ui: std::collections::HashMap<StreamId, u64>,
    envelopes: u64,
    commands: u64,
}

impl Session<'_> {
    fn process(&mut self, env: SensorEnvelope) -> Result<(), RuntimeError> {
        self.envelopes += 1;
        self.writer.append(&env)?;
        let outs = self.pipeline.ingest(env);
        self.emit(outs)
    }

    /// Stamps and processes an operator-originated envelope.
    fn inject(&mut self, stream_id: StreamId, payload: Vec<u8>, use_wall: bool) -> Result<(), RuntimeError> {
        let clock = self.pipeline.clock();
        let mut t = clock.now() + 1;
        if use_wall {
            t = t.max(clock.wall_now().unwrap_or(0));
        }
        if let Some(&last) = self.last_ui.get(&stream_id) {
            t = t.max(last + 1);
        }
        self.last_ui.insert(stream_id, t);
        self.process(SensorEnvelope::new(stream_id, t, payload))
    }

    fn emit(&mut self, outs: Vec<SensorEnvelope>) -> Result<(), RuntimeError> {
        if outs.is_empty() {
            return Ok(());
        }
        for env in &outs {
            self.writer.append(env)?;
            if env.stream_id != COMMAND_STREAM {
                continue;
            }
            self.commands += 1;
            if let Some(b) = self.bridge.filter(|_| self.ui_connected) {
                b.send_command(env.originating_time, &env.payload);
            }
            if let Some(w) = self.out.as_mut() {
                if let Err(e) = w.write_all(&encode_envelope(env)) {
                    log::warn!("cannot send command to client: {e}");
                    self.out = None;
                }
            }
        }
        self.flush();
        Ok(())
    }

    fn ack(&mut self, seq: u64) {
        let env =
            SensorEnvelope::new(StreamId(0), self.pipeline.clock().now(), ControlMessage::SyncAck { seq }.to_payload());
        if let Some(w) = self.out.as_mut() {
            if let Err(e) = w.write_all(&encode_envelope(&env)) {
                log::warn!("cannot acknowledge sync: {e}");
                self.out = None;
            }
        }
        self.flush();
    }

    fn flush(&mut self) {
        if let Some(w) = self.out.as_mut() {
            if w.flush().is_err() {
                self.out = None;
            }
        }
    }
}

/// Convenience for embedding: binds and serves one session.
pub fn run_live(config: &ServerConfig, shutdown: Arc<AtomicBool>) -> Result<LiveReport, RuntimeError> {
    LiveServer::bind(config)?.run(&shutdown)
}

impl From<FrameReadError> for RuntimeError {
    fn from(e: FrameReadError) -> Self {
        RuntimeError::Protocol(e.to_string())
    }
}
