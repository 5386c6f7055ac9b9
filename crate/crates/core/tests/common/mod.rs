#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdout, Command, Stdio};

use taskguide::runtime::streams::COMMAND_STREAM;
use taskguide::store::StoreReader;

pub const BIN: &str = env!("CARGO_BIN_EXE_taskguide");

pub fn asset(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

pub fn coffee_scenario() -> PathBuf {
    asset("assets/scenarios/coffee.json")
}

pub struct Served {
    pub child: Child,
    pub addr: String,
    pub bridge: Option<String>,
    stdout: BufReader<ChildStdout>,
}

impl Served {
    /// Waits for exit and returns the session directory printed by `serve`.
    pub fn finish(mut self) -> Option<PathBuf> {
        let mut session = None;
        let mut line = String::new();
        while self.stdout.read_line(&mut line).unwrap_or(0) > 0 {
            if let Some(p) = line.trim().strip_prefix("session ") {
                session = Some(PathBuf::from(p));
            }
            line.clear();
        }
        let status = self.child.wait().expect("serve exits");
        assert!(status.success(), "serve failed: {status}");
        session
    }
}

/// Starts `taskguide serve` on ephemeral ports.
pub fn serve(store_root: &Path, extra: &[&str]) -> Served {
    let mut cmd = Command::new(BIN);
    cmd.args(["serve", "--listen", "127.0.0.1:0", "--store-root"]).arg(store_root);
    if !extra.contains(&"--no-ws-bridge") {
        cmd.args(["--ws-bridge", "127.0.0.1:0"]);
    }
    cmd.args(extra).env("RUST_LOG", "warn").stdout(Stdio::piped()).stderr(Stdio::null());
    let mut child = cmd.spawn().expect("spawn serve");
    let mut stdout = BufReader::new(child.stdout.take().unwrap());
    let mut addr = None;
    let mut bridge = None;
    let mut line = String::new();
    while addr.is_none() || (bridge.is_none() && !extra.contains(&"--no-ws-bridge")) {
        line.clear();
        assert!(stdout.read_line(&mut line).unwrap() > 0, "serve exited early");
        if let Some(a) = line.trim().strip_prefix("listening on ") {
            addr = Some(a.to_string());
        } else if let Some(a) = line.trim().strip_prefix("ws bridge on ") {
            bridge = Some(a.to_string());
        }
    }
    Served { child, addr: addr.unwrap(), bridge, stdout }
}

pub fn run(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).env("RUST_LOG", "warn").output().expect("run taskguide")
}

pub fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "taskguide {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Serves one session of `scenario` played by the simulator binary.
pub fn record_session(store_root: &Path, scenario: &Path, extra: &[&str]) -> PathBuf {
    let scene = scenario.to_str().unwrap();
    let mut args = vec!["--no-ws-bridge", "--scene", scene];
    args.extend_from_slice(extra);
    let served = serve(store_root, &args);
    run_ok(&["sim", scene, "--connect", &served.addr]);
    served.finish().expect("session directory")
}

pub fn replay(store: &Path, store_root: &Path, scene: &Path) -> PathBuf {
    let out = run_ok(&[
        "replay",
        store.to_str().unwrap(),
        "--store-root",
        store_root.to_str().unwrap(),
        "--scene",
        scene.to_str().unwrap(),
    ]);
    PathBuf::from(out.trim())
}

/// The command stream as `time<TAB>json` lines.
pub fn transcript(session: &Path) -> String {
    let reader = StoreReader::open(session).unwrap();
    let read = reader.read_stream(COMMAND_STREAM).unwrap();
    read.envelopes
        .iter()
        .map(|e| format!("{}\t{}\n", e.originating_time, String::from_utf8_lossy(&e.payload)))
        .collect()
}

pub fn command_log_bytes(session: &Path) -> Vec<u8> {
    std::fs::read(session.join(taskguide::store::log_file_name(COMMAND_STREAM))).unwrap()
}
