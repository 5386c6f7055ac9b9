//! Runs a full recorded session in one process: the server listens on a
//! local port, the headset simulator plays the coffee scenario against it,
//! and the recording is replayed to show the command stream is reproduced.

use std::path::PathBuf;
use std::sync::atomic::AtomicBool;

use taskguide::runtime::streams::COMMAND_STREAM;
use taskguide::runtime::{run_replay, DetectorConfig, LiveServer, ServerConfig};
use taskguide::sim::{run_scenario, Scenario, SimOptions};
use taskguide::store::StoreReader;

fn commands(session: &std::path::Path) -> Vec<Vec<u8>> {
    let read = StoreReader::open(session).unwrap().read_stream(COMMAND_STREAM).unwrap();
    read.envelopes.into_iter().map(|e| e.payload).collect()
}

fn main() {
    let scenario_path = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/scenarios/coffee.json"));
    let store = tempfile::tempdir().unwrap();
    let config = ServerConfig {
        listen: "127.0.0.1:0".into(),
        store_root: store.path().to_path_buf(),
        detector: DetectorConfig::Mock { scene: Some(scenario_path.clone()) },
        ws_bridge: None,
        ..ServerConfig::default()
    };

    let server = LiveServer::bind(&config).unwrap();
    let addr = server.local_addr().to_string();
    let handle = std::thread::spawn(move || server.run(&AtomicBool::new(false)));

    let scenario = Scenario::load(&scenario_path).unwrap();
    let report = run_scenario(&scenario, &addr, &SimOptions::default()).unwrap();
    let live = handle.join().unwrap().unwrap();
    let session = live.session_dir.expect("a session was recorded");
    println!("live: {} envelopes in, {} commands out, {:?}", live.envelopes, live.commands, report.wall);
    println!("task complete on the simulated headset: {}", report.ui.task_complete());

    let replayed = run_replay(&config, &session).unwrap();
    println!("replay: {} commands in {:?}", replayed.stats.commands, replayed.wall);
    println!("identical command streams: {}", commands(&session) == commands(&replayed.session_dir));
}
