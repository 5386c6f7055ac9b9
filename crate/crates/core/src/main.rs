use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};

use taskguide::controller::GuidanceMode;
use taskguide::runtime::{run_replay, DetectorConfig, LiveServer, LlmConfig, ServerConfig};
use taskguide::services::{MockFixtures, RecognizedText, StubConfig, StubServer};
use taskguide::sim::{run_scenario, Scenario, SimOptions};
use taskguide::store::{check_store, format_envelope, format_info_table, store_info, Pacing, StoreReader};
use taskguide::wire::StreamId;

#[derive(Parser)]
#[command(name = "taskguide", version, about = "Task guidance server, store tools and headset simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding session stores.
    #[arg(long)]
    store_root: Option<PathBuf>,
    /// Scene (or scenario) file for the mock detector.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Task library JSON.
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// Mock LLM fixture file.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Library,
    Generated,
}

#[derive(Subcommand)]
enum Command {
    /// Serve one headset session (plus the UI bridge) and exit when it ends.
    Serve {
        #[command(flatten)]
        config: ConfigArgs,
        /// Client protocol address.
        #[arg(long)]
        listen: Option<String>,
        /// Websocket bridge address.
        #[arg(long, conflicts_with = "no_ws_bridge")]
        ws_bridge: Option<String>,
        #[arg(long)]
        no_ws_bridge: bool,
    },
    /// Re-run a recorded session through the pipeline with mock services.
    Replay {
        store: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Inspect session stores.
    Store {
        #[command(subcommand)]
        command: StoreCommand,
    },
    /// Play a scenario against a running server.
    Sim {
        scenario: PathBuf,
        #[arg(long)]
        connect: String,
        /// Pace sends by the scenario clock instead of as fast as possible.
        #[arg(long)]
        realtime: bool,
    },
    /// Run HTTP stand-ins for the LLM, detector and speech services.
    StubServices {
        #[arg(long, default_value = "127.0.0.1:7800")]
        listen: String,
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long)]
        scene: Option<PathBuf>,
        /// JSON list of {"type": "partial"|"final", "text"} replies, one per /transcribe call.
        #[arg(long)]
        asr_script: Option<PathBuf>,
        /// Artificial delay before answering /complete, in milliseconds.
        #[arg(long, default_value_t = 0)]
        complete_delay_ms: u64,
    },
}

#[derive(Subcommand)]
enum StoreCommand {
    /// Verify logs against the catalog.
    Check { store: PathBuf },
    /// Per-stream counts, rates and spans.
    Info { store: PathBuf },
    /// Print decoded envelopes of one stream.
    Dump {
        store: PathBuf,
        #[arg(long)]
        stream: u16,
        /// Earliest originating time (ns), inclusive.
        #[arg(long)]
        from: Option<u64>,
        /// Latest originating time (ns), inclusive.
        #[arg(long)]
        to: Option<u64>,
    },
}

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn load_config(args: &ConfigArgs) -> Result<ServerConfig> {
    let mut config = match &args.config {
        Some(p) => ServerConfig::load(p)?,
        None => ServerConfig::default(),
    };
    if let Some(p) = &args.store_root {
        config.store_root = p.clone();
    }
    if let Some(p) = &args.scene {
        config.detector = DetectorConfig::Mock { scene: Some(p.clone()) };
    }
    if let Some(p) = &args.tasks {
        config.task_library = Some(p.clone());
    }
    if let Some(p) = &args.fixtures {
        config.llm = LlmConfig::Mock { fixtures: Some(p.clone()) };
    }
    if let Some(m) = args.mode {
        config.mode = match m {
            ModeArg::Library => GuidanceMode::Library,
            ModeArg::Generated => GuidanceMode::Generated,
        };
    }
    config.validate()?;
    Ok(config)
}

fn serve(mut config: ServerConfig, listen: Option<String>, ws: Option<String>, no_ws: bool) -> Result<()> {
    if let Some(l) = listen {
        config.listen = l;
    }
    if no_ws {
        config.ws_bridge = None;
    } else if let Some(w) = ws {
        config.ws_bridge = Some(w);
    }
    let shutdown = Arc::new(AtomicBool::new(false));
    for sig in [signal_hook::consts::SIGINT, signal_hook::consts::SIGTERM] {
        signal_hook::flag::register(sig, Arc::clone(&shutdown))?;
    }
    let server = LiveServer::bind(&config)?;
    println!("listening on {}", server.local_addr());
    if let Some(a) = server.bridge_addr() {
        println!("ws bridge on {a}");
    }
    let report = server.run(&shutdown)?;
    if let Some(dir) = &report.session_dir {
        println!("session {}", dir.display());
    }
    println!("ended: {:?}, {} envelopes in, {} commands out", report.end, report.envelopes, report.commands);
    Ok(())
}

fn dump(store: &Path, stream: u16, from: Option<u64>, to: Option<u64>) -> Result<()> {
    let reader = StoreReader::open(store)?;
    let id = StreamId(stream);
    let kind = reader.manifest().descriptor(id).ok_or_else(|| format!("store has no stream {stream}"))?.kind;
    let mut out = std::io::BufWriter::new(std::io::stdout().lock());
    use std::io::Write;
    for item in reader.read_merged_streams(&[id], from, to)? {
        writeln!(out, "{}", format_envelope(kind, &item?))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve { config, listen, ws_bridge, no_ws_bridge } => {
            serve(load_config(&config)?, listen, ws_bridge, no_ws_bridge)
        }
        Command::Replay { store, config } => {
            let outcome = run_replay(&load_config(&config)?, &store)?;
            println!("{}", outcome.session_dir.display());
            eprintln!(
                "replayed {} envelopes in {:.2} s, {} commands",
                outcome.stats.envelopes,
                outcome.wall.as_secs_f64(),
                outcome.stats.commands
            );
            Ok(())
        }
        Command::Store { command: StoreCommand::Check { store } } => {
            let report = check_store(&store)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for s in &report.streams {
                println!("{:>6}  {:<24} {:>9} frames", s.stream_id.0, s.name, s.count);
            }
            println!("ok ({} shutdown)", if report.clean_shutdown { "clean" } else { "unclean" });
            Ok(())
        }
        Command::Store { command: StoreCommand::Info { store } } => {
            print!("{}", format_info_table(&store_info(&store)?));
            Ok(())
        }
        Command::Store { command: StoreCommand::Dump { store, stream, from, to } } => dump(&store, stream, from, to),
        Command::Sim { scenario, connect, realtime } => {
            let scenario = Scenario::load(&scenario)?;
            let options = SimOptions {
                pacing: if realtime { Pacing::RealTime { scale: 1.0 } } else { Pacing::AsFast },
                ..SimOptions::default()
            };
            let report = run_scenario(&scenario, &connect, &options)?;
            let sent: u64 = report.sent.values().sum();
            println!(
                "session {}: sent {sent} envelopes, received {} commands in {:.2} s; task complete: {}",
                report.session_id,
                report.commands.len(),
                report.wall.as_secs_f64(),
                report.ui.task_complete()
            );
            Ok(())
        }
        Command::StubServices { listen, fixtures, scene, asr_script, complete_delay_ms } => {
            let fixtures = match fixtures {
                Some(p) => MockFixtures::load(&p)?,
                None => MockFixtures::from_json(taskguide::runtime::BUNDLED_FIXTURES)?,
            };
            let scene = match scene {
                Some(p) => taskguide::runtime::load_scene(&p)?,
                None => Default::default(),
            };
            let asr_script: Vec<RecognizedText> = match asr_script {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => Vec::new(),
            };
            let config =
                StubConfig { fixtures, scene, asr_script, complete_delay: Duration::from_millis(complete_delay_ms) };
            let server = StubServer::start(&listen, config)?;
            println!("stub services on {}", server.url());
            server.wait();
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
