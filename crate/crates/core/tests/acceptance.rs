//! Acceptance gate. Prints one pass/fail line per criterion and exits
//! nonzero if any fails. Tolerances are pinned in the constants below.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use common::*;
use taskguide::controller::{InterfaceCommand, InterfaceState, PalmState, Side, SynthesisEvent, SynthesisPhase};
use taskguide::geometry::{
    backproject_depth, centroid, mask_subcloud, project_to_rgb, CameraModel, Detection3d, Pose, Projection, Scene,
    SceneObject, Tracker, TrackerConfig,
};
use taskguide::services::{Bindings, PromptLibrary, ServiceError};
use taskguide::sim::sensors::{depth_mount, rgb_camera};
use taskguide::store::check_store;
use taskguide::wire::{
    decode_envelope, decode_payload, encode_envelope, AudioPayload, CameraFramePayload, GazePayload, HandsPayload,
    Intrinsics, PixelEncoding, PosePayload, SensorEnvelope, StreamId, StreamKind, TextInputPayload, TypedPayload,
    WireError, HAND_JOINT_COUNT,
};

const C1_ENVELOPES: usize = 10_000;
const C1_BUDGET: Duration = Duration::from_secs(10);
const C2_RATE_TOLERANCE: f64 = 0.02;
const C4_SCENES: usize = 100;
const C4_CENTROID_TOLERANCE_M: f64 = 0.01;
const C4_BUDGET: Duration = Duration::from_secs(60);
const C5_CAMERAS: usize = 20;
const C5_TOLERANCE_PX: f64 = 1e-4;
const C8_EVENTS: usize = 500;
const C9_BUDGET: Duration = Duration::from_secs(12);
const C10_RUNS: usize = 20;
const C10_CHECKPOINT_MS: u64 = 200;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let coffee = Coffee::record(tmp.path());
    let criteria: Vec<Criterion> = vec![
        ("protocol round-trip", Box::new(c1_protocol_round_trip)),
        ("stream-rate fidelity", Box::new(|| c2_stream_rates(&coffee))),
        ("replay determinism", Box::new(|| c3_replay_determinism(&coffee))),
        ("back-projection oracle", Box::new(c4_backprojection_oracle)),
        ("projection inverse", Box::new(c5_projection_inverse)),
        ("golden transcript", Box::new(|| c6_golden_transcript(&coffee))),
        ("prompt regression", Box::new(c7_prompt_regression)),
        ("tracking oracle", Box::new(c8_tracking_oracle)),
        ("throughput", Box::new(|| c9_throughput(&coffee))),
        ("crash consistency", Box::new(|| c10_crash_consistency(tmp.path()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&p))));
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// The bundled 60 s coffee session recorded live with mock services.
struct Coffee {
    root: PathBuf,
    live: PathBuf,
}

impl Coffee {
    fn record(root: &Path) -> Coffee {
        let live = record_session(&root.join("coffee-live"), &coffee_scenario(), &[]);
        Coffee { root: root.to_path_buf(), live }
    }
}

// 1. Protocol round-trip

fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    let p = Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    Pose::from_yaw_pitch(p, rng.gen_range(-3.1..3.1), rng.gen_range(-1.5..1.5))
}

fn random_text(rng: &mut ChaCha8Rng) -> String {
    const WORDS: [&str; 8] = ["mug", "kettle", "näch", "done", "Schritt", "水", "filter", "{slot}"];
    let n = rng.gen_range(1..6);
    (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

fn random_camera(rng: &mut ChaCha8Rng, encoding: PixelEncoding) -> CameraFramePayload {
    let width = 2 * rng.gen_range(1..40u32);
    let height = 2 * rng.gen_range(1..30u32);
    let pixels = (0..encoding.pixel_bytes(width, height)).map(|_| rng.gen()).collect();
    CameraFramePayload {
        width,
        height,
        encoding,
        intrinsics: Intrinsics {
            fx: rng.gen_range(10.0..1000.0),
            fy: rng.gen_range(10.0..1000.0),
            cx: rng.gen_range(0.0..width as f64),
            cy: rng.gen_range(0.0..height as f64),
        },
        extrinsics: random_pose(rng).to_wire(),
        pixels,
    }
}

fn random_command(rng: &mut ChaCha8Rng) -> InterfaceCommand {
    match rng.gen_range(0..5) {
        0 => InterfaceCommand::AddChatBubble {
            side: if rng.gen() { Side::System } else { Side::User },
            text: random_text(rng),
        },
        1 => InterfaceCommand::Speak { utterance_id: format!("u{}", rng.gen::<u16>()), text: random_text(rng) },
        2 => InterfaceCommand::ShowObjectLabel {
            track_id: rng.gen(),
            label: random_text(rng),
            position: [rng.gen(), rng.gen(), rng.gen()],
        },
        3 => InterfaceCommand::ShowSuggestions {
            utterances: (0..rng.gen_range(0..4)).map(|_| random_text(rng)).collect(),
        },
        _ => InterfaceCommand::MovePanelToUser {},
    }
}

fn random_payload(rng: &mut ChaCha8Rng, kind: StreamKind) -> (Vec<u8>, TypedPayload) {
    match kind {
        StreamKind::RgbCamera | StreamKind::PreviewCamera | StreamKind::DepthCamera => {
            let enc = if kind == StreamKind::DepthCamera { PixelEncoding::Depth16 } else { PixelEncoding::Nv12 };
            let f = random_camera(rng, enc);
            (f.encode(), TypedPayload::Camera(f))
        }
        StreamKind::EyeGaze => {
            let d = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0f32))
                .normalize();
            let g = GazePayload { position: [rng.gen(), rng.gen(), rng.gen()], direction: [d.x, d.y, d.z] };
            (g.encode(), TypedPayload::Gaze(g))
        }
        StreamKind::HeadPose => {
            let p = PosePayload { matrix: random_pose(rng).to_wire() };
            (p.encode(), TypedPayload::Pose(p))
        }
        StreamKind::Hands => {
            let hand = |rng: &mut ChaCha8Rng| {
                rng.gen_bool(0.7).then(|| {
                    (0..HAND_JOINT_COUNT).map(|_| PosePayload { matrix: random_pose(rng).to_wire() }).collect()
                })
            };
            let h = HandsPayload { left: hand(rng), right: hand(rng) };
            (h.encode(), TypedPayload::Hands(h))
        }
        StreamKind::Audio => {
            let a = AudioPayload { samples: (0..rng.gen_range(1..2000)).map(|_| rng.gen_range(-1.0..=1.0)).collect() };
            (a.encode(), TypedPayload::Audio(a))
        }
        StreamKind::TextInput => {
            let t = TextInputPayload { text: random_text(rng) };
            (t.encode(), TypedPayload::Text(t))
        }
        StreamKind::InterfaceState => {
            let s = InterfaceState {
                panel_pose: rng.gen_bool(0.5).then(|| random_pose(rng).to_row_major()),
                synthesis_events: (0..rng.gen_range(0..3))
                    .map(|i| SynthesisEvent {
                        utterance_id: format!("u{i}"),
                        event: if rng.gen() { SynthesisPhase::Started } else { SynthesisPhase::Finished },
                    })
                    .collect(),
                timer_positions: BTreeMap::new(),
                palm_open_up: rng.gen_bool(0.5).then(|| PalmState { left: rng.gen(), right: rng.gen() }),
            };
            (s.to_payload(), TypedPayload::InterfaceState(s))
        }
        StreamKind::InterfaceCommand => {
            let c = random_command(rng);
            (c.to_payload(), TypedPayload::InterfaceCommand(c))
        }
        StreamKind::Detection | StreamKind::LlmExchange | StreamKind::ControllerTransition => {
            let v = json!({"correlation": rng.gen::<u32>(), "text": random_text(rng), "x": rng.gen::<f64>(), "ok": rng.gen::<bool>()});
            (serde_json::to_vec(&v).unwrap(), TypedPayload::Json(v))
        }
    }
}

fn c1_protocol_round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut corrupted = 0;
    for i in 0..C1_ENVELOPES {
        let kind = StreamKind::ALL[i % StreamKind::ALL.len()];
        let (payload, typed) = random_payload(&mut rng, kind);
        let env = SensorEnvelope::new(StreamId(rng.gen_range(1..u16::MAX)), rng.gen(), payload);
        let bytes = encode_envelope(&env);
        let (back, used) = decode_envelope(&bytes).map_err(|e| format!("envelope {i} ({kind:?}): {e}"))?;
        ensure(used == bytes.len() && back == env, || format!("envelope {i} ({kind:?}) changed in transit"))?;
        let decoded = decode_payload(kind, &back.payload).map_err(|e| format!("payload {i} ({kind:?}): {e}"))?;
        ensure(decoded == typed, || format!("payload {i} ({kind:?}) decoded differently: {decoded:?} vs {typed:?}"))?;

        // Every byte except the magic, version and length fields is covered by the checksum.
        let mut bad = bytes.clone();
        let covered: Vec<usize> = (5..15).chain(19..bad.len()).collect();
        let at = covered[rng.gen_range(0..covered.len())];
        bad[at] ^= rng.gen_range(1..=255u8);
        match decode_envelope(&bad) {
            Err(WireError::CrcMismatch { .. }) => corrupted += 1,
            other => return Err(format!("corrupting byte {at} of envelope {i} gave {other:?}")),
        }
    }
    let took = start.elapsed();
    ensure(took < C1_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("{C1_ENVELOPES} envelopes, {corrupted} corrupted frames rejected, {took:.2?}"))
}

// 2. Stream-rate fidelity

fn c2_stream_rates(coffee: &Coffee) -> Outcome {
    let out = run_ok(&["store", "info", coffee.live.to_str().unwrap()]);
    // 60 s of capture at the nominal headset rates.
    let expected: [(&str, u64); 7] = [
        ("camera.rgb", 300),
        ("camera.preview", 300),
        ("camera.depth", 300),
        ("eyes.gaze", 1800),
        ("head.pose", 1800),
        ("hands", 1200),
        ("audio.samples", 960_000),
    ];
    let mut counts = BTreeMap::new();
    let mut last_name = String::new();
    for line in out.lines().skip(1) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.first() == Some(&"samples") {
            counts.insert(format!("{last_name}.samples"), cols[1].parse::<u64>().unwrap());
        } else if cols.len() >= 4 {
            last_name = cols[1].to_string();
            counts.insert(last_name.clone(), cols[3].parse::<u64>().unwrap());
        }
    }
    let mut worst: f64 = 0.0;
    for (name, want) in expected {
        let got = *counts.get(name).ok_or_else(|| format!("store info has no row for {name}:\n{out}"))?;
        let err = (got as f64 - want as f64).abs() / want as f64;
        ensure(err <= C2_RATE_TOLERANCE, || format!("{name}: {got} vs nominal {want}"))?;
        worst = worst.max(err);
    }
    Ok(format!("7 streams, worst deviation {:.2}%", worst * 100.0))
}

// 3. Replay determinism

fn c3_replay_determinism(coffee: &Coffee) -> Outcome {
    let a = replay(&coffee.live, &coffee.root.join("replay-a"), &coffee_scenario());
    let b = replay(&coffee.live, &coffee.root.join("replay-b"), &coffee_scenario());
    let (live, a, b) = (command_log_bytes(&coffee.live), command_log_bytes(&a), command_log_bytes(&b));
    ensure(!live.is_empty(), || "live command log is empty".into())?;
    ensure(a == b, || "two replays produced different command logs".into())?;
    ensure(live == a, || "live and replayed command logs differ".into())?;
    Ok(format!("3 command logs of {} bytes identical", live.len()))
}

// 4. Back-projection oracle

/// Long-hand pixel set and centroid: read each depth sample, lift it into
/// the world through the frame's own matrix, re-express it in the RGB camera
/// and keep it if the nearest RGB pixel is in the mask.
fn oracle_subcloud(
    depth: &CameraFramePayload,
    max_range_mm: u16,
    rgb: &CameraModel,
    rgb_wire: &[f32; 16],
    mask: &[bool],
) -> (BTreeSet<(u32, u32)>, Option<[f64; 3]>) {
    let m = |r: usize, c: usize| depth.extrinsics[r * 4 + c] as f64;
    let n = |r: usize, c: usize| rgb_wire[r * 4 + c] as f64;
    let k = depth.intrinsics;
    let mut pixels = BTreeSet::new();
    let mut sum = [0.0f64; 3];
    for v in 0..depth.height {
        for u in 0..depth.width {
            let i = 2 * (v * depth.width + u) as usize;
            let d = u16::from_le_bytes([depth.pixels[i], depth.pixels[i + 1]]);
            if d == 0 || d >= max_range_mm {
                continue;
            }
            let z = d as f64 / 1000.0;
            let cam = [(u as f64 + 0.5 - k.cx) * z / k.fx, (v as f64 + 0.5 - k.cy) * z / k.fy, z];
            let world: [f64; 3] =
                std::array::from_fn(|r| m(r, 0) * cam[0] + m(r, 1) * cam[1] + m(r, 2) * cam[2] + m(r, 3));
            let rel = [world[0] - n(0, 3), world[1] - n(1, 3), world[2] - n(2, 3)];
            let c: [f64; 3] = std::array::from_fn(|col| n(0, col) * rel[0] + n(1, col) * rel[1] + n(2, col) * rel[2]);
            if c[2] <= 0.0 {
                continue;
            }
            let pu = (rgb.fx * c[0] / c[2] + rgb.cx - 0.5 + 0.5).floor();
            let pv = (rgb.fy * c[1] / c[2] + rgb.cy - 0.5 + 0.5).floor();
            if pu < 0.0 || pv < 0.0 || pu >= rgb.width as f64 || pv >= rgb.height as f64 {
                continue;
            }
            if mask[pv as usize * rgb.width as usize + pu as usize] {
                pixels.insert((u, v));
                for a in 0..3 {
                    sum[a] += world[a];
                }
            }
        }
    }
    let count = pixels.len() as f64;
    (pixels.clone(), (count > 0.0).then(|| sum.map(|s| s / count)))
}

fn c4_backprojection_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rgb_model = rgb_camera();
    let depth_model = taskguide::sim::sensors::depth_camera();
    let max_range_mm = 4000;
    let (mut objects, mut points, mut worst) = (0, 0, 0.0f64);
    for scene_no in 0..C4_SCENES {
        let head = random_pose(&mut rng);
        let n = rng.gen_range(1..=4);
        let scene = Scene {
            objects: (0..n)
                .map(|i| {
                    let local =
                        Vector3::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.4..0.4), rng.gen_range(0.4..3.0));
                    SceneObject {
                        label: format!("obj{i}"),
                        center: head.transform_point(&local).into(),
                        radius: rng.gen_range(0.03..0.25),
                    }
                })
                .collect(),
        };
        let vocabulary: Vec<String> = scene.objects.iter().map(|o| o.label.clone()).collect();
        // Poses travel as f32 on the wire; use what the frames carry.
        let rgb_wire = head.to_wire();
        let rgb_pose = Pose::from_wire(&rgb_wire);
        let depth_pose = Pose::from_wire(&head.compose(&depth_mount()).to_wire());
        let depth = scene.render_depth(&depth_model, &depth_pose, max_range_mm);
        let cloud = backproject_depth(&depth, max_range_mm).map_err(|e| e.to_string())?;
        for mask in scene.render_masks(&rgb_model, &rgb_pose, &vocabulary) {
            let sub = mask_subcloud(&cloud, &mask, &rgb_model, &rgb_pose).map_err(|e| e.to_string())?;
            let got: BTreeSet<(u32, u32)> = sub.iter().map(|p| (p.u, p.v)).collect();
            let (want, want_centroid) = oracle_subcloud(&depth, max_range_mm, &rgb_model, &rgb_wire, &mask.to_bitmap());
            ensure(got == want, || {
                format!("scene {scene_no} {}: pixel sets differ ({} vs {} oracle)", mask.label, got.len(), want.len())
            })?;
            ensure(got.len() == sub.len(), || format!("scene {scene_no}: duplicate depth pixels in sub-cloud"))?;
            if let (Some(c), Some(w)) = (centroid(&sub), want_centroid) {
                let err = (c - Vector3::from(w)).norm();
                ensure(err <= C4_CENTROID_TOLERANCE_M, || {
                    format!("scene {scene_no} {}: centroid off by {err} m", mask.label)
                })?;
                worst = worst.max(err);
            }
            objects += 1;
            points += sub.len();
        }
    }
    let took = start.elapsed();
    ensure(objects > C4_SCENES, || format!("only {objects} visible objects"))?;
    ensure(took < C4_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("{C4_SCENES} scenes, {objects} objects, {points} points, centroid error {worst:.1e} m, {took:.2?}"))
}

// 5. Projection inverse

fn c5_projection_inverse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut checked) = (0.0f64, 0usize);
    for cam_no in 0..C5_CAMERAS {
        let (width, height) = (rng.gen_range(64..640u32), rng.gen_range(48..480u32));
        let model = CameraModel {
            fx: rng.gen_range(100.0..1200.0),
            fy: rng.gen_range(100.0..1200.0),
            cx: rng.gen_range(0.3..0.7) * width as f64,
            cy: rng.gen_range(0.3..0.7) * height as f64,
            width,
            height,
        };
        let pose = Pose::from_wire(&random_pose(&mut rng).to_wire());
        let pixels = (0..width * height)
            .flat_map(|_| if rng.gen_bool(0.1) { 0u16 } else { rng.gen_range(200..6000u16) }.to_le_bytes())
            .collect();
        let frame = CameraFramePayload {
            width,
            height,
            encoding: PixelEncoding::Depth16,
            intrinsics: model.intrinsics(),
            extrinsics: pose.to_wire(),
            pixels,
        };
        let cloud = backproject_depth(&frame, u16::MAX).map_err(|e| e.to_string())?;
        for p in &cloud.points {
            let Projection::Pixel { u, v } = project_to_rgb(&p.world, &model, &pose) else {
                return Err(format!("camera {cam_no}: pixel ({}, {}) projected behind the camera", p.u, p.v));
            };
            let err = (u - p.u as f64).hypot(v - p.v as f64);
            ensure(err < C5_TOLERANCE_PX, || {
                format!("camera {cam_no}: pixel ({}, {}) came back off by {err} px", p.u, p.v)
            })?;
            worst = worst.max(err);
        }
        checked += cloud.len();
    }
    Ok(format!("{C5_CAMERAS} cameras, {checked} pixels, worst error {worst:.1e} px"))
}

// 6. Golden transcript

fn c6_golden_transcript(coffee: &Coffee) -> Outcome {
    let golden = std::fs::read_to_string(asset("tests/golden/coffee_commands.txt")).map_err(|e| e.to_string())?;
    let got = transcript(&coffee.live);
    if got == golden {
        return Ok(format!("{} commands match", golden.lines().count()));
    }
    let line = got
        .lines()
        .zip(golden.lines())
        .position(|(a, b)| a != b)
        .unwrap_or(got.lines().count().min(golden.lines().count()));
    Err(format!("first difference at command {line}"))
}

// 7. Prompt regression

fn c7_prompt_regression() -> Outcome {
    let library = PromptLibrary::builtin();
    let dir = asset("tests/golden/prompts");
    let fixtures: BTreeMap<String, Bindings> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("bindings.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let ids: Vec<String> = library.ids().map(String::from).collect();
    ensure(ids.iter().cloned().collect::<BTreeSet<_>>() == fixtures.keys().cloned().collect(), || {
        format!("fixtures cover {:?}, library has {ids:?}", fixtures.keys().collect::<Vec<_>>())
    })?;
    for (id, bindings) in &fixtures {
        let golden = std::fs::read_to_string(dir.join(format!("{id}.txt"))).map_err(|e| e.to_string())?;
        let got = library.render(id, bindings).map_err(|e| format!("{id}: {e}"))?;
        ensure(got == golden, || format!("{id}: rendering differs from golden"))?;
        for slot in bindings.keys() {
            let mut missing = bindings.clone();
            missing.remove(slot);
            ensure(matches!(library.render(id, &missing), Err(ServiceError::MissingSlot(s)) if s == *slot), || {
                format!("{id}: missing {slot} accepted")
            })?;
        }
        let mut extra = bindings.clone();
        extra.insert("unexpected".into(), "x".into());
        ensure(matches!(library.render(id, &extra), Err(ServiceError::UnknownSlot(_))), || {
            format!("{id}: unknown slot accepted")
        })?;
    }
    Ok(format!("{} templates match golden renderings", fixtures.len()))
}

// 8. Tracking oracle

struct OracleTrack {
    id: u64,
    label: String,
    centroid: Vector3<f64>,
    last_seen: u64,
}

fn c8_tracking_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let config = TrackerConfig::default();
    let mut tracker = Tracker::new(config);
    let mut oracle: Vec<OracleTrack> = Vec::new();
    let mut next_id = 1;
    let labels = ["mug", "kettle", "bowl"];
    let (mut events, mut time, mut merges) = (0, 0u64, 0);
    while events < C8_EVENTS {
        time += 200_000_000;
        // Coordinates on a 5 cm grid make equal distances common.
        let frame: Vec<Detection3d> = (0..rng.gen_range(1..=3))
            .map(|_| {
                let q = |rng: &mut ChaCha8Rng| rng.gen_range(-8..=8) as f64 * 0.05;
                let centroid = if rng.gen_bool(0.03) {
                    Vector3::new(f64::NAN, 0.0, 0.0)
                } else {
                    Vector3::new(q(&mut rng), q(&mut rng), q(&mut rng))
                };
                Detection3d {
                    label: labels[rng.gen_range(0..labels.len())].into(),
                    centroid,
                    point_count: rng.gen_range(0..40),
                }
            })
            .collect();
        events += frame.len();
        tracker.update(&frame, time);
        for det in &frame {
            if det.point_count < config.min_points || det.centroid.iter().any(|c| !c.is_finite()) {
                continue;
            }
            let mut candidates: Vec<(f64, u64, usize)> = oracle
                .iter()
                .enumerate()
                .filter(|(_, t)| t.label == det.label)
                .map(|(i, t)| ((t.centroid - det.centroid).norm(), t.id, i))
                .filter(|&(d, _, _)| d <= config.merge_radius)
                .collect();
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            match candidates.first() {
                Some(&(_, _, i)) => {
                    let t = &mut oracle[i];
                    t.centroid = t.centroid * (1.0 - config.alpha) + det.centroid * config.alpha;
                    t.last_seen = time;
                    merges += 1;
                }
                None => {
                    oracle.push(OracleTrack {
                        id: next_id,
                        label: det.label.clone(),
                        centroid: det.centroid,
                        last_seen: time,
                    });
                    next_id += 1;
                }
            }
        }
        let got: Vec<_> =
            tracker.tracks().iter().map(|t| (t.track_id, t.label.clone(), t.centroid_world, t.last_seen)).collect();
        let want: Vec<_> =
            oracle.iter().map(|t| (t.id, t.label.clone(), <[f64; 3]>::from(t.centroid), t.last_seen)).collect();
        ensure(got == want, || format!("track sets diverge after {events} events"))?;
    }
    Ok(format!("{events} detections, {} tracks, {merges} merges", oracle.len()))
}

// 9. Throughput

fn c9_throughput(coffee: &Coffee) -> Outcome {
    let start = Instant::now();
    replay(&coffee.live, &coffee.root.join("replay-timed"), &coffee_scenario());
    let took = start.elapsed();
    ensure(took <= C9_BUDGET, || format!("replay of 60 s took {took:.2?}"))?;
    Ok(format!("60 s session replayed in {took:.2?} ({:.0}x real time)", 60.0 / took.as_secs_f64()))
}

// 10. Crash consistency

fn c10_crash_consistency(root: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let config = root.join("crash-config.json");
    std::fs::write(&config, json!({"checkpoint_interval_ms": C10_CHECKPOINT_MS}).to_string()).unwrap();
    let scene = coffee_scenario();
    let (mut unclean, mut torn) = (0, 0);
    for run_no in 0..C10_RUNS {
        let store_root = root.join(format!("crash-{run_no}"));
        let mut served = serve(
            &store_root,
            &["--no-ws-bridge", "--config", config.to_str().unwrap(), "--scene", scene.to_str().unwrap()],
        );
        let mut sim = Command::new(BIN)
            .args(["sim", scene.to_str().unwrap(), "--connect", &served.addr])
            .env("RUST_LOG", "off")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        std::thread::sleep(Duration::from_millis(rng.gen_range(300..2000)));
        served.child.kill().unwrap();
        served.child.wait().unwrap();
        let _ = sim.wait();
        let sessions: Vec<PathBuf> =
            std::fs::read_dir(&store_root).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_dir()).collect();
        ensure(sessions.len() == 1, || format!("run {run_no}: {} session directories", sessions.len()))?;
        let out = run(&["store", "check", sessions[0].to_str().unwrap()]);
        ensure(out.status.success(), || {
            format!("run {run_no}: store check failed: {}", String::from_utf8_lossy(&out.stderr).trim())
        })?;
        let report = check_store(&sessions[0]).map_err(|e| e.to_string())?;
        unclean += !report.clean_shutdown as usize;
        torn += report.streams.iter().filter(|s| s.torn_tail.is_some()).count();
        // A torn frame can only be the last one: everything before it reads back.
        for s in &report.streams {
            let read = taskguide::store::StoreReader::open(&sessions[0]).unwrap().read_stream(s.stream_id).unwrap();
            ensure(read.envelopes.len() as u64 == s.count, || {
                format!("run {run_no}: stream {} reads short", s.stream_id.0)
            })?;
        }
    }
    Ok(format!("{C10_RUNS} killed sessions pass store check ({unclean} unclean, {torn} torn tails)"))
}
