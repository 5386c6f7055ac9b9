//! Synthetic headset sensors.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Scenario;
use crate::geometry::{CameraModel, Pose};
use crate::wire::{
    AudioPayload, CameraFramePayload, GazePayload, HandsPayload, PixelEncoding, PosePayload, StreamDescriptor,
    StreamId, StreamKind, StreamManifest, AUDIO_SAMPLE_RATE, DEPTH_HEIGHT, DEPTH_WIDTH, HAND_JOINT_COUNT, RGB_HEIGHT,
    RGB_WIDTH,
};

pub const RGB_STREAM: StreamId = StreamId(1);
pub const PREVIEW_STREAM: StreamId = StreamId(2);
pub const DEPTH_STREAM: StreamId = StreamId(3);
pub const GAZE_STREAM: StreamId = StreamId(4);
pub const HEAD_STREAM: StreamId = StreamId(5);
pub const HANDS_STREAM: StreamId = StreamId(6);
pub const AUDIO_STREAM: StreamId = StreamId(7);
pub const TEXT_STREAM: StreamId = StreamId(8);
pub const STATE_STREAM: StreamId = StreamId(9);

pub const CAMERA_RATE_HZ: f64 = 5.0;
pub const GAZE_RATE_HZ: f64 = 30.0;
pub const HEAD_RATE_HZ: f64 = 30.0;
pub const HANDS_RATE_HZ: f64 = 20.0;
/// Audio is sent in 100 ms buffers.
pub const AUDIO_BUFFER_RATE_HZ: f64 = 10.0;
pub const AUDIO_BUFFER_SAMPLES: usize = (AUDIO_SAMPLE_RATE / 10) as usize;

pub fn rgb_camera() -> CameraModel {
    CameraModel { fx: 600.0, fy: 600.0, cx: 448.0, cy: 252.0, width: RGB_WIDTH, height: RGB_HEIGHT }
}

pub fn depth_camera() -> CameraModel {
    CameraModel { fx: 180.0, fy: 180.0, cx: 160.0, cy: 144.0, width: DEPTH_WIDTH, height: DEPTH_HEIGHT }
}

/// Depth camera pose relative to the head (RGB camera) frame.
pub fn depth_mount() -> Pose {
    Pose::from_translation(Vector3::new(0.0, -0.03, 0.01))
}

/// Headset streams, with the Table 1 rates.
pub fn client_manifest(session_id: uuid::Uuid, epoch_utc: u64) -> StreamManifest {
    let d = |id: StreamId, name: &str, kind: StreamKind, rate: f64| StreamDescriptor {
        stream_id: id,
        name: name.into(),
        kind,
        nominal_rate_hz: rate,
    };
    StreamManifest {
        session_id,
        epoch_utc,
        streams: vec![
            d(RGB_STREAM, "camera.rgb", StreamKind::RgbCamera, CAMERA_RATE_HZ),
            d(PREVIEW_STREAM, "camera.preview", StreamKind::PreviewCamera, CAMERA_RATE_HZ),
            d(DEPTH_STREAM, "camera.depth", StreamKind::DepthCamera, CAMERA_RATE_HZ),
            d(GAZE_STREAM, "eyes.gaze", StreamKind::EyeGaze, GAZE_RATE_HZ),
            d(HEAD_STREAM, "head.pose", StreamKind::HeadPose, HEAD_RATE_HZ),
            d(HANDS_STREAM, "hands", StreamKind::Hands, HANDS_RATE_HZ),
            d(AUDIO_STREAM, "audio", StreamKind::Audio, AUDIO_SAMPLE_RATE as f64),
            d(TEXT_STREAM, "speech.text", StreamKind::TextInput, 0.0),
            d(STATE_STREAM, "interface.state", StreamKind::InterfaceState, 0.0),
        ],
    }
}

/// Sample times of a periodic stream in `[0, duration_ns)`.
pub fn sample_times(rate_hz: f64, duration_ns: u64) -> Vec<u64> {
    (0u64..).map(|k| (k as f64 * 1e9 / rate_hz).round() as u64).take_while(|&t| t < duration_ns).collect()
}

/// Periodic streams and their sample rates (audio in buffers per second).
pub fn periodic_streams() -> [(StreamId, f64); 7] {
    [
        (RGB_STREAM, CAMERA_RATE_HZ),
        (PREVIEW_STREAM, CAMERA_RATE_HZ),
        (DEPTH_STREAM, CAMERA_RATE_HZ),
        (GAZE_STREAM, GAZE_RATE_HZ),
        (HEAD_STREAM, HEAD_RATE_HZ),
        (HANDS_STREAM, HANDS_RATE_HZ),
        (AUDIO_STREAM, AUDIO_BUFFER_RATE_HZ),
    ]
}

/// Renders sensor payloads for a scenario.
pub struct SensorRig<'a> {
    scenario: &'a Scenario,
    max_range_mm: u16,
    rgb_offset: u8,
    preview_offset: u8,
}

impl<'a> SensorRig<'a> {
    pub fn new(scenario: &'a Scenario, max_range_mm: u16) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        SensorRig { scenario, max_range_mm, rgb_offset: rng.gen(), preview_offset: rng.gen() }
    }

    pub fn head_pose(&self, t_ns: u64) -> Pose {
        self.scenario.head_pose(t_ns as f64 * 1e-9)
    }

    /// Payload of periodic stream `stream` at `t_ns`.
    pub fn sample(&self, stream: StreamId, t_ns: u64) -> Vec<u8> {
        let head = self.head_pose(t_ns);
        let frame_index = (t_ns / 200_000_000) as u8;
        match stream {
            RGB_STREAM => nv12_frame(&rgb_camera(), &head, self.rgb_offset.wrapping_add(frame_index)).encode(),
            PREVIEW_STREAM => nv12_frame(&rgb_camera(), &head, self.preview_offset.wrapping_add(frame_index)).encode(),
            DEPTH_STREAM => self
                .scenario
                .scene
                .render_depth(&depth_camera(), &head.compose(&depth_mount()), self.max_range_mm)
                .encode(),
            GAZE_STREAM => {
                let p = head.translation();
                let dir = (head.rotation() * Vector3::new(0.0, 0.1, 1.0)).normalize();
                GazePayload {
                    position: [p.x as f32, p.y as f32, p.z as f32],
                    direction: [dir.x as f32, dir.y as f32, dir.z as f32],
                }
                .encode()
            }
            HEAD_STREAM => PosePayload { matrix: head.to_wire() }.encode(),
            HANDS_STREAM => {
                let joints = (0..HAND_JOINT_COUNT)
                    .map(|j| {
                        let local = Pose::from_translation(Vector3::new(0.15 + 0.005 * j as f64, 0.25, 0.4));
                        PosePayload { matrix: head.compose(&local).to_wire() }
                    })
                    .collect();
                HandsPayload { left: None, right: Some(joints) }.encode()
            }
            AUDIO_STREAM => AudioPayload { samples: vec![0.0; AUDIO_BUFFER_SAMPLES] }.encode(),
            other => panic!("stream {other} is not periodic"),
        }
    }
}

/// Diagonal gradient; the mock detector never looks at the pixels.
fn nv12_frame(model: &CameraModel, pose: &Pose, offset: u8) -> CameraFramePayload {
    let (w, h) = (model.width as usize, model.height as usize);
    let mut pixels = Vec::with_capacity(w * h * 3 / 2);
    for v in 0..h {
        pixels.extend((0..w).map(|u| ((u + v) as u8).wrapping_add(offset)));
    }
    pixels.resize(w * h * 3 / 2, 128);
    CameraFramePayload {
        width: model.width,
        height: model.height,
        encoding: PixelEncoding::Nv12,
        intrinsics: model.intrinsics(),
        extrinsics: pose.to_wire(),
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::decode_payload;

    #[test]
    fn sample_counts_follow_rates() {
        let ten_s = 10_000_000_000;
        assert_eq!(sample_times(CAMERA_RATE_HZ, ten_s).len(), 50);
        assert_eq!(sample_times(GAZE_RATE_HZ, ten_s).len(), 300);
        assert_eq!(sample_times(HANDS_RATE_HZ, ten_s).len(), 200);
        let gaze = sample_times(GAZE_RATE_HZ, ten_s);
        for (k, t) in gaze.iter().enumerate() {
            let ideal = k as f64 * 1e9 / 30.0;
            assert!((*t as f64 - ideal).abs() <= 1e6);
        }
    }

    #[test]
    fn every_payload_passes_schema_checks() {
        let scenario = Scenario::from_json(
            r#"{"duration_s": 1, "scene": {"objects": [{"label": "mug", "center": [0, 0, 1], "radius": 0.1}]}}"#,
        )
        .unwrap();
        let rig = SensorRig::new(&scenario, 4000);
        let manifest = client_manifest(uuid::Uuid::nil(), 0);
        for (id, _) in periodic_streams() {
            let kind = manifest.descriptor(id).unwrap().kind;
            decode_payload(kind, &rig.sample(id, 123_000_000)).unwrap();
        }
    }
}
