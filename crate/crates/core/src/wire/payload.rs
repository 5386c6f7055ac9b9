//! Per-kind payload schemas. All multi-byte values are little-endian.
//!
//! | kind | layout |
//! |------|--------|
//! | RgbCamera, PreviewCamera, DepthCamera | `width u32, height u32, encoding u8 (0 = NV12, 1 = Depth16), fx f64, fy f64, cx f64, cy f64, extrinsics 16×f32 row-major (camera-to-world), pixels` |
//! | EyeGaze | `position 3×f32, direction 3×f32` |
//! | HeadPose | `16×f32 row-major` |
//! | Hands | `flags u8 (bit 0 left, bit 1 right)`, then 26 poses for each present hand, left first |
//! | Audio | `n×f32` mono PCM at 16 kHz |
//! | TextInput | UTF-8 text |
//! | InterfaceState, InterfaceCommand, Detection, LlmExchange, ControllerTransition | UTF-8 JSON |

use crate::controller::{InterfaceCommand, InterfaceState};

use super::{StreamKind, WireError};

pub const RGB_WIDTH: u32 = 896;
pub const RGB_HEIGHT: u32 = 504;
pub const DEPTH_WIDTH: u32 = 320;
pub const DEPTH_HEIGHT: u32 = 288;
pub const AUDIO_SAMPLE_RATE: u32 = 16_000;
pub const HAND_JOINT_COUNT: usize = 26;

/// Joint order of [`HandsPayload`] entries (same as the OpenXR hand joint set).
pub const HAND_JOINT_NAMES: [&str; HAND_JOINT_COUNT] = [
    "palm",
    "wrist",
    "thumb_metacarpal",
    "thumb_proximal",
    "thumb_distal",
    "thumb_tip",
    "index_metacarpal",
    "index_proximal",
    "index_intermediate",
    "index_distal",
    "index_tip",
    "middle_metacarpal",
    "middle_proximal",
    "middle_intermediate",
    "middle_distal",
    "middle_tip",
    "ring_metacarpal",
    "ring_proximal",
    "ring_intermediate",
    "ring_distal",
    "ring_tip",
    "little_metacarpal",
    "little_proximal",
    "little_intermediate",
    "little_distal",
    "little_tip",
];

const CAMERA_HEADER_LEN: usize = 4 + 4 + 1 + 4 * 8 + 16 * 4;
const POSE_LEN: usize = 64;

/// Row-major 4×4 matrix as carried on the wire.
pub type Matrix4f = [f32; 16];

pub const IDENTITY4: Matrix4f = [
    1.0, 0.0, 0.0, 0.0, //
    0.0, 1.0, 0.0, 0.0, //
    0.0, 0.0, 1.0, 0.0, //
    0.0, 0.0, 0.0, 1.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelEncoding {
    Nv12,
    Depth16,
}

impl PixelEncoding {
    fn code(self) -> u8 {
        match self {
            PixelEncoding::Nv12 => 0,
            PixelEncoding::Depth16 => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self, WireError> {
        match c {
            0 => Ok(PixelEncoding::Nv12),
            1 => Ok(PixelEncoding::Depth16),
            other => Err(violation(format!("unknown pixel encoding {other}"))),
        }
    }

    pub fn pixel_bytes(self, width: u32, height: u32) -> usize {
        let n = width as usize * height as usize;
        match self {
            PixelEncoding::Nv12 => n * 3 / 2,
            PixelEncoding::Depth16 => n * 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraFramePayload {
    pub width: u32,
    pub height: u32,
    pub encoding: PixelEncoding,
    pub intrinsics: Intrinsics,
    pub extrinsics: Matrix4f,
    pub pixels: Vec<u8>,
}

impl CameraFramePayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CAMERA_HEADER_LEN + self.pixels.len());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.push(self.encoding.code());
        for v in [self.intrinsics.fx, self.intrinsics.fy, self.intrinsics.cx, self.intrinsics.cy] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        put_matrix(&mut out, &self.extrinsics);
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < CAMERA_HEADER_LEN {
            return Err(violation(format!("camera frame header needs {CAMERA_HEADER_LEN} bytes, got {}", bytes.len())));
        }
        let mut r = Reader::new(bytes);
        let width = r.u32();
        let height = r.u32();
        let encoding = PixelEncoding::from_code(r.u8())?;
        let intrinsics = Intrinsics { fx: r.f64(), fy: r.f64(), cx: r.f64(), cy: r.f64() };
        let extrinsics = r.matrix();
        let pixels = r.rest().to_vec();
        let frame = CameraFramePayload { width, height, encoding, intrinsics, extrinsics, pixels };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<(), WireError> {
        let expected = self.encoding.pixel_bytes(self.width, self.height);
        if self.pixels.len() != expected {
            return Err(violation(format!(
                "{}x{} {:?} frame needs {expected} pixel bytes, got {}",
                self.width,
                self.height,
                self.encoding,
                self.pixels.len()
            )));
        }
        if self.encoding == PixelEncoding::Nv12 && (!self.width.is_multiple_of(2) || !self.height.is_multiple_of(2)) {
            return Err(violation("NV12 frames need even dimensions".into()));
        }
        let k = &self.intrinsics;
        if !(k.fx > 0.0 && k.fy > 0.0) {
            return Err(violation(format!("focal lengths must be positive (fx={}, fy={})", k.fx, k.fy)));
        }
        if !(k.cx >= 0.0 && k.cx < self.width as f64 && k.cy >= 0.0 && k.cy < self.height as f64) {
            return Err(violation(format!("principal point ({}, {}) outside the image", k.cx, k.cy)));
        }
        validate_pose(&self.extrinsics)
    }

    /// Depth in millimeters at pixel `(u, v)` of a Depth16 frame.
    pub fn depth_mm(&self, u: u32, v: u32) -> u16 {
        let i = 2 * (v as usize * self.width as usize + u as usize);
        u16::from_le_bytes([self.pixels[i], self.pixels[i + 1]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazePayload {
    pub position: [f32; 3],
    pub direction: [f32; 3],
}

impl GazePayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24);
        for v in self.position.iter().chain(self.direction.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        expect_len("gaze", bytes, 24)?;
        let mut r = Reader::new(bytes);
        let position = [r.f32(), r.f32(), r.f32()];
        let direction = [r.f32(), r.f32(), r.f32()];
        let norm = direction.iter().map(|&d| (d as f64) * (d as f64)).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(violation(format!("gaze direction norm {norm} is not 1")));
        }
        Ok(GazePayload { position, direction })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosePayload {
    pub matrix: Matrix4f,
}

impl PosePayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(POSE_LEN);
        put_matrix(&mut out, &self.matrix);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        expect_len("pose", bytes, POSE_LEN)?;
        let matrix = Reader::new(bytes).matrix();
        validate_pose(&matrix)?;
        Ok(PosePayload { matrix })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandsPayload {
    pub left: Option<Vec<PosePayload>>,
    pub right: Option<Vec<PosePayload>>,
}

impl HandsPayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut flags = 0u8;
        if self.left.is_some() {
            flags |= 1;
        }
        if self.right.is_some() {
            flags |= 2;
        }
        let mut out = vec![flags];
        for hand in [&self.left, &self.right].into_iter().flatten() {
            assert_eq!(hand.len(), HAND_JOINT_COUNT, "a present hand carries {HAND_JOINT_COUNT} joints");
            for joint in hand {
                put_matrix(&mut out, &joint.matrix);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let Some((&flags, rest)) = bytes.split_first() else {
            return Err(violation("hands payload is empty".into()));
        };
        if flags & !3 != 0 {
            return Err(violation(format!("unknown hand flags {flags:#04x}")));
        }
        let hands = (flags & 1 != 0) as usize + (flags & 2 != 0) as usize;
        expect_len("hands", rest, hands * HAND_JOINT_COUNT * POSE_LEN)?;
        let mut chunks = rest.chunks_exact(POSE_LEN);
        let mut take_hand = |present: bool| -> Result<Option<Vec<PosePayload>>, WireError> {
            if !present {
                return Ok(None);
            }
            (0..HAND_JOINT_COUNT)
                .map(|_| PosePayload::decode(chunks.next().expect("length checked")))
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
        };
        let left = take_hand(flags & 1 != 0)?;
        let right = take_hand(flags & 2 != 0)?;
        Ok(HandsPayload { left, right })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioPayload {
    pub samples: Vec<f32>,
}

impl AudioPayload {
    pub fn encode(&self) -> Vec<u8> {
        self.samples.iter().flat_map(|s| s.to_le_bytes()).collect()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.is_empty() || !bytes.len().is_multiple_of(4) {
            return Err(violation(format!("audio payload length {} is not a positive multiple of 4", bytes.len())));
        }
        let samples: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        if let Some(bad) = samples.iter().find(|s| !(-1.0..=1.0).contains(*s)) {
            return Err(violation(format!("audio sample {bad} outside [-1, 1]")));
        }
        Ok(AudioPayload { samples })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextInputPayload {
    pub text: String,
}

impl TextInputPayload {
    pub fn encode(&self) -> Vec<u8> {
        self.text.as_bytes().to_vec()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let text = std::str::from_utf8(bytes).map_err(|e| violation(format!("text input is not UTF-8: {e}")))?;
        if text.trim().is_empty() {
            return Err(violation("text input is empty".into()));
        }
        Ok(TextInputPayload { text: text.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TypedPayload {
    Camera(CameraFramePayload),
    Gaze(GazePayload),
    Pose(PosePayload),
    Hands(HandsPayload),
    Audio(AudioPayload),
    Text(TextInputPayload),
    InterfaceState(InterfaceState),
    InterfaceCommand(InterfaceCommand),
    Json(serde_json::Value),
}

/// Decodes `bytes` according to the schema fixed by `kind`.
pub fn decode_payload(kind: StreamKind, bytes: &[u8]) -> Result<TypedPayload, WireError> {
    Ok(match kind {
        StreamKind::RgbCamera | StreamKind::PreviewCamera | StreamKind::DepthCamera => {
            let frame = CameraFramePayload::decode(bytes)?;
            let want = if kind == StreamKind::DepthCamera { PixelEncoding::Depth16 } else { PixelEncoding::Nv12 };
            if frame.encoding != want {
                return Err(violation(format!("{kind:?} frames must be {want:?}, got {:?}", frame.encoding)));
            }
            TypedPayload::Camera(frame)
        }
        StreamKind::EyeGaze => TypedPayload::Gaze(GazePayload::decode(bytes)?),
        StreamKind::HeadPose => TypedPayload::Pose(PosePayload::decode(bytes)?),
        StreamKind::Hands => TypedPayload::Hands(HandsPayload::decode(bytes)?),
        StreamKind::Audio => TypedPayload::Audio(AudioPayload::decode(bytes)?),
        StreamKind::TextInput => TypedPayload::Text(TextInputPayload::decode(bytes)?),
        StreamKind::InterfaceState => TypedPayload::InterfaceState(
            serde_json::from_slice(bytes).map_err(|e| violation(format!("interface state: {e}")))?,
        ),
        StreamKind::InterfaceCommand => TypedPayload::InterfaceCommand(
            serde_json::from_slice(bytes).map_err(|e| violation(format!("interface command: {e}")))?,
        ),
        StreamKind::Detection | StreamKind::LlmExchange | StreamKind::ControllerTransition => {
            TypedPayload::Json(serde_json::from_slice(bytes).map_err(|e| violation(format!("{kind:?}: {e}")))?)
        }
    })
}

/// Checks the homogeneous bottom row and the orthonormality of the rotation block.
pub fn validate_pose(m: &Matrix4f) -> Result<(), WireError> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(violation("pose has non-finite entries".into()));
    }
    let bottom = [m[12], m[13], m[14], m[15]];
    if bottom != [0.0, 0.0, 0.0, 1.0] {
        return Err(violation(format!("pose bottom row {bottom:?} is not (0, 0, 0, 1)")));
    }
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|k| m[k * 4 + i] as f64 * m[k * 4 + j] as f64).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            if (dot - want).abs() > 1e-4 {
                return Err(violation(format!("pose rotation is not orthonormal (column {i}·{j} = {dot})")));
            }
        }
    }
    Ok(())
}

fn violation(msg: String) -> WireError {
    WireError::SchemaViolation(msg)
}

fn expect_len(what: &str, bytes: &[u8], want: usize) -> Result<(), WireError> {
    if bytes.len() != want {
        return Err(violation(format!("{what} payload needs {want} bytes, got {}", bytes.len())));
    }
    Ok(())
}

fn put_matrix(out: &mut Vec<u8>, m: &Matrix4f) {
    for v in m {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.pos..self.pos + N].try_into().unwrap();
        self.pos += N;
        out
    }

    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take())
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }

    fn matrix(&mut self) -> Matrix4f {
        std::array::from_fn(|_| self.f32())
    }

    fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }
}
