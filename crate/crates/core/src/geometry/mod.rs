//! Camera models, pose algebra, RGB/depth pairing, mask back-projection and
//! object tracking.

mod camera;
mod mask;
mod pose;
mod scene;
mod sync;
mod tracker;

use thiserror::Error;

pub use camera::{
    backproject_depth, backproject_depth_m, project_to_rgb, CameraModel, CloudPoint, PointCloud, Projection,
    DEFAULT_MAX_RANGE_MM,
};
pub use mask::{centroid, mask_subcloud, DetectionMask};
pub use pose::Pose;
pub use scene::{Scene, SceneObject};
pub use sync::{pair_rgb_depth, PairStats, Paired, RgbdSynchronizer};
pub use tracker::{Detection3d, TrackEvent, TrackedObject, Tracker, TrackerConfig};

use crate::wire::PixelEncoding;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("dimension mismatch: expected {expected:?}, got {got}")]
    DimensionMismatch { expected: (u32, u32), got: String },
    #[error("expected a Depth16 frame, got {0:?}")]
    WrongEncoding(PixelEncoding),
    #[error("malformed mask: {0}")]
    BadMask(String),
}
