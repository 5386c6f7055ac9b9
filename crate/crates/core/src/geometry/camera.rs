//! Pinhole camera model and depth back-projection.
//!
//! Pixel `(u, v)` covers the continuous square `[u, u+1) × [v, v+1)`; its center
//! is `(u + 0.5, v + 0.5)`. Camera frame axes: x right, y down, z forward.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Pose};
use crate::wire::{CameraFramePayload, Intrinsics, PixelEncoding};

/// Default far clip for depth samples, millimeters.
pub const DEFAULT_MAX_RANGE_MM: u16 = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.fx.is_finite()
            && self.fy.is_finite()
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidIntrinsics(format!("{self:?}")))
        }
    }

    pub fn of_frame(frame: &CameraFramePayload) -> CameraModel {
        let k = frame.intrinsics;
        CameraModel { fx: k.fx, fy: k.fy, cx: k.cx, cy: k.cy, width: frame.width, height: frame.height }
    }

    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics { fx: self.fx, fy: self.fy, cx: self.cx, cy: self.cy }
    }

    /// Camera-frame point for pixel `(u, v)` at depth `z` meters.
    pub fn backproject_pixel(&self, u: u32, v: u32, z: f64) -> Vector3<f64> {
        Vector3::new((u as f64 + 0.5 - self.cx) * z / self.fx, (v as f64 + 0.5 - self.cy) * z / self.fy, z)
    }

    /// Continuous pixel coordinates of a camera-frame point, or `None` behind the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx - 0.5, self.fy * p.y / p.z + self.cy - 0.5))
    }

    /// Ray direction (camera frame, z = 1) through the center of pixel `(u, v)`.
    pub fn pixel_ray(&self, u: u32, v: u32) -> Vector3<f64> {
        self.backproject_pixel(u, v, 1.0)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Pixel { u: f64, v: f64 },
    Behind,
}

/// Projects a world point into a camera with pose `pose` (camera-to-world).
pub fn project_to_rgb(world: &Vector3<f64>, model: &CameraModel, pose: &Pose) -> Projection {
    let cam = pose.inverse().transform_point(world);
    match model.project(&cam) {
        Some((u, v)) => Projection::Pixel { u, v },
        None => Projection::Behind,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub world: Vector3<f64>,
    /// Source depth pixel.
    pub u: u32,
    pub v: u32,
}

/// World-frame points of a depth image, in row-major pixel order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Back-projects a Depth16 frame through its own intrinsics and extrinsics.
/// Pixels with zero depth or depth at or beyond `max_range_mm` are skipped.
pub fn backproject_depth(frame: &CameraFramePayload, max_range_mm: u16) -> Result<PointCloud, GeometryError> {
    if frame.encoding != PixelEncoding::Depth16 {
        return Err(GeometryError::WrongEncoding(frame.encoding));
    }
    let model = CameraModel::of_frame(frame);
    model.validate()?;
    let pose = Pose::from_wire(&frame.extrinsics);
    let mut points = Vec::new();
    for v in 0..frame.height {
        for u in 0..frame.width {
            let d = frame.depth_mm(u, v);
            if d == 0 || d >= max_range_mm {
                continue;
            }
            let cam = model.backproject_pixel(u, v, d as f64 / 1000.0);
            points.push(CloudPoint { world: pose.transform_point(&cam), u, v });
        }
    }
    Ok(PointCloud { points })
}

/// Back-projects a floating-point depth grid (meters, row-major, 0 = no sample).
pub fn backproject_depth_m(
    model: &CameraModel,
    pose: &Pose,
    depth_m: &[f64],
    max_range_m: f64,
) -> Result<PointCloud, GeometryError> {
    model.validate()?;
    if depth_m.len() != model.pixel_count() {
        return Err(GeometryError::DimensionMismatch {
            expected: (model.width, model.height),
            got: format!("{} depth samples", depth_m.len()),
        });
    }
    let mut points = Vec::new();
    for (i, &z) in depth_m.iter().enumerate() {
        if z <= 0.0 || z >= max_range_m {
            continue;
        }
        let (u, v) = ((i % model.width as usize) as u32, (i / model.width as usize) as u32);
        points.push(CloudPoint { world: pose.transform_point(&model.backproject_pixel(u, v, z)), u, v });
    }
    Ok(PointCloud { points })
}
