//! Analytic renderer for scenes of labeled spheres.
//!
//! Scene JSON:
//!
//! ```json
//! { "objects": [ { "label": "mug", "center": [0.1, 0.2, 0.9], "radius": 0.06 } ] }
//! ```
//!
//! Coordinates are world-frame meters. The renderer casts one ray through each
//! pixel center and keeps the nearest positive hit.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{CameraModel, DetectionMask, Pose};
use crate::wire::{CameraFramePayload, PixelEncoding};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub label: String,
    pub center: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default)]
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn load(path: &Path) -> std::io::Result<Scene> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Nearest hit along `origin + s·dir` for `s > 0`, as `(s, object index)`.
    pub fn cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (i, obj) in self.objects.iter().enumerate() {
            if let Some(s) = ray_sphere(origin, dir, &Vector3::from(obj.center), obj.radius) {
                if best.is_none_or(|(b, _)| s < b) {
                    best = Some((s, i));
                }
            }
        }
        best
    }

    /// Camera-frame z of the nearest surface per pixel (row-major, 0 = no hit
    /// or at/beyond `max_range_m`).
    pub fn render_depth_exact(&self, model: &CameraModel, pose: &Pose, max_range_m: f64) -> Vec<f64> {
        let origin = pose.translation();
        let rot = pose.rotation();
        let mut out = Vec::with_capacity(model.pixel_count());
        for v in 0..model.height {
            for u in 0..model.width {
                // camera-frame ray has z = 1, so the ray parameter is the z-depth
                let dir = rot * model.pixel_ray(u, v);
                let z = match self.cast(&origin, &dir) {
                    Some((s, _)) if s < max_range_m => s,
                    _ => 0.0,
                };
                out.push(z);
            }
        }
        out
    }

    /// Depth16 frame (millimeters, rounded) carrying `model` and `pose`.
    pub fn render_depth(&self, model: &CameraModel, pose: &Pose, max_range_mm: u16) -> CameraFramePayload {
        let exact = self.render_depth_exact(model, pose, f64::INFINITY);
        let pixels = exact
            .iter()
            .flat_map(|&z| {
                let mm = (z * 1000.0).round();
                let d = if z <= 0.0 || mm >= max_range_mm as f64 { 0u16 } else { mm as u16 };
                d.to_le_bytes()
            })
            .collect();
        CameraFramePayload {
            width: model.width,
            height: model.height,
            encoding: PixelEncoding::Depth16,
            intrinsics: model.intrinsics(),
            extrinsics: pose.to_wire(),
            pixels,
        }
    }

    /// One mask per visible object whose label is in `vocabulary`; a pixel
    /// belongs to the object its ray hits first.
    pub fn render_masks(&self, model: &CameraModel, pose: &Pose, vocabulary: &[String]) -> Vec<DetectionMask> {
        let wanted: Vec<usize> =
            (0..self.objects.len()).filter(|&i| vocabulary.iter().any(|w| *w == self.objects[i].label)).collect();
        if wanted.is_empty() {
            return Vec::new();
        }
        let n = model.pixel_count();
        let mut owner = vec![usize::MAX; n];
        let origin = pose.translation();
        let rot = pose.rotation();
        for v in 0..model.height {
            for u in 0..model.width {
                if let Some((_, i)) = self.cast(&origin, &(rot * model.pixel_ray(u, v))) {
                    owner[v as usize * model.width as usize + u as usize] = i;
                }
            }
        }
        wanted
            .into_iter()
            .filter_map(|i| {
                let bits: Vec<bool> = owner.iter().map(|&o| o == i).collect();
                bits.iter().any(|&b| b).then(|| {
                    DetectionMask::from_bitmap(self.objects[i].label.clone(), 0.9, model.width, model.height, &bits)
                })
            })
            .collect()
    }
}

fn ray_sphere(origin: &Vector3<f64>, dir: &Vector3<f64>, center: &Vector3<f64>, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let a = dir.dot(dir);
    let half_b = dir.dot(&oc);
    let c = oc.dot(&oc) - radius * radius;
    let disc = half_b * half_b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let near = (-half_b - sq) / a;
    if near > 0.0 {
        return Some(near);
    }
    let far = (-half_b + sq) / a;
    (far > 0.0).then_some(far)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::backproject_depth_m;

    fn depth_cam() -> CameraModel {
        CameraModel { fx: 180.0, fy: 180.0, cx: 160.5, cy: 144.5, width: 320, height: 288 }
    }

    fn sphere_scene() -> Scene {
        Scene { objects: vec![SceneObject { label: "ball".into(), center: [0.0, 0.0, 1.5], radius: 0.2 }] }
    }

    #[test]
    fn sphere_on_axis_center_pixel_is_1300_mm() {
        let frame = sphere_scene().render_depth(&depth_cam(), &Pose::identity(), 4000);
        assert_eq!(frame.depth_mm(160, 144), 1300);
        assert_eq!(frame.depth_mm(0, 0), 0);
    }

    #[test]
    fn empty_scene_is_all_zero() {
        let frame = Scene::default().render_depth(&depth_cam(), &Pose::identity(), 4000);
        assert!(frame.pixels.iter().all(|&b| b == 0));
    }

    #[test]
    fn backprojected_points_lie_on_sphere() {
        let scene = sphere_scene();
        let depth = scene.render_depth_exact(&depth_cam(), &Pose::identity(), 4.0);
        let cloud = backproject_depth_m(&depth_cam(), &Pose::identity(), &depth, 4.0).unwrap();
        assert!(cloud.len() > 1000);
        let c = Vector3::new(0.0, 0.0, 1.5);
        for p in &cloud.points {
            assert!(((p.world - c).norm() - 0.2).abs() < 1e-6);
        }
    }

    #[test]
    fn masks_respect_vocabulary_and_occlusion() {
        let scene = Scene {
            objects: vec![
                SceneObject { label: "front".into(), center: [0.0, 0.0, 1.0], radius: 0.1 },
                SceneObject { label: "back".into(), center: [0.0, 0.0, 2.0], radius: 0.5 },
            ],
        };
        let cam = depth_cam();
        let masks = scene.render_masks(&cam, &Pose::identity(), &["back".into(), "front".into()]);
        assert_eq!(masks.len(), 2);
        let front = masks.iter().find(|m| m.label == "front").unwrap().to_bitmap();
        let back = masks.iter().find(|m| m.label == "back").unwrap().to_bitmap();
        let center = 144 * 320 + 160;
        assert!(front[center] && !back[center]);
        assert!(scene.render_masks(&cam, &Pose::identity(), &["mug".into()]).is_empty());
    }

    #[test]
    fn scene_json_schema() {
        let json = r#"{"objects":[{"label":"mug","center":[0.1,0.2,0.9],"radius":0.06}]}"#;
        let s: Scene = serde_json::from_str(json).unwrap();
        assert_eq!(s.objects[0].label, "mug");
        assert_eq!(serde_json::to_string(&s).unwrap(), json);
    }
}
