use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{CameraModel, CloudPoint, GeometryError, PointCloud, Pose};

/// Run-length-encoded binary mask over an image grid.
///
/// `runs` alternate unset/set counts in row-major order, starting with an
/// unset run (which may be zero). The runs sum to `width × height`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMask {
    pub label: String,
    pub confidence: f32,
    pub width: u32,
    pub height: u32,
    pub runs: Vec<u32>,
}

impl DetectionMask {
    pub fn from_bitmap(label: impl Into<String>, confidence: f32, width: u32, height: u32, bits: &[bool]) -> Self {
        assert_eq!(bits.len(), width as usize * height as usize);
        let mut runs = Vec::new();
        let mut current = false;
        let mut count = 0u32;
        for &b in bits {
            if b == current {
                count += 1;
            } else {
                runs.push(count);
                current = b;
                count = 1;
            }
        }
        runs.push(count);
        DetectionMask { label: label.into(), confidence, width, height, runs }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let total: u64 = self.runs.iter().map(|&r| r as u64).sum();
        if total != self.width as u64 * self.height as u64 {
            return Err(GeometryError::BadMask(format!(
                "runs sum to {total}, expected {}x{}",
                self.width, self.height
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(GeometryError::BadMask(format!("confidence {} outside [0, 1]", self.confidence)));
        }
        Ok(())
    }

    pub fn to_bitmap(&self) -> Vec<bool> {
        let mut bits = Vec::with_capacity(self.width as usize * self.height as usize);
        let mut set = false;
        for &run in &self.runs {
            bits.extend(std::iter::repeat_n(set, run as usize));
            set = !set;
        }
        bits
    }

    pub fn set_count(&self) -> u64 {
        self.runs.iter().skip(1).step_by(2).map(|&r| r as u64).sum()
    }
}

/// Points of `cloud` whose projection into the RGB camera rounds to a set
/// pixel of `mask`.
pub fn mask_subcloud(
    cloud: &PointCloud,
    mask: &DetectionMask,
    rgb_model: &CameraModel,
    rgb_pose: &Pose,
) -> Result<Vec<CloudPoint>, GeometryError> {
    if mask.width != rgb_model.width || mask.height != rgb_model.height {
        return Err(GeometryError::DimensionMismatch {
            expected: (rgb_model.width, rgb_model.height),
            got: format!("{}x{} mask", mask.width, mask.height),
        });
    }
    mask.validate()?;
    let bits = mask.to_bitmap();
    let world_to_cam = rgb_pose.inverse();
    let (w, h) = (rgb_model.width as f64, rgb_model.height as f64);
    let out = cloud
        .points
        .iter()
        .filter(|p| {
            let Some((u, v)) = rgb_model.project(&world_to_cam.transform_point(&p.world)) else {
                return false;
            };
            let (u, v) = (u.round(), v.round());
            u >= 0.0 && v >= 0.0 && u < w && v < h && bits[v as usize * rgb_model.width as usize + u as usize]
        })
        .copied()
        .collect();
    Ok(out)
}

pub fn centroid(points: &[CloudPoint]) -> Option<Vector3<f64>> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.world);
    Some(sum / points.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn rle_round_trips(bits in prop::collection::vec(any::<bool>(), 12)) {
            let m = DetectionMask::from_bitmap("x", 0.5, 4, 3, &bits);
            prop_assert!(m.validate().is_ok());
            prop_assert_eq!(m.to_bitmap(), bits.clone());
            prop_assert_eq!(m.set_count(), bits.iter().filter(|b| **b).count() as u64);
        }
    }

    #[test]
    fn rle_starts_with_unset_run() {
        let m = DetectionMask::from_bitmap("x", 1.0, 3, 1, &[true, true, false]);
        assert_eq!(m.runs, vec![0, 2, 1]);
    }

    #[test]
    fn bad_run_total_rejected() {
        let m = DetectionMask { label: "x".into(), confidence: 1.0, width: 2, height: 2, runs: vec![1, 2] };
        assert!(m.validate().is_err());
    }

    fn cloud_and_camera() -> (PointCloud, CameraModel, Pose) {
        let model = CameraModel { fx: 50.0, fy: 50.0, cx: 8.0, cy: 6.0, width: 16, height: 12 };
        let pose = Pose::identity();
        let depth = vec![2.0; model.pixel_count()];
        let mut cloud = super::super::backproject_depth_m(&model, &pose, &depth, 4.0).unwrap();
        cloud.points.push(CloudPoint { world: Vector3::new(0.0, 0.0, -1.0), u: 0, v: 0 });
        (cloud, model, pose)
    }

    #[test]
    fn full_mask_keeps_every_projectable_point() {
        let (cloud, model, pose) = cloud_and_camera();
        let full = DetectionMask::from_bitmap("all", 1.0, 16, 12, &[true; 192]);
        let sub = mask_subcloud(&cloud, &full, &model, &pose).unwrap();
        assert_eq!(sub.len(), cloud.len() - 1);
    }

    #[test]
    fn empty_mask_keeps_nothing() {
        let (cloud, model, pose) = cloud_and_camera();
        let empty = DetectionMask::from_bitmap("none", 1.0, 16, 12, &[false; 192]);
        assert!(mask_subcloud(&cloud, &empty, &model, &pose).unwrap().is_empty());
    }

    #[test]
    fn mask_size_must_match_camera() {
        let (cloud, model, pose) = cloud_and_camera();
        let wrong = DetectionMask::from_bitmap("x", 1.0, 8, 12, &[true; 96]);
        assert!(matches!(mask_subcloud(&cloud, &wrong, &model, &pose), Err(GeometryError::DimensionMismatch { .. })));
    }
}
