//! Renders a depth frame and detector masks for a small scene, lifts the
//! depth into a world point cloud and places each detected object at the
//! centroid of the points under its mask.

use std::sync::Arc;

use nalgebra::Vector3;
use taskguide::geometry::{backproject_depth, centroid, mask_subcloud, CameraModel, Pose, Scene, SceneObject};
use taskguide::services::{run_detection, DetectionRequest, MockSceneDetector};

fn main() {
    let scene = Scene {
        objects: vec![
            SceneObject { label: "mug".into(), center: [0.25, 0.95, 1.0], radius: 0.05 },
            SceneObject { label: "kettle".into(), center: [-0.2, 1.0, 1.3], radius: 0.1 },
        ],
    };
    let head = Pose::from_yaw_pitch(Vector3::new(0.0, 1.4, 0.0), 0.0, 0.35);
    let rgb = CameraModel { fx: 400.0, fy: 400.0, cx: 320.0, cy: 240.0, width: 640, height: 480 };
    let depth_cam = CameraModel { fx: 180.0, fy: 180.0, cx: 160.0, cy: 144.0, width: 320, height: 288 };

    let depth = scene.render_depth(&depth_cam, &head, 4000);
    let cloud = backproject_depth(&depth, 4000).unwrap();
    println!("{} depth points", cloud.len());

    let request = DetectionRequest {
        correlation: 1,
        frame_time: 0,
        camera: rgb,
        pose: head,
        vocabulary: vec!["mug".into(), "kettle".into()],
        image: Arc::new(vec![0; 640 * 480 * 3 / 2]),
    };
    let result = run_detection(&MockSceneDetector::new(scene.clone()), &request).unwrap();
    for mask in &result.masks {
        let points = mask_subcloud(&cloud, mask, &rgb, &head).unwrap();
        let truth = scene.objects.iter().find(|o| o.label == mask.label).unwrap();
        match centroid(&points) {
            Some(c) => println!(
                "{:<7} {:>5} mask px {:>4} points  centroid ({:.3}, {:.3}, {:.3})  center ({:.3}, {:.3}, {:.3})",
                mask.label,
                mask.set_count(),
                points.len(),
                c.x,
                c.y,
                c.z,
                truth.center[0],
                truth.center[1],
                truth.center[2]
            ),
            None => println!("{:<7} no depth support", mask.label),
        }
    }
}
