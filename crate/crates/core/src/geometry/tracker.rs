//! Distance-based tracking of object centroids.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Same-label detections closer than this (meters) update an existing track.
    pub merge_radius: f64,
    /// Exponential smoothing weight of the new observation.
    pub alpha: f64,
    pub min_points: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self { merge_radius: 0.25, alpha: 0.5, min_points: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection3d {
    pub label: String,
    pub centroid: Vector3<f64>,
    pub point_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedObject {
    pub track_id: u64,
    pub label: String,
    pub centroid_world: [f64; 3],
    pub point_count: usize,
    pub last_seen: u64,
    pub announced: bool,
}

impl TrackedObject {
    pub fn centroid(&self) -> Vector3<f64> {
        Vector3::from(self.centroid_world)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrackEvent {
    ObjectFound { track_id: u64, label: String, centroid: Vector3<f64> },
}

#[derive(Debug, Clone, Default)]
pub struct Tracker {
    config: TrackerConfig,
    tracks: Vec<TrackedObject>,
    next_id: u64,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Self {
        Self { config, tracks: Vec::new(), next_id: 1 }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Immutable view for readers; tracks are ordered by id.
    pub fn tracks(&self) -> &[TrackedObject] {
        &self.tracks
    }

    pub fn mark_announced(&mut self, track_id: u64) {
        if let Some(t) = self.tracks.iter_mut().find(|t| t.track_id == track_id) {
            t.announced = true;
        }
    }

    /// Folds one frame's detections into the track set, in the given order.
    ///
    /// Each detection goes to the nearest same-label track within the merge
    /// radius (lowest id on equal distance), otherwise it opens a new track.
    /// Detections below `min_points`, or with non-finite centroids, are ignored.
    pub fn update(&mut self, detections: &[Detection3d], time: u64) -> Vec<TrackEvent> {
        let mut events = Vec::new();
        for det in detections {
            if det.point_count < self.config.min_points || !det.centroid.iter().all(|c| c.is_finite()) {
                continue;
            }
            let mut best: Option<(f64, usize)> = None;
            for (i, track) in self.tracks.iter().enumerate() {
                if track.label != det.label {
                    continue;
                }
                let dist = (track.centroid() - det.centroid).norm();
                if dist <= self.config.merge_radius && best.is_none_or(|(d, _)| dist < d) {
                    best = Some((dist, i));
                }
            }
            match best {
                Some((_, i)) => {
                    let track = &mut self.tracks[i];
                    let a = self.config.alpha;
                    let c = track.centroid() * (1.0 - a) + det.centroid * a;
                    track.centroid_world = c.into();
                    track.point_count = det.point_count;
                    track.last_seen = time;
                }
                None => {
                    let track_id = self.next_id;
                    self.next_id += 1;
                    self.tracks.push(TrackedObject {
                        track_id,
                        label: det.label.clone(),
                        centroid_world: det.centroid.into(),
                        point_count: det.point_count,
                        last_seen: time,
                        announced: false,
                    });
                    events.push(TrackEvent::ObjectFound { track_id, label: det.label.clone(), centroid: det.centroid });
                }
            }
        }
        events
    }
}
