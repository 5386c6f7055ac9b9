use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use base64::Engine;
use crossbeam_channel::{unbounded, Receiver, Sender};
use serde::{Deserialize, Serialize};

use super::dispatch::Completion;
use super::http::JsonClient;
use super::ServiceError;
use crate::geometry::{CameraModel, DetectionMask, Pose, Scene};
use crate::wire::Intrinsics;

#[derive(Debug, Clone)]
pub struct DetectionRequest {
    pub correlation: u64,
    pub frame_time: u64,
    pub camera: CameraModel,
    /// Camera-to-world pose of the RGB camera at `frame_time`.
    pub pose: Pose,
    pub vocabulary: Vec<String>,
    /// NV12 pixels of the frame.
    pub image: Arc<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub correlation: u64,
    pub frame_time: u64,
    pub masks: Vec<DetectionMask>,
}

pub trait DetectorBackend: Send + Sync {
    fn id(&self) -> &str;
    fn detect(&self, request: &DetectionRequest) -> Result<Vec<DetectionMask>, ServiceError>;
}

/// Runs `backend` and enforces the result contract: masks cover the request
/// grid and every label belongs to the vocabulary. Masks with other labels
/// are dropped with a warning.
pub fn run_detection(
    backend: &dyn DetectorBackend,
    request: &DetectionRequest,
) -> Result<DetectionResult, ServiceError> {
    if request.vocabulary.is_empty() {
        return Err(ServiceError::InvalidRequest("empty detection vocabulary".into()));
    }
    let mut masks = backend.detect(request)?;
    masks.retain(|m| {
        let ok = request.vocabulary.contains(&m.label)
            && m.width == request.camera.width
            && m.height == request.camera.height
            && m.validate().is_ok();
        if !ok {
            log::warn!("{} detector returned an out-of-contract mask for {:?}; dropped", backend.id(), m.label);
        }
        ok
    });
    Ok(DetectionResult { correlation: request.correlation, frame_time: request.frame_time, masks })
}

/// Renders exact masks from a scene of labeled spheres instead of looking at
/// the pixels.
#[derive(Debug, Clone, Default)]
pub struct MockSceneDetector {
    scene: Scene,
}

impl MockSceneDetector {
    pub fn new(scene: Scene) -> Self {
        MockSceneDetector { scene }
    }
}

impl DetectorBackend for MockSceneDetector {
    fn id(&self) -> &str {
        "mock-scene"
    }

    fn detect(&self, request: &DetectionRequest) -> Result<Vec<DetectionMask>, ServiceError> {
        Ok(self.scene.render_masks(&request.camera, &request.pose, &request.vocabulary))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct DetectBody {
    pub width: u32,
    pub height: u32,
    pub intrinsics: Intrinsics,
    pub extrinsics: [f32; 16],
    pub vocabulary: Vec<String>,
    pub image_nv12_base64: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct DetectReply {
    pub masks: Vec<DetectionMask>,
}

#[derive(Debug, Clone)]
pub struct HttpDetector {
    client: JsonClient,
}

impl HttpDetector {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        HttpDetector { client: JsonClient::new(base_url, timeout) }
    }
}

impl DetectorBackend for HttpDetector {
    fn id(&self) -> &str {
        "http"
    }

    fn detect(&self, request: &DetectionRequest) -> Result<Vec<DetectionMask>, ServiceError> {
        let body = DetectBody {
            width: request.camera.width,
            height: request.camera.height,
            intrinsics: request.camera.intrinsics(),
            extrinsics: request.pose.to_wire(),
            vocabulary: request.vocabulary.clone(),
            image_nv12_base64: base64::engine::general_purpose::STANDARD.encode(request.image.as_slice()),
        };
        let reply: DetectReply = self.client.post("/detect", &body)?;
        Ok(reply.masks)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkerCounters {
    pub submitted: u64,
    pub started: u64,
    pub completed: u64,
    pub superseded: u64,
}

#[derive(Default)]
struct Slot {
    queued: Option<DetectionRequest>,
    shutdown: bool,
    counters: WorkerCounters,
}

/// Background detector with drop-if-busy admission: at most one request runs
/// and at most one waits; a newer submission replaces the waiting one.
pub struct DetectorWorker {
    shared: Arc<(Mutex<Slot>, Condvar)>,
    completions: Receiver<Completion<DetectionResult>>,
    handle: Option<JoinHandle<()>>,
}

impl DetectorWorker {
    pub fn spawn(backend: Arc<dyn DetectorBackend>) -> Self {
        let shared = Arc::new((Mutex::new(Slot::default()), Condvar::new()));
        let (tx, rx) = unbounded();
        let worker_shared = Arc::clone(&shared);
        let handle = std::thread::Builder::new()
            .name("detector".into())
            .spawn(move || worker_loop(backend, worker_shared, tx))
            .expect("spawn detector thread");
        DetectorWorker { shared, completions: rx, handle: Some(handle) }
    }

    /// Queues `request`, superseding any request still waiting.
    pub fn submit(&self, request: DetectionRequest) {
        let (lock, cv) = &*self.shared;
        let mut slot = lock.lock().expect("detector slot poisoned");
        slot.counters.submitted += 1;
        if slot.queued.replace(request).is_some() {
            slot.counters.superseded += 1;
        }
        cv.notify_one();
    }

    pub fn completions(&self) -> &Receiver<Completion<DetectionResult>> {
        &self.completions
    }

    pub fn counters(&self) -> WorkerCounters {
        self.shared.0.lock().expect("detector slot poisoned").counters
    }
}

impl Drop for DetectorWorker {
    fn drop(&mut self) {
        {
            let (lock, cv) = &*self.shared;
            if let Ok(mut slot) = lock.lock() {
                slot.shutdown = true;
            }
            cv.notify_all();
        }
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn worker_loop(
    backend: Arc<dyn DetectorBackend>,
    shared: Arc<(Mutex<Slot>, Condvar)>,
    tx: Sender<Completion<DetectionResult>>,
) {
    let (lock, cv) = &*shared;
    loop {
        let request = {
            let mut slot = lock.lock().expect("detector slot poisoned");
            loop {
                if slot.shutdown {
                    return;
                }
                if let Some(r) = slot.queued.take() {
                    slot.counters.started += 1;
                    break r;
                }
                slot = cv.wait(slot).expect("detector slot poisoned");
            }
        };
        let correlation = request.correlation;
        let result = run_detection(backend.as_ref(), &request);
        lock.lock().expect("detector slot poisoned").counters.completed += 1;
        if tx.send(Completion { correlation, result }).is_err() {
            return;
        }
    }
}
