//! The processing graph shared by live sessions and replay: one function of
//! the ordered input envelope sequence.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;

use super::clock::PipelineClock;
use super::config::{load_scene, AsrConfig, ConfigError, DetectorConfig, GeometryConfig, LlmConfig, ServerConfig};
use super::streams::{COMMAND_STREAM, DETECTION_STREAM, LLM_STREAM, TRANSITION_STREAM};
use crate::controller::{
    Controller, ControllerConfig, ControllerEvent, InterfaceState, ServiceRequest, SynthesisPhase,
};
use crate::geometry::{
    backproject_depth, centroid, mask_subcloud, CameraModel, Detection3d, Pose, RgbdSynchronizer, Scene, TrackEvent,
    Tracker,
};
use crate::services::{
    run_detection, Completion, DetectionRequest, DetectionResult, DetectorBackend, DetectorWorker, DispatchMode,
    HttpDetector, HttpLlm, HttpSpeech, LlmBackend, LlmQuery, LlmResponse, MockLlm, MockSceneDetector, MockSpeech,
    PromptLibrary, ServiceQueue, SpeechBackend, SpeechEvent,
};
use crate::wire::{
    AudioPayload, CameraFramePayload, SensorEnvelope, StreamId, StreamKind, StreamManifest, TextInputPayload,
};

/// Service backends plus how their calls are scheduled.
pub struct Services {
    pub prompts: PromptLibrary,
    pub llm: Arc<dyn LlmBackend>,
    pub llm_mode: DispatchMode,
    pub detector: Arc<dyn DetectorBackend>,
    /// Run detection on a background worker with drop-if-busy admission
    /// instead of inline.
    pub detector_async: bool,
    pub speech: Arc<dyn SpeechBackend>,
    pub speech_mode: DispatchMode,
}

impl Services {
    pub fn from_config(config: &ServerConfig) -> Result<Self, ConfigError> {
        let prompts = config.load_prompts()?;
        let (llm, llm_mode): (Arc<dyn LlmBackend>, _) = match &config.llm {
            LlmConfig::Mock { .. } => (Arc::new(MockLlm::new(config.load_fixtures()?)), DispatchMode::Inline),
            LlmConfig::Http { url, .. } => {
                // The HTTP client enforces the timeout itself; the dispatcher
                // bound only catches a wedged transport.
                let t = config.llm_timeout();
                (Arc::new(HttpLlm::new(url, t)), DispatchMode::Threaded { timeout: t + Duration::from_secs(1) })
            }
        };
        let (detector, detector_async): (Arc<dyn DetectorBackend>, _) = match &config.detector {
            DetectorConfig::Mock { scene } => {
                let scene = match scene {
                    Some(p) => load_scene(p)?,
                    None => Scene::default(),
                };
                (Arc::new(MockSceneDetector::new(scene)), false)
            }
            DetectorConfig::Http { url, .. } => (Arc::new(HttpDetector::new(url, config.detector_timeout())), true),
        };
        let (speech, speech_mode): (Arc<dyn SpeechBackend>, _) = match &config.asr {
            AsrConfig::Mock => (Arc::new(MockSpeech), DispatchMode::Inline),
            AsrConfig::Http { url, .. } => {
                let t = config.asr_timeout();
                (Arc::new(HttpSpeech::new(url, t)), DispatchMode::Threaded { timeout: t + Duration::from_secs(1) })
            }
        };
        Ok(Services { prompts, llm, llm_mode, detector, detector_async, speech, speech_mode })
    }

    pub fn is_mock(&self) -> bool {
        self.llm_mode == DispatchMode::Inline && !self.detector_async && self.speech_mode == DispatchMode::Inline
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PipelineStats {
    pub envelopes: u64,
    pub commands: u64,
    pub detections: u64,
    pub llm_requests: u64,
    pub objects_found: u64,
}

#[derive(Serialize)]
struct MaskSummary<'a> {
    label: &'a str,
    confidence: f32,
    pixels: u64,
}

#[derive(Serialize)]
struct ObjectSummary<'a> {
    label: &'a str,
    centroid: [f64; 3],
    points: usize,
}

#[derive(Serialize)]
struct FoundSummary<'a> {
    track_id: u64,
    label: &'a str,
    centroid: [f64; 3],
}

#[derive(Serialize)]
struct DetectionRecord<'a> {
    correlation: u64,
    rgb_time: u64,
    depth_time: u64,
    vocabulary: &'a [String],
    masks: Vec<MaskSummary<'a>>,
    objects: Vec<ObjectSummary<'a>>,
    found: Vec<FoundSummary<'a>>,
}

#[derive(Serialize)]
struct LlmRecord<'a> {
    query: &'a LlmQuery,
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<&'a LlmResponse>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Frames kept for a detection request until its result arrives.
struct PendingDetection {
    rgb_time: u64,
    depth_time: u64,
    rgb_model: CameraModel,
    rgb_pose: Pose,
    depth: CameraFramePayload,
    vocabulary: Vec<String>,
}

pub struct Pipeline {
    kinds: HashMap<StreamId, StreamKind>,
    rgb_stream: Option<StreamId>,
    depth_stream: Option<StreamId>,
    controller: Controller,
    tracker: Tracker,
    sync: RgbdSynchronizer<Arc<SensorEnvelope>, Arc<SensorEnvelope>>,
    services: Services,
    llm_queue: ServiceQueue<LlmResponse>,
    llm_pending: BTreeMap<u64, LlmQuery>,
    speech_queue: ServiceQueue<Vec<SpeechEvent>>,
    next_speech: u64,
    detector_worker: Option<DetectorWorker>,
    detections_pending: BTreeMap<u64, PendingDetection>,
    next_detection: u64,
    vocabulary: Vec<String>,
    geometry: GeometryConfig,
    tick_interval: u64,
    next_tick: u64,
    last_out: HashMap<StreamId, u64>,
    events: VecDeque<(u64, ControllerEvent)>,
    out: Vec<SensorEnvelope>,
    clock: PipelineClock,
    stats: PipelineStats,
}

impl Pipeline {
    /// `inputs` lists the streams that will be fed to [`Pipeline::ingest`].
    pub fn new(
        inputs: &StreamManifest,
        controller: ControllerConfig,
        services: Services,
        geometry: GeometryConfig,
        tick_interval_ms: u64,
        clock: PipelineClock,
    ) -> Self {
        let kinds: HashMap<StreamId, StreamKind> = inputs.streams.iter().map(|d| (d.stream_id, d.kind)).collect();
        let rgb_stream = inputs.first_of_kind(StreamKind::RgbCamera).map(|d| d.stream_id);
        let depth_stream = inputs.first_of_kind(StreamKind::DepthCamera).map(|d| d.stream_id);
        let detector_worker = services.detector_async.then(|| DetectorWorker::spawn(Arc::clone(&services.detector)));
        Pipeline {
            kinds,
            rgb_stream,
            depth_stream,
            controller: Controller::new(controller),
            tracker: Tracker::new(geometry.tracker()),
            sync: RgbdSynchronizer::new(geometry.sync_tolerance_ns()),
            llm_queue: ServiceQueue::new(services.llm_mode),
            speech_queue: ServiceQueue::new(services.speech_mode),
            services,
            llm_pending: BTreeMap::new(),
            next_speech: 1,
            detector_worker,
            detections_pending: BTreeMap::new(),
            next_detection: 1,
            vocabulary: Vec::new(),
            geometry,
            tick_interval: tick_interval_ms * 1_000_000,
            next_tick: 0,
            last_out: HashMap::new(),
            events: VecDeque::new(),
            out: Vec::new(),
            clock,
            stats: PipelineStats::default(),
        }
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    pub fn clock(&self) -> &PipelineClock {
        &self.clock
    }

    pub fn stats(&self) -> &PipelineStats {
        &self.stats
    }

    /// Processes one input envelope; returns the derived envelopes it caused.
    pub fn ingest(&mut self, env: SensorEnvelope) -> Vec<SensorEnvelope> {
        let t = env.originating_time;
        self.clock.observe(t);
        self.stats.envelopes += 1;
        self.run_ticks(t);
        let kind = self.kinds.get(&env.stream_id).copied();
        let pairs = match kind {
            Some(StreamKind::TextInput) => {
                match TextInputPayload::decode(&env.payload) {
                    Ok(p) => {
                        for e in self.services.speech.on_text(&p.text, t) {
                            self.speech_event(t, e);
                        }
                    }
                    Err(e) => log::warn!("skipping text input at {t}: {e}"),
                }
                self.sync.advance(t)
            }
            Some(StreamKind::Audio) if self.services.speech.consumes_audio() => {
                match AudioPayload::decode(&env.payload) {
                    Ok(a) => {
                        let speech = Arc::clone(&self.services.speech);
                        let id = self.next_speech;
                        self.next_speech += 1;
                        self.speech_queue.submit(id, move || speech.on_audio(&a.samples, t));
                        self.drain_inline_speech(t);
                    }
                    Err(e) => log::warn!("skipping audio at {t}: {e}"),
                }
                self.sync.advance(t)
            }
            Some(StreamKind::InterfaceState) => {
                match serde_json::from_slice::<InterfaceState>(&env.payload) {
                    Ok(s) => self.interface_state(t, s),
                    Err(e) => log::warn!("skipping interface state at {t}: {e}"),
                }
                self.sync.advance(t)
            }
            _ if Some(env.stream_id) == self.rgb_stream => self.sync.push_rgb(t, Arc::new(env)),
            _ if Some(env.stream_id) == self.depth_stream => self.sync.push_depth(t, Arc::new(env)),
            _ => self.sync.advance(t),
        };
        self.process_events();
        for p in pairs {
            self.handle_pair(t, p.rgb_time, &p.rgb, p.pair_time, &p.depth);
        }
        std::mem::take(&mut self.out)
    }

    /// Collects completions of background service calls (live mode only).
    pub fn poll_async(&mut self) -> Vec<SensorEnvelope> {
        let now = self.clock.now();
        while let Some(c) = self.llm_queue.try_next() {
            self.llm_completion(now, c);
        }
        while let Some(c) = self.speech_queue.try_next() {
            self.speech_completion(now, c);
        }
        let detections: Vec<Completion<DetectionResult>> =
            self.detector_worker.as_ref().map(|w| w.completions().try_iter().collect()).unwrap_or_default();
        for c in detections {
            self.detection_completion(now, c);
        }
        self.process_events();
        std::mem::take(&mut self.out)
    }

    /// Flushes frames still waiting for a partner at end of input.
    pub fn finish(&mut self) -> Vec<SensorEnvelope> {
        let now = self.clock.now();
        for p in self.sync.finish() {
            self.handle_pair(now, p.rgb_time, &p.rgb, p.pair_time, &p.depth);
        }
        self.process_events();
        std::mem::take(&mut self.out)
    }

    fn run_ticks(&mut self, t: u64) {
        while self.next_tick <= t {
            let tick = self.next_tick;
            self.next_tick += self.tick_interval;
            self.events.push_back((tick, ControllerEvent::Tick { time: tick }));
            self.process_events();
        }
    }

    fn emit(&mut self, stream: StreamId, trigger: u64, payload: Vec<u8>) {
        let t = match self.last_out.get(&stream) {
            Some(&last) => trigger.max(last + 1),
            None => trigger,
        };
        self.last_out.insert(stream, t);
        self.out.push(SensorEnvelope::new(stream, t, payload));
    }

    fn speech_event(&mut self, t: u64, e: SpeechEvent) {
        if let SpeechEvent::Final { text, .. } = e {
            self.events.push_back((t, ControllerEvent::FinalUtterance { text }));
        }
    }

    fn interface_state(&mut self, t: u64, s: InterfaceState) {
        for e in s.synthesis_events {
            if e.event == SynthesisPhase::Finished {
                self.events.push_back((t, ControllerEvent::SynthesisFinished { utterance_id: e.utterance_id }));
            }
        }
        if s.palm_open_up.is_some() || s.panel_pose.is_some() {
            self.events
                .push_back((t, ControllerEvent::UiState { palm_open_up: s.palm_open_up, panel_pose: s.panel_pose }));
        }
    }

    fn process_events(&mut self) {
        while let Some((trigger, event)) = self.events.pop_front() {
            let transition = self.controller.handle(trigger, &event);
            for cmd in &transition.commands {
                self.stats.commands += 1;
                self.emit(COMMAND_STREAM, trigger, cmd.to_payload());
            }
            if let Some(change) = &transition.phase_change {
                self.emit(TRANSITION_STREAM, trigger, serde_json::to_vec(change).expect("transition serializes"));
            }
            for req in transition.requests {
                match req {
                    ServiceRequest::SetDetectionVocabulary { labels } => self.vocabulary = labels,
                    ServiceRequest::Llm { correlation, template_id, bindings } => {
                        self.stats.llm_requests += 1;
                        match LlmQuery::new(&self.services.prompts, correlation, &template_id, bindings) {
                            Ok(query) => {
                                let llm = Arc::clone(&self.services.llm);
                                let q = query.clone();
                                self.llm_pending.insert(correlation, query);
                                self.llm_queue.submit(correlation, move || llm.complete(&q));
                                if self.llm_queue.mode() == DispatchMode::Inline {
                                    while let Some(c) = self.llm_queue.try_next() {
                                        self.llm_completion(trigger, c);
                                    }
                                }
                            }
                            Err(e) => {
                                log::error!("cannot render {template_id}: {e}");
                                self.events.push_back((
                                    trigger,
                                    ControllerEvent::LlmFailed { correlation, error: e.to_string() },
                                ));
                            }
                        }
                    }
                }
            }
        }
    }

    fn llm_completion(&mut self, trigger: u64, c: Completion<LlmResponse>) {
        let Some(query) = self.llm_pending.remove(&c.correlation) else {
            log::warn!("completion for unknown llm request {}", c.correlation);
            return;
        };
        let record = LlmRecord {
            query: &query,
            response: c.result.as_ref().ok(),
            error: c.result.as_ref().err().map(|e| e.to_string()),
        };
        let payload = serde_json::to_vec(&record).expect("llm record serializes");
        self.emit(LLM_STREAM, trigger, payload);
        let event = match c.result {
            Ok(r) => ControllerEvent::LlmCompleted { correlation: c.correlation, text: r.text },
            Err(e) => ControllerEvent::LlmFailed { correlation: c.correlation, error: e.to_string() },
        };
        self.events.push_back((trigger, event));
    }

    fn drain_inline_speech(&mut self, t: u64) {
        if self.speech_queue.mode() == DispatchMode::Inline {
            while let Some(c) = self.speech_queue.try_next() {
                self.speech_completion(t, c);
            }
        }
    }

    fn speech_completion(&mut self, t: u64, c: Completion<Vec<SpeechEvent>>) {
        match c.result {
            Ok(events) => {
                for e in events {
                    self.speech_event(t, e);
                }
            }
            Err(e) => log::warn!("speech recognition failed: {e}"),
        }
    }

    fn handle_pair(
        &mut self,
        trigger: u64,
        rgb_time: u64,
        rgb: &SensorEnvelope,
        depth_time: u64,
        depth: &SensorEnvelope,
    ) {
        if self.vocabulary.is_empty() {
            return;
        }
        let (rgb_frame, depth_frame) =
            match (CameraFramePayload::decode(&rgb.payload), CameraFramePayload::decode(&depth.payload)) {
                (Ok(r), Ok(d)) => (r, d),
                (Err(e), _) | (_, Err(e)) => {
                    log::warn!("skipping undecodable camera frame at {rgb_time}: {e}");
                    return;
                }
            };
        let rgb_model = CameraModel::of_frame(&rgb_frame);
        if let Err(e) = rgb_model.validate() {
            log::warn!("skipping RGB frame at {rgb_time}: {e}");
            return;
        }
        let rgb_pose = Pose::from_wire(&rgb_frame.extrinsics);
        let correlation = self.next_detection;
        self.next_detection += 1;
        let request = DetectionRequest {
            correlation,
            frame_time: rgb_time,
            camera: rgb_model,
            pose: rgb_pose,
            vocabulary: self.vocabulary.clone(),
            image: Arc::new(rgb_frame.pixels),
        };
        let pending = PendingDetection {
            rgb_time,
            depth_time,
            rgb_model,
            rgb_pose,
            depth: depth_frame,
            vocabulary: self.vocabulary.clone(),
        };
        match &self.detector_worker {
            Some(worker) => {
                // Only the newest waiting request can still run; older unstarted
                // ones were superseded.
                self.detections_pending.insert(correlation, pending);
                worker.submit(request);
            }
            None => {
                let result = run_detection(self.services.detector.as_ref(), &request);
                self.detection_result(trigger, pending, result.map(|r| r.masks));
                self.process_events();
            }
        }
    }

    fn detection_completion(&mut self, trigger: u64, c: Completion<DetectionResult>) {
        // Everything submitted before this request either ran already or was superseded.
        let stale: Vec<u64> = self.detections_pending.range(..c.correlation).map(|(k, _)| *k).collect();
        for k in stale {
            self.detections_pending.remove(&k);
        }
        if let Some(p) = self.detections_pending.remove(&c.correlation) {
            self.detection_result(trigger, p, c.result.map(|r| r.masks));
        }
    }

    fn detection_result(
        &mut self,
        trigger: u64,
        p: PendingDetection,
        masks: Result<Vec<crate::geometry::DetectionMask>, crate::services::ServiceError>,
    ) {
        let masks = match masks {
            Ok(m) => m,
            Err(e) => {
                log::warn!("detection for frame {} failed: {e}", p.rgb_time);
                return;
            }
        };
        self.stats.detections += 1;
        let cloud = match backproject_depth(&p.depth, self.geometry.max_range_mm) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("cannot back-project depth frame {}: {e}", p.depth_time);
                return;
            }
        };
        let mut detections = Vec::new();
        for mask in &masks {
            match mask_subcloud(&cloud, mask, &p.rgb_model, &p.rgb_pose) {
                Ok(points) if points.len() >= self.geometry.min_points => {
                    let c = centroid(&points).expect("non-empty sub-cloud");
                    detections.push(Detection3d { label: mask.label.clone(), centroid: c, point_count: points.len() });
                }
                Ok(_) => {}
                Err(e) => log::warn!("mask {:?} rejected: {e}", mask.label),
            }
        }
        let events = self.tracker.update(&detections, p.rgb_time);
        let mut found = Vec::new();
        for TrackEvent::ObjectFound { track_id, label, centroid } in events {
            self.tracker.mark_announced(track_id);
            self.stats.objects_found += 1;
            let position = [centroid.x, centroid.y, centroid.z];
            found.push((track_id, label.clone(), position));
            self.events.push_back((trigger, ControllerEvent::ObjectFound { label, position, track_id }));
        }
        let record = DetectionRecord {
            correlation: self.next_detection - 1,
            rgb_time: p.rgb_time,
            depth_time: p.depth_time,
            vocabulary: &p.vocabulary,
            masks: masks
                .iter()
                .map(|m| MaskSummary { label: &m.label, confidence: m.confidence, pixels: m.set_count() })
                .collect(),
            objects: detections
                .iter()
                .map(|d| ObjectSummary {
                    label: &d.label,
                    centroid: [d.centroid.x, d.centroid.y, d.centroid.z],
                    points: d.point_count,
                })
                .collect(),
            found: found.iter().map(|(id, l, c)| FoundSummary { track_id: *id, label: l, centroid: *c }).collect(),
        };
        let payload = serde_json::to_vec(&record).expect("detection record serializes");
        self.emit(DETECTION_STREAM, trigger, payload);
    }
}
