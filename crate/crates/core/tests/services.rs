use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taskguide::geometry::{CameraModel, Pose, Scene, SceneObject};
use taskguide::services::prompts::QUESTION_ANSWER;
use taskguide::services::{
    run_detection, Bindings, DetectionRequest, DetectorBackend, DispatchMode, HttpDetector, HttpLlm, HttpSpeech,
    LlmBackend, LlmQuery, MockFixtures, MockSceneDetector, PromptLibrary, RecognizedText, ServiceError, ServiceQueue,
    SpeechBackend, SpeechEvent, StubConfig, StubServer, DEFAULT_TIMEOUT, MOCK_UNKNOWN,
};

fn bindings() -> Bindings {
    BTreeMap::from([
        ("task".to_string(), "make coffee".to_string()),
        ("step".to_string(), "Fill the kettle.".to_string()),
        ("utterance".to_string(), "is the water hot enough".to_string()),
    ])
}

fn query(correlation: u64, bindings: Bindings) -> LlmQuery {
    LlmQuery::new(&PromptLibrary::builtin(), correlation, QUESTION_ANSWER, bindings).unwrap()
}

fn scene() -> Scene {
    Scene {
        objects: vec![
            SceneObject { label: "mug".into(), center: [0.05, 0.02, 0.8], radius: 0.05 },
            SceneObject { label: "kettle".into(), center: [-0.2, 0.0, 1.2], radius: 0.1 },
        ],
    }
}

fn stub(config: StubConfig) -> StubServer {
    StubServer::start("127.0.0.1:0", config).unwrap()
}

#[test]
fn http_llm_returns_the_fixture_body() {
    let mut fixtures = MockFixtures::default();
    fixtures.insert(QUESTION_ANSWER, &bindings(), "QUESTION: yes\nANSWER: Not yet.");
    let server = stub(StubConfig { fixtures, ..StubConfig::default() });
    let llm = HttpLlm::new(&server.url(), Duration::from_secs(5));
    let r = llm.complete(&query(7, bindings())).unwrap();
    assert_eq!((r.correlation, r.text.as_str(), r.backend.as_str()), (7, "QUESTION: yes\nANSWER: Not yet.", "http"));

    let mut other = bindings();
    other.insert("utterance".into(), "something else".into());
    assert_eq!(llm.complete(&query(8, other)).unwrap().text, MOCK_UNKNOWN);
}

#[test]
fn http_speech_relays_scripted_events_in_order() {
    let script = vec![
        RecognizedText::Partial { text: "is the".into() },
        RecognizedText::Partial { text: "is the water".into() },
        RecognizedText::Final { text: "is the water hot".into() },
    ];
    let server = stub(StubConfig { asr_script: script, ..StubConfig::default() });
    let asr = HttpSpeech::new(&server.url(), Duration::from_secs(5));
    assert!(asr.consumes_audio());
    let buffer = vec![0.0f32; 1600];
    let mut events = Vec::new();
    for i in 0..4u64 {
        events.extend(asr.on_audio(&buffer, i * 100_000_000).unwrap());
    }
    assert_eq!(
        events,
        [
            SpeechEvent::Partial { text: "is the".into(), time: 0 },
            SpeechEvent::Partial { text: "is the water".into(), time: 100_000_000 },
            SpeechEvent::Final { text: "is the water hot".into(), time: 200_000_000 },
        ]
    );
}

#[test]
fn http_detector_matches_the_in_process_renderer() {
    let server = stub(StubConfig { scene: scene(), ..StubConfig::default() });
    let camera = CameraModel { fx: 300.0, fy: 300.0, cx: 160.0, cy: 120.0, width: 320, height: 240 };
    let request = DetectionRequest {
        correlation: 3,
        frame_time: 1,
        camera,
        pose: Pose::identity(),
        vocabulary: vec!["mug".into(), "kettle".into(), "bowl".into()],
        image: Arc::new(vec![128; 320 * 240 * 3 / 2]),
    };
    let remote = run_detection(&HttpDetector::new(&server.url(), Duration::from_secs(5)), &request).unwrap();
    let local = run_detection(&MockSceneDetector::new(scene()), &request).unwrap();
    assert_eq!(remote.masks.len(), 2);
    assert_eq!(remote, local);
}

#[test]
fn http_errors_carry_status_and_body() {
    let server = stub(StubConfig::default());
    let detector = HttpDetector::new(&server.url(), Duration::from_secs(5));
    let camera = CameraModel { fx: 1.0, fy: 1.0, cx: 500.0, cy: 0.0, width: 4, height: 2 };
    let request = DetectionRequest {
        correlation: 1,
        frame_time: 1,
        camera,
        pose: Pose::identity(),
        vocabulary: vec!["mug".into()],
        image: Arc::new(vec![0; 12]),
    };
    match detector.detect(&request) {
        Err(ServiceError::BackendError { status: 400, body }) => assert!(body.contains("error"), "{body}"),
        other => panic!("expected a 400, got {other:?}"),
    }

    let closed = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let llm = HttpLlm::new(&format!("http://{closed}"), Duration::from_secs(5));
    assert!(matches!(llm.complete(&query(1, bindings())), Err(ServiceError::BackendError { status: 0, .. })));
}

#[test]
fn slow_backend_times_out_at_the_default_deadline() {
    let server = stub(StubConfig { complete_delay: Duration::from_secs(60), ..StubConfig::default() });
    let llm = HttpLlm::new(&server.url(), DEFAULT_TIMEOUT);
    let start = Instant::now();
    let result = llm.complete(&query(1, bindings()));
    let took = start.elapsed();
    assert_eq!(result, Err(ServiceError::BackendTimeout));
    assert!(took >= Duration::from_secs(29) && took <= Duration::from_secs(31), "{took:?}");
}

#[test]
fn every_request_resolves_exactly_once_under_faults() {
    // Injected panics would otherwise print (and capture) a backtrace each.
    let previous_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut queue: ServiceQueue<u64> =
        ServiceQueue::new(DispatchMode::Threaded { timeout: Duration::from_millis(1000) });
    let n = 200u64;
    for correlation in 1..=n {
        let fault = rng.gen_range(0..4);
        let delay = Duration::from_millis(rng.gen_range(0..60));
        queue.submit(correlation, move || {
            std::thread::sleep(delay);
            match fault {
                0 => Ok(correlation * 10),
                1 => Err(ServiceError::BackendError { status: 503, body: "busy".into() }),
                2 => {
                    std::thread::sleep(Duration::from_millis(1500));
                    Ok(correlation * 10)
                }
                _ => panic!("injected backend panic"),
            }
        });
    }
    let mut seen: BTreeMap<u64, Result<u64, ServiceError>> = BTreeMap::new();
    let deadline = Instant::now() + Duration::from_secs(20);
    while queue.pending() > 0 {
        assert!(Instant::now() < deadline, "{} requests never resolved", queue.pending());
        if let Some(c) = queue.next_timeout(Duration::from_millis(100)) {
            assert!(
                seen.insert(c.correlation, c.result.clone()).is_none(),
                "correlation {} completed twice",
                c.correlation
            );
            if let Ok(v) = c.result {
                assert_eq!(v, c.correlation * 10);
            }
        }
    }
    // Late answers from timed-out calls must not surface as extra completions.
    std::thread::sleep(Duration::from_millis(700));
    std::panic::set_hook(previous_hook);
    assert!(queue.try_next().is_none());
    assert_eq!(seen.keys().copied().collect::<Vec<_>>(), (1..=n).collect::<Vec<_>>());
    assert!(seen.values().any(|r| *r == Err(ServiceError::BackendTimeout)));
    assert!(seen.values().any(|r| matches!(r, Err(ServiceError::BackendError { status: 0, .. }))), "{seen:?}");
}

#[test]
fn inline_dispatch_completes_in_submission_order() {
    let mut queue: ServiceQueue<u64> = ServiceQueue::new(DispatchMode::Inline);
    for c in [5, 3, 9] {
        queue.submit(c, move || Ok(c));
    }
    let order: Vec<u64> = std::iter::from_fn(|| queue.try_next()).map(|c| c.correlation).collect();
    assert_eq!(order, [5, 3, 9]);
    assert_eq!(queue.pending(), 0);
}
