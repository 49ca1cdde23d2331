use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::routing::post;
use axum::{Json, Router};
use labgrader_core::domain::{JobId, SubmissionId, TestCaseId};
use labgrader_core::dut::DutProfile;
use labgrader_core::protocol::{
    ArtifactArchive, GradingJob, JobState, JobStatusBody, JobTestCase, TestbedDescriptor, TestbedStatus,
};
use labgrader_core::{reference, CaptureConfig, Pin, Session};
use labgrader_testbed::{start, HashSource, RunningCoordinator, TestbedConfig};

const TOKEN: &str = "tb-secret";

fn job(source: &str) -> GradingJob {
    GradingJob {
        job_id: JobId::new(),
        submission: SubmissionId::new(),
        dut_profile: "dut-v1".into(),
        source: source.into(),
        test_cases: vec![
            JobTestCase {
                test_case: TestCaseId::new(),
                sessions: vec![Session::new(0, 1000, 0.25)],
                capture: CaptureConfig::new(1_000_000, 20_000, Pin(0)),
            },
            JobTestCase {
                test_case: TestCaseId::new(),
                sessions: vec![Session::new(0, 500, 0.5), Session::new(10_000, 2000, 0.1)],
                capture: CaptureConfig::new(100_000, 30_000, Pin(0)),
            },
        ],
    }
}

async fn coordinator(delay_ms: u64) -> RunningCoordinator {
    let mut cfg = TestbedConfig::new("tb-http", &DutProfile::V1, "http://127.0.0.1:9", TOKEN);
    cfg.service_delay_ms = delay_ms;
    start(cfg, HashSource::InMemory).await.unwrap()
}

async fn run_to_completion(client: &reqwest::Client, base: &str, job: &GradingJob) -> ArtifactArchive {
    let r = client.post(format!("{base}/jobs")).bearer_auth(TOKEN).json(job).send().await.unwrap();
    assert_eq!(r.status(), 202);
    loop {
        let s: JobStatusBody = client
            .get(format!("{base}/jobs/{}", job.job_id))
            .bearer_auth(TOKEN)
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        match s.state {
            JobState::Running => tokio::time::sleep(Duration::from_millis(10)).await,
            JobState::Done => break,
            JobState::Failed => panic!("job failed: {:?}", s.error),
        }
    }
    client
        .get(format!("{base}/jobs/{}/artifacts", job.job_id))
        .bearer_auth(TOKEN)
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap()
}

#[tokio::test]
async fn job_lifecycle_over_http() {
    let tb = coordinator(200).await;
    let base = tb.endpoint.clone();
    let client = reqwest::Client::new();

    let unauth = client.post(format!("{base}/jobs")).json(&job(reference::BLANK)).send().await.unwrap();
    assert_eq!(unauth.status(), 401);

    let first = job(reference::HARDWARE_PWM);
    let r = client.post(format!("{base}/jobs")).bearer_auth(TOKEN).json(&first).send().await.unwrap();
    assert_eq!(r.status(), 202);
    let busy = client
        .post(format!("{base}/jobs"))
        .bearer_auth(TOKEN)
        .json(&job(reference::BLANK))
        .send()
        .await
        .unwrap();
    assert_eq!(busy.status(), 409);
    let early = client
        .get(format!("{base}/jobs/{}/artifacts", first.job_id))
        .bearer_auth(TOKEN)
        .send()
        .await
        .unwrap();
    assert_eq!(early.status(), 409);

    // wait, then fetch
    let mut archive = None;
    for _ in 0..200 {
        let r = client
            .get(format!("{base}/jobs/{}/artifacts", first.job_id))
            .bearer_auth(TOKEN)
            .send()
            .await
            .unwrap();
        if r.status() == 200 {
            archive = Some(r.json::<ArtifactArchive>().await.unwrap());
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    let archive = archive.expect("job finished");
    assert!(archive.compile_status.is_ok());
    assert_eq!(archive.test_cases.len(), 2);
    for tc in &archive.test_cases {
        labgrader_core::engine::files::parse_capture(&tc.capture_rle).unwrap();
        labgrader_core::engine::files::parse_schedule(&tc.schedule_csv).unwrap();
    }

    let health: serde_json::Value = client.get(format!("{base}/health")).send().await.unwrap().json().await.unwrap();
    assert_eq!(health["status"], "idle");

    let del = client
        .delete(format!("{base}/jobs/{}", first.job_id))
        .bearer_auth(TOKEN)
        .send()
        .await
        .unwrap();
    assert_eq!(del.status(), 204);
    let gone = client
        .get(format!("{base}/jobs/{}", first.job_id))
        .bearer_auth(TOKEN)
        .send()
        .await
        .unwrap();
    assert_eq!(gone.status(), 404);
    tb.shutdown();
}

#[tokio::test]
async fn no_stale_firmware_between_jobs() {
    let client = reqwest::Client::new();
    let used = coordinator(0).await;
    run_to_completion(&client, &used.endpoint, &job(reference::HARDWARE_PWM)).await;
    let mut broken = job(reference::COMPILE_ERROR);
    let after_good = run_to_completion(&client, &used.endpoint, &broken).await;

    let fresh = coordinator(0).await;
    broken.job_id = JobId::new();
    let mut on_fresh = run_to_completion(&client, &fresh.endpoint, &broken).await;
    on_fresh.job_id = after_good.job_id;

    assert_eq!(serde_json::to_vec(&after_good).unwrap(), serde_json::to_vec(&on_fresh).unwrap());
    for tc in &after_good.test_cases {
        let cap = labgrader_core::engine::files::parse_capture(&tc.capture_rle).unwrap();
        assert!(cap.is_all_low());
    }
    used.shutdown();
    fresh.shutdown();
}

/// Heartbeats received by the stand-in server, with their bearer token.
type Received = Arc<Mutex<Vec<(Option<String>, TestbedDescriptor)>>>;

#[tokio::test]
async fn heartbeats_carry_status_and_fresh_hash() {
    let seen: Received = Arc::default();
    let sink = seen.clone();
    let app = Router::new().route(
        "/testbeds/heartbeat",
        post(move |headers: axum::http::HeaderMap, Json(d): Json<TestbedDescriptor>| {
            let sink = sink.clone();
            async move {
                let auth = headers.get("authorization").map(|v| v.to_str().unwrap().to_owned());
                sink.lock().unwrap().push((auth, d));
                "ok"
            }
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let server_url = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("testbed.toml");
    let mut cfg = TestbedConfig::new("tb-beat", &DutProfile::V2, &server_url, TOKEN);
    cfg.heartbeat_interval_s = 0.05;
    std::fs::write(&path, cfg.to_toml()).unwrap();
    let tb = start(cfg, HashSource::File(path.clone())).await.unwrap();

    tokio::time::sleep(Duration::from_millis(150)).await;
    let original = labgrader_testbed::config::hash_file(&path).unwrap();
    {
        let beats = seen.lock().unwrap();
        assert!(beats.len() >= 2);
        let (auth, d) = beats.last().unwrap();
        assert_eq!(auth.as_deref(), Some("Bearer tb-secret"));
        assert_eq!(d.status, TestbedStatus::Idle);
        assert_eq!(d.dut_profile, "dut-v2");
        assert_eq!(d.config_hash, original);
        assert_eq!(d.endpoint, tb.endpoint);
    }

    let edited = std::fs::read_to_string(&path).unwrap().replace("service_delay_ms = 0", "service_delay_ms = 5");
    std::fs::write(&path, edited).unwrap();
    let expected = labgrader_testbed::config::hash_file(&path).unwrap();
    assert_ne!(expected, original);
    tokio::time::sleep(Duration::from_millis(150)).await;
    assert_eq!(seen.lock().unwrap().last().unwrap().1.config_hash, expected);
    tb.shutdown();
}
