#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use labgrader_core::domain::{AssignmentId, CourseId, SubmissionId, TestCaseId, Visibility};
use labgrader_core::dut::DutProfile;
use labgrader_core::reference;
use labgrader_server::clock::Clock;
use labgrader_server::config::{SchedulerConfig, ServerConfig, TestbedToken};
use labgrader_server::{start, RunningServer};
use labgrader_testbed::{HashSource, RunningCoordinator, TestbedConfig};
use reqwest::{Method, StatusCode};
use serde_json::{json, Value};

pub const PASSWORD: &str = "correct horse";

pub fn fast_scheduler() -> SchedulerConfig {
    SchedulerConfig {
        poll_min_ms: 20,
        poll_max_ms: 60,
        job_poll_ms: 20,
        reaper_interval_ms: 50,
        reconcile_interval_ms: 50,
        ..SchedulerConfig::default()
    }
}

pub fn testbed_token(name: &str) -> String {
    format!("token-{name}")
}

pub async fn server(clock: Arc<dyn Clock>, testbeds: &[&str]) -> RunningServer {
    let cfg = ServerConfig {
        listen: "127.0.0.1:0".parse().unwrap(),
        testbeds: testbeds
            .iter()
            .map(|t| TestbedToken {
                testbed_id: labgrader_core::domain::TestbedId::new(*t),
                token: testbed_token(t),
            })
            .collect(),
        scheduler: fast_scheduler(),
        ..ServerConfig::default()
    };
    start(cfg, clock).await.unwrap()
}

pub async fn coordinator(server_url: &str, name: &str, profile: &DutProfile) -> RunningCoordinator {
    let mut cfg = TestbedConfig::new(name, profile, server_url, &testbed_token(name));
    cfg.heartbeat_interval_s = 0.1;
    labgrader_testbed::start(cfg, HashSource::InMemory).await.unwrap()
}

/// A logged-in HTTP caller.
#[derive(Clone)]
pub struct Caller {
    pub http: reqwest::Client,
    pub base: String,
    pub token: Option<String>,
    pub username: String,
}

impl Caller {
    pub async fn call(&self, method: Method, path: &str, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = self.http.request(method, format!("{}{path}", self.base));
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status();
        let text = resp.text().await.unwrap();
        let value = serde_json::from_str(&text).unwrap_or(Value::String(text));
        (status, value)
    }

    pub async fn raw(&self, path: &str) -> (StatusCode, String) {
        let mut req = self.http.get(format!("{}{path}", self.base));
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().await.unwrap();
        (resp.status(), resp.text().await.unwrap())
    }

    pub async fn get(&self, path: &str) -> (StatusCode, Value) {
        self.call(Method::GET, path, None).await
    }

    pub async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, path, Some(body)).await
    }
}

pub async fn account(server: &RunningServer, username: &str) -> Caller {
    server.state.create_account(username, username, PASSWORD).unwrap();
    login(server, username).await
}

pub async fn login(server: &RunningServer, username: &str) -> Caller {
    let anon = Caller {
        http: reqwest::Client::new(),
        base: server.base_url.clone(),
        token: None,
        username: username.to_owned(),
    };
    let (status, body) = anon
        .post("/auth/login", json!({ "username": username, "password": PASSWORD }))
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    Caller {
        token: Some(body["token"].as_str().unwrap().to_owned()),
        ..anon
    }
}

pub struct CourseFixture {
    pub course: CourseId,
    pub assignment: AssignmentId,
    pub test_cases: Vec<(TestCaseId, Visibility)>,
}

/// A course run by `instructor` with `students`, one assignment and one test
/// case per visibility tier.
pub async fn course(
    instructor: &Caller,
    students: &[&Caller],
    deadline: DateTime<Utc>,
    visibilities: &[Visibility],
) -> CourseFixture {
    let roster: Vec<Value> = students
        .iter()
        .map(|s| json!({ "username": s.username, "role": "student" }))
        .collect();
    let (status, c) = instructor.post("/courses", json!({ "title": "Embedded", "roster": roster })).await;
    assert_eq!(status, StatusCode::CREATED, "{c}");
    let course: CourseId = serde_json::from_value(c["id"].clone()).unwrap();
    let (status, a) = instructor
        .post(
            &format!("/courses/{course}/assignments"),
            json!({ "statement": "PWM", "dut_profile": "dut-v1", "deadline": deadline }),
        )
        .await;
    assert_eq!(status, StatusCode::CREATED, "{a}");
    let assignment: AssignmentId = serde_json::from_value(a["id"].clone()).unwrap();
    let fixtures = reference::fixtures();
    let mut test_cases = Vec::new();
    for (i, vis) in visibilities.iter().enumerate() {
        let f = &fixtures[i % 2];
        let (status, tc) = instructor
            .post(
                &format!("/assignments/{assignment}/testcases"),
                json!({ "visibility": vis, "sessions": f.sessions, "capture": f.config }),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{tc}");
        test_cases.push((serde_json::from_value(tc["id"].clone()).unwrap(), *vis));
    }
    CourseFixture {
        course,
        assignment,
        test_cases,
    }
}

pub async fn submit(student: &Caller, assignment: AssignmentId, source: &str) -> SubmissionId {
    let (status, body) = student
        .post(&format!("/assignments/{assignment}/submissions"), json!({ "source": source }))
        .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{body}");
    serde_json::from_value(body["submission_id"].clone()).unwrap()
}

/// Polls until the submission leaves the queue.
pub async fn wait_terminal(caller: &Caller, id: SubmissionId, limit: Duration) -> Value {
    let start = std::time::Instant::now();
    loop {
        let (status, body) = caller.get(&format!("/submissions/{id}")).await;
        if status == StatusCode::OK {
            return body;
        }
        assert_eq!(status, StatusCode::CONFLICT, "{body}");
        assert_eq!(body["error"], "not_graded_yet");
        assert!(start.elapsed() < limit, "submission {id} not graded within {limit:?}");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

pub fn in_a_week() -> DateTime<Utc> {
    Utc::now() + chrono::Duration::days(7)
}

/// A descriptor for a testbed that exists only in the test.
pub fn fake_descriptor(name: &str, endpoint: &str) -> labgrader_core::protocol::TestbedDescriptor {
    use labgrader_core::dut::Pin;
    use labgrader_core::protocol::{Capabilities, TestbedDescriptor, TestbedStatus};
    TestbedDescriptor {
        testbed_id: labgrader_core::domain::TestbedId::new(name),
        dut_profile: "dut-v1".into(),
        capabilities: Capabilities {
            max_sample_rate_hz: 1_000_000,
            pins: vec![Pin(0), Pin(1)],
        },
        wiring: [("ch0".to_owned(), Pin(0)), ("ch1".to_owned(), Pin(1))].into_iter().collect(),
        status: TestbedStatus::Idle,
        config_hash: "00".into(),
        endpoint: endpoint.into(),
        heartbeat_interval_s: 10.0,
    }
}

/// Drives a pending submission to graded straight through the store, giving
/// every test case the same session score.
pub fn inject_grade(server: &RunningServer, id: SubmissionId, session_score: f64) {
    use labgrader_core::domain::{ArtifactRefs, CompileStatus, GradeReport, TestCaseResult};
    use labgrader_server::store::{Fifo, StoredArtifacts};
    let store = &server.state.store;
    let now = server.state.clock.now();
    let tb = fake_descriptor("injector", "http://127.0.0.1:9");
    let claimed = store
        .claim_next_pending(&tb, now + chrono::Duration::hours(1), &Fifo)
        .expect("a pending submission");
    assert_eq!(claimed.id, id, "only one submission should be pending");
    store.start_execution(id, &tb.testbed_id).unwrap();
    let rec = store.submission(id).unwrap();
    let mut entries = Vec::new();
    let mut artifacts = Vec::new();
    for tc in store.test_cases(&rec.test_cases) {
        entries.push(TestCaseResult::new(
            tc.id,
            tc.weight,
            vec![session_score; tc.sessions.len()],
            format!("feedback for {}", tc.id),
            ArtifactRefs::for_submission(id, tc.id),
        ));
        artifacts.push((
            tc.id,
            StoredArtifacts {
                schedule_csv: "start_us,period_us,duty\n".into(),
                capture_rle: "capture\n".into(),
                print_log: String::new(),
            },
        ));
    }
    let report = GradeReport::assemble(CompileStatus::Ok, entries);
    store.complete(id, &tb.testbed_id, report, artifacts, now).unwrap();
}
