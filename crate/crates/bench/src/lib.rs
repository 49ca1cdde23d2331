//! Load generator for a grading deployment: fires N identical reference
//! submissions at once, waits for all of them, and reports latency and
//! throughput per (N, testbed count).

pub mod cluster;
pub mod report;
pub mod stats;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use labgrader_core::domain::{AssignmentId, CourseId, SubmissionId, SubmissionState, Visibility};
use labgrader_core::reference;
use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub use cluster::{ClusterConfig, LocalCluster};
pub use stats::LinearFit;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("benchmark aborted: {} submission(s) failed", failed.len())]
    Aborted { failed: Vec<SubmissionId> },
    #[error("{pending} submission(s) still unfinished after {limit:?}")]
    Timeout { pending: usize, limit: Duration },
    #[error("{method} {path} returned {status}: {body}")]
    Api {
        method: Method,
        path: String,
        status: StatusCode,
        body: String,
    },
    #[error(transparent)]
    Http(#[from] reqwest::Error),
    #[error("setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct Credentials {
    pub username: String,
    pub password: String,
}

impl std::str::FromStr for Credentials {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (username, password) = s.split_once(':').ok_or("expected user:password")?;
        Ok(Self {
            username: username.to_owned(),
            password: password.to_owned(),
        })
    }
}

/// A deployment to load: its base URL plus an instructor who can create
/// courses and a student to submit as.
#[derive(Clone, Debug)]
pub struct Target {
    pub base_url: String,
    pub instructor: Credentials,
    pub student: Credentials,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub ns: Vec<usize>,
    pub testbeds: Vec<usize>,
    /// Per-job service delay the coordinators are configured with.
    pub delay: Duration,
    pub reps: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            ns: vec![10, 50, 100, 200],
            testbeds: vec![1, 2, 3, 4],
            delay: Duration::from_millis(300),
            reps: 1,
        }
    }
}

/// One batch of N simultaneous submissions.
#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub n: usize,
    pub testbeds: usize,
    pub rep: usize,
    /// Submission to completion, seconds, in submission order.
    pub latencies_s: Vec<f64>,
    pub mean_s: f64,
    pub median_s: f64,
    pub p95_s: f64,
    /// Graded submissions per second over the whole batch.
    pub throughput: f64,
    pub submissions: Vec<SubmissionId>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BenchResult {
    pub runs: Vec<RunResult>,
}

/// Metrics pooled over repetitions of one (N, T) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub n: usize,
    pub testbeds: usize,
    pub mean_s: f64,
    pub median_s: f64,
    pub p95_s: f64,
    pub jobs_per_s: f64,
}

impl BenchResult {
    /// One cell per (N, T), ordered by T then N.
    pub fn cells(&self) -> Vec<Cell> {
        let mut grouped: BTreeMap<(usize, usize), Vec<&RunResult>> = BTreeMap::new();
        for r in &self.runs {
            grouped.entry((r.testbeds, r.n)).or_default().push(r);
        }
        grouped
            .into_iter()
            .map(|((testbeds, n), runs)| {
                let samples: Vec<f64> = runs.iter().flat_map(|r| r.latencies_s.iter().copied()).collect();
                let throughputs: Vec<f64> = runs.iter().map(|r| r.throughput).collect();
                Cell {
                    n,
                    testbeds,
                    mean_s: stats::mean(&samples),
                    median_s: stats::median(&samples),
                    p95_s: stats::percentile(&samples, 95.0),
                    jobs_per_s: stats::mean(&throughputs),
                }
            })
            .collect()
    }

    /// Least-squares fit of mean latency against N for each testbed count.
    pub fn fits(&self) -> BTreeMap<usize, LinearFit> {
        let mut points: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for c in self.cells() {
            let (x, y) = points.entry(c.testbeds).or_default();
            x.push(c.n as f64);
            y.push(c.mean_s);
        }
        points
            .into_iter()
            .filter_map(|(t, (x, y))| stats::linear_fit(&x, &y).map(|f| (t, f)))
            .collect()
    }

    pub fn cell(&self, n: usize, testbeds: usize) -> Option<Cell> {
        self.cells().into_iter().find(|c| c.n == n && c.testbeds == testbeds)
    }
}

/// A logged-in API session.
#[derive(Clone)]
pub struct ApiSession {
    http: reqwest::Client,
    base: String,
    token: String,
}

impl ApiSession {
    pub async fn login(http: reqwest::Client, base: &str, who: &Credentials) -> Result<Self, BenchError> {
        let mut s = Self {
            http,
            base: base.trim_end_matches('/').to_owned(),
            token: String::new(),
        };
        let body: Value = s
            .call(
                Method::POST,
                "/auth/login",
                Some(json!({ "username": who.username, "password": who.password })),
            )
            .await?;
        s.token = body["token"]
            .as_str()
            .ok_or_else(|| BenchError::Setup("login response without token".into()))?
            .to_owned();
        Ok(s)
    }

    pub async fn call<T: DeserializeOwned>(&self, method: Method, path: &str, body: Option<Value>) -> Result<T, BenchError> {
        let mut req = self.http.request(method.clone(), format!("{}{path}", self.base));
        if !self.token.is_empty() {
            req = req.bearer_auth(&self.token);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().await?;
        let status = resp.status();
        if !status.is_success() {
            return Err(BenchError::Api {
                method,
                path: path.to_owned(),
                status,
                body: resp.text().await.unwrap_or_default(),
            });
        }
        Ok(resp.json().await?)
    }

    pub async fn get_text(&self, path: &str) -> Result<String, BenchError> {
        let resp = self.http.get(format!("{}{path}", self.base)).bearer_auth(&self.token).send().await?;
        let status = resp.status();
        let body = resp.text().await?;
        if !status.is_success() {
            return Err(BenchError::Api {
                method: Method::GET,
                path: path.to_owned(),
                status,
                body,
            });
        }
        Ok(body)
    }

    pub async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, BenchError> {
        self.call(Method::GET, path, None).await
    }

    pub async fn post<T: DeserializeOwned>(&self, path: &str, body: Value) -> Result<T, BenchError> {
        self.call(Method::POST, path, Some(body)).await
    }
}

#[derive(Deserialize)]
struct Created<Id> {
    id: Id,
}

#[derive(Deserialize)]
struct SubmissionCreated {
    submission_id: SubmissionId,
}

#[derive(Deserialize)]
struct OverviewPoint {
    submission_id: SubmissionId,
    submitted_at: DateTime<Utc>,
    state: SubmissionState,
    completed_at: Option<DateTime<Utc>>,
}

#[derive(Deserialize)]
struct StudentSeries {
    points: Vec<OverviewPoint>,
}

#[derive(Deserialize)]
struct Overview {
    students: Vec<StudentSeries>,
}

/// Logged-in instructor and student plus a course holding both.
pub struct LoadSession {
    instructor: ApiSession,
    student: ApiSession,
    course: CourseId,
}

impl LoadSession {
    pub async fn open(target: &Target) -> Result<Self, BenchError> {
        let http = reqwest::Client::builder().pool_max_idle_per_host(256).build()?;
        let instructor = ApiSession::login(http.clone(), &target.base_url, &target.instructor).await?;
        let student = ApiSession::login(http, &target.base_url, &target.student).await?;
        let created: Created<CourseId> = instructor
            .post(
                "/courses",
                json!({
                    "title": "load test",
                    "roster": [{ "username": target.student.username, "role": "student" }]
                }),
            )
            .await?;
        Ok(Self {
            instructor,
            student,
            course: created.id,
        })
    }

    /// A fresh assignment so each batch is measured in isolation.
    async fn assignment(&self) -> Result<AssignmentId, BenchError> {
        let created: Created<AssignmentId> = self
            .instructor
            .post(
                &format!("/courses/{}/assignments", self.course),
                json!({
                    "statement": "load test",
                    "dut_profile": "dut-v1",
                    "deadline": Utc::now() + chrono::Duration::days(1),
                }),
            )
            .await?;
        let fixture = &reference::fixtures()[0];
        let _: Value = self
            .instructor
            .post(
                &format!("/assignments/{}/testcases", created.id),
                json!({
                    "visibility": Visibility::Public,
                    "sessions": fixture.sessions,
                    "capture": fixture.config,
                }),
            )
            .await?;
        Ok(created.id)
    }

    /// Fires `n` submissions concurrently and waits until every one is
    /// terminal. Timing comes from the server's timestamps.
    pub async fn run(&self, n: usize, testbeds: usize, rep: usize, limit: Duration) -> Result<RunResult, BenchError> {
        let assignment = self.assignment().await?;
        let mut batch = tokio::task::JoinSet::new();
        for _ in 0..n {
            let student = self.student.clone();
            batch.spawn(async move {
                student
                    .post::<SubmissionCreated>(
                        &format!("/assignments/{assignment}/submissions"),
                        json!({ "source": reference::HARDWARE_PWM }),
                    )
                    .await
            });
        }
        let mut submitted = Vec::with_capacity(n);
        while let Some(joined) = batch.join_next().await {
            submitted.push(joined.expect("submit task").map(|c| c.submission_id)?);
        }

        let started = Instant::now();
        let points = loop {
            let overview: Overview = self.instructor.get(&format!("/assignments/{assignment}/overview")).await?;
            let points: Vec<OverviewPoint> = overview.students.into_iter().flat_map(|s| s.points).collect();
            let pending = points.iter().filter(|p| !p.state.is_terminal()).count() + n.saturating_sub(points.len());
            if pending == 0 {
                break points;
            }
            if started.elapsed() > limit {
                return Err(BenchError::Timeout { pending, limit });
            }
            tokio::time::sleep(Duration::from_millis(100)).await;
        };

        let failed: Vec<SubmissionId> = points
            .iter()
            .filter(|p| p.state == SubmissionState::Failed)
            .map(|p| p.submission_id)
            .collect();
        if !failed.is_empty() {
            return Err(BenchError::Aborted { failed });
        }
        let mut latencies_s = Vec::with_capacity(n);
        let mut first_submit = None::<DateTime<Utc>>;
        let mut last_done = None::<DateTime<Utc>>;
        for p in &points {
            let done = p.completed_at.expect("graded submissions carry a completion time");
            latencies_s.push((done - p.submitted_at).num_microseconds().unwrap_or(i64::MAX) as f64 / 1e6);
            first_submit = Some(first_submit.map_or(p.submitted_at, |t| t.min(p.submitted_at)));
            last_done = Some(last_done.map_or(done, |t| t.max(done)));
        }
        let span = (last_done.expect("n > 0") - first_submit.expect("n > 0"))
            .num_microseconds()
            .unwrap_or(i64::MAX) as f64
            / 1e6;
        Ok(RunResult {
            n,
            testbeds,
            rep,
            mean_s: stats::mean(&latencies_s),
            median_s: stats::median(&latencies_s),
            p95_s: stats::percentile(&latencies_s, 95.0),
            throughput: n as f64 / span,
            latencies_s,
            submissions: points.iter().map(|p| p.submission_id).collect(),
        })
    }
}

/// Generous bound on how long a batch may take before it is abandoned.
pub fn batch_limit(n: usize, testbeds: usize, delay: Duration) -> Duration {
    Duration::from_secs(60) + delay.mul_f64(4.0 * n as f64 / testbeds.max(1) as f64)
}

/// Runs one batch of `n` against a deployment with `testbeds` coordinators.
pub async fn run_load(target: &Target, n: usize, testbeds: usize, delay: Duration) -> Result<RunResult, BenchError> {
    let session = LoadSession::open(target).await?;
    session.run(n, testbeds, 0, batch_limit(n, testbeds, delay)).await
}

/// Runs the grid against an already-running deployment. Its online testbed
/// count must match the single configured T.
pub async fn run_remote(target: &Target, cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    let [testbeds] = cfg.testbeds[..] else {
        return Err(BenchError::Setup("a remote run takes exactly one testbed count".into()));
    };
    let session = LoadSession::open(target).await?;
    let listed: Vec<Value> = session.instructor.get("/testbeds").await?;
    let online = listed.iter().filter(|e| e["liveness"] == "online").count();
    if online != testbeds {
        return Err(BenchError::Setup(format!("{online} testbeds online, expected {testbeds}")));
    }
    let mut result = BenchResult::default();
    for rep in 0..cfg.reps {
        for &n in &cfg.ns {
            tracing::info!(n, testbeds, rep, "batch");
            result.runs.push(session.run(n, testbeds, rep, batch_limit(n, testbeds, cfg.delay)).await?);
        }
    }
    Ok(result)
}

/// Runs the grid on in-process clusters, one per testbed count.
pub async fn run_local(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    let mut result = BenchResult::default();
    for &testbeds in &cfg.testbeds {
        let cluster = LocalCluster::start(&ClusterConfig::new(testbeds, cfg.delay)).await?;
        let session = LoadSession::open(&cluster.target()).await;
        let outcome = async {
            let session = session?;
            let mut runs = Vec::new();
            for rep in 0..cfg.reps {
                for &n in &cfg.ns {
                    tracing::info!(n, testbeds, rep, "batch");
                    runs.push(session.run(n, testbeds, rep, batch_limit(n, testbeds, cfg.delay)).await?);
                }
            }
            Ok::<_, BenchError>(runs)
        }
        .await;
        cluster.shutdown().await;
        result.runs.extend(outcome?);
    }
    Ok(result)
}
