//! One dispatch worker per online testbed. Workers claim pending submissions
//! through the store, run them on their coordinator, grade the artifacts and
//! write the report. They share nothing in memory beyond the store.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use labgrader_core::domain::{JobId, Submission, TestbedId};
use labgrader_core::par::Execution;
use labgrader_core::protocol::{GradingJob, JobState, JobTestCase, TestbedDescriptor, TestbedStatus};
use rand::Rng;
use tokio::task::JoinHandle;

use crate::client::CoordinatorClient;
use crate::clock::Clock;
use crate::config::SchedulerConfig;
use crate::grading::grade_archive;
use crate::registry::Registry;
use crate::store::{Requeue, SchedulingPolicy, Store};

pub struct SchedulerContext {
    pub store: Arc<Store>,
    pub registry: Arc<Registry>,
    pub clock: Arc<dyn Clock>,
    pub cfg: SchedulerConfig,
    pub tokens: HashMap<TestbedId, String>,
    pub policy: Arc<dyn SchedulingPolicy>,
    pub grading_timeout: Duration,
    pub http: reqwest::Client,
}

struct Worker {
    stop: Arc<AtomicBool>,
    handle: JoinHandle<()>,
}

pub struct WorkerPool {
    ctx: Arc<SchedulerContext>,
    workers: Mutex<HashMap<TestbedId, Worker>>,
}

impl WorkerPool {
    pub fn new(ctx: Arc<SchedulerContext>) -> Self {
        Self {
            ctx,
            workers: Mutex::new(HashMap::new()),
        }
    }

    /// Starts a worker for every online testbed and signals the rest to stop
    /// after their current job.
    pub fn reconcile(&self) {
        let online: Vec<TestbedId> = self
            .ctx
            .registry
            .online(self.ctx.clock.now())
            .into_iter()
            .map(|d| d.testbed_id)
            .collect();
        let mut workers = self.workers.lock().expect("pool lock");
        for (id, w) in workers.iter() {
            if !online.contains(id) && !w.stop.swap(true, Ordering::AcqRel) {
                tracing::info!(testbed = %id, "testbed offline, stopping worker");
            }
        }
        workers.retain(|_, w| !(w.stop.load(Ordering::Acquire) && w.handle.is_finished()));
        for id in online {
            match workers.get(&id) {
                Some(w) if !w.handle.is_finished() => w.stop.store(false, Ordering::Release),
                _ => {
                    tracing::info!(testbed = %id, "starting dispatch worker");
                    let stop = Arc::new(AtomicBool::new(false));
                    let handle = tokio::spawn(worker_loop(self.ctx.clone(), id.clone(), stop.clone()));
                    workers.insert(id, Worker { stop, handle });
                }
            }
        }
    }

    /// Testbeds with a worker that has not been told to stop.
    pub fn running(&self) -> Vec<TestbedId> {
        let workers = self.workers.lock().expect("pool lock");
        let mut ids: Vec<TestbedId> = workers
            .iter()
            .filter(|(_, w)| !w.stop.load(Ordering::Acquire) && !w.handle.is_finished())
            .map(|(id, _)| id.clone())
            .collect();
        ids.sort();
        ids
    }

    pub fn shutdown(&self) {
        for (_, w) in self.workers.lock().expect("pool lock").drain() {
            w.handle.abort();
        }
    }
}

fn random_poll(cfg: &SchedulerConfig) -> Duration {
    Duration::from_millis(rand::rng().random_range(cfg.poll_min_ms..=cfg.poll_max_ms))
}

async fn worker_loop(ctx: Arc<SchedulerContext>, testbed: TestbedId, stop: Arc<AtomicBool>) {
    while !stop.load(Ordering::Acquire) {
        let Some(entry) = ctx.registry.entry(&testbed, ctx.clock.now()) else {
            break;
        };
        let Some(token) = ctx.tokens.get(&testbed) else {
            break;
        };
        let client = CoordinatorClient::new(ctx.http.clone(), &entry.descriptor.endpoint, token);
        // a down or busy coordinator would only burn retry budget
        match client.health().await {
            Ok(h) if h.status == TestbedStatus::Idle => {}
            _ => {
                tokio::time::sleep(random_poll(&ctx.cfg)).await;
                continue;
            }
        }
        let lease = ctx.clock.now() + ctx.cfg.lease();
        match ctx.store.claim_next_pending(&entry.descriptor, lease, ctx.policy.as_ref()) {
            Some(sub) => drive_job(&ctx, &client, &entry.descriptor, sub).await,
            None => tokio::time::sleep(random_poll(&ctx.cfg)).await,
        }
    }
}

enum Attempt {
    Failed(String),
    /// The claim moved on; someone else owns the submission.
    Lost,
}

/// Runs one claimed submission to a terminal or requeued state.
pub async fn drive_job(ctx: &SchedulerContext, client: &CoordinatorClient, testbed: &TestbedDescriptor, sub: Submission) {
    let id = sub.id;
    let tb = &testbed.testbed_id;
    let job_id = JobId::new();
    match run_attempt(ctx, client, testbed, &sub, job_id).await {
        Ok(()) => {}
        Err(Attempt::Lost) => tracing::warn!(submission = %id, testbed = %tb, "claim lost mid-job"),
        Err(Attempt::Failed(reason)) => {
            match ctx
                .store
                .requeue_or_fail(id, tb, &reason, ctx.cfg.max_retries, ctx.clock.now())
            {
                Ok(Requeue::Requeued { attempts }) => {
                    tracing::warn!(submission = %id, testbed = %tb, attempts, %reason, "attempt failed, requeued")
                }
                Ok(Requeue::Failed) => tracing::error!(submission = %id, testbed = %tb, %reason, "submission failed"),
                Err(e) => tracing::warn!(submission = %id, error = %e, "could not requeue"),
            }
        }
    }
    let _ = client.release(job_id).await;
}

async fn run_attempt(
    ctx: &SchedulerContext,
    client: &CoordinatorClient,
    testbed: &TestbedDescriptor,
    sub: &Submission,
    job_id: JobId,
) -> Result<(), Attempt> {
    let tb = &testbed.testbed_id;
    let rec = ctx.store.submission(sub.id).ok_or(Attempt::Lost)?;
    let assignment = ctx.store.assignment(sub.assignment).ok_or(Attempt::Lost)?;
    let test_cases = ctx.store.test_cases(&rec.test_cases);
    let job = GradingJob {
        job_id,
        submission: sub.id,
        dut_profile: assignment.dut_profile.clone(),
        source: sub.source.clone(),
        test_cases: test_cases
            .iter()
            .map(|tc| JobTestCase {
                test_case: tc.id,
                sessions: tc.sessions.clone(),
                capture: tc.capture,
            })
            .collect(),
    };

    ctx.store.start_execution(sub.id, tb).map_err(|_| Attempt::Lost)?;
    client.post_job(&job).await.map_err(|e| Attempt::Failed(e.to_string()))?;

    let started = Instant::now();
    let job_timeout = Duration::from_secs(ctx.cfg.job_timeout_s);
    loop {
        tokio::time::sleep(Duration::from_millis(ctx.cfg.job_poll_ms)).await;
        let now = ctx.clock.now();
        if !ctx.store.extend_lease(sub.id, tb, now + ctx.cfg.lease(), now) {
            return Err(Attempt::Lost);
        }
        let status = client.job_status(job_id).await.map_err(|e| Attempt::Failed(e.to_string()))?;
        match status.state {
            JobState::Done => break,
            JobState::Failed => {
                return Err(Attempt::Failed(status.error.unwrap_or_else(|| "job failed".into())));
            }
            JobState::Running if started.elapsed() > job_timeout => {
                return Err(Attempt::Failed(format!("job exceeded {job_timeout:?}")));
            }
            JobState::Running => {}
        }
    }

    let archive = client.artifacts(job_id).await.map_err(|e| Attempt::Failed(e.to_string()))?;
    let timeout = ctx.grading_timeout;
    let submission = sub.id;
    let graded = tokio::task::spawn_blocking(move || {
        grade_archive(submission, &test_cases, &archive, timeout, Execution::default())
    })
    .await
    .map_err(|e| Attempt::Failed(format!("grading task: {e}")))?;
    let (report, files) = graded.map_err(|e| Attempt::Failed(e.to_string()))?;

    match ctx.store.complete(sub.id, tb, report, files, ctx.clock.now()) {
        Ok(_) => {
            tracing::info!(submission = %sub.id, testbed = %tb, "graded");
            Ok(())
        }
        Err(_) => Err(Attempt::Lost),
    }
}
