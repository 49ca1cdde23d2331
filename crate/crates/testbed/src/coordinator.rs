use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use labgrader_core::domain::{CompileStatus, JobId};
use labgrader_core::dut::{assemble, DutProfile, DutProgram};
use labgrader_core::engine::files::{write_capture, write_schedule};
use labgrader_core::engine::{capture, EngineError};
use labgrader_core::protocol::{
    ArtifactArchive, Capabilities, GradingJob, JobState, JobStatusBody, TestCaseArtifacts, TestbedDescriptor,
    TestbedStatus,
};
use labgrader_core::Pin;
use thiserror::Error;

use crate::config::TestbedConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineFault {
    #[error("pin {0} is not wired to any engine channel")]
    Unwired(Pin),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("execution aborted: {0}")]
    Aborted(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubmitError {
    #[error("testbed is busy")]
    Busy,
    #[error("job {0} already exists")]
    Duplicate(JobId),
    #[error("job targets {job}, this testbed runs {testbed}")]
    ProfileMismatch { job: String, testbed: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FetchError {
    #[error("no such job")]
    NotFound,
    #[error("job is still running")]
    NotReady,
    #[error("job failed: {0}")]
    Failed(String),
}

/// The simulated board: whatever program was flashed last stays flashed.
#[derive(Debug)]
struct Dut {
    flashed: DutProgram,
}

impl Dut {
    fn reset(&mut self) {
        // the engine keeps no state between captures; the DUT keeps its flash
    }

    fn flash(&mut self, program: &DutProgram) {
        self.flashed = program.clone();
    }
}

#[derive(Debug)]
struct JobRecord {
    state: JobState,
    error: Option<String>,
    archive: Option<ArtifactArchive>,
    finished_at: Option<Instant>,
}

pub struct Coordinator {
    cfg: TestbedConfig,
    profile: DutProfile,
    busy: AtomicBool,
    dut: Mutex<Dut>,
    jobs: Mutex<HashMap<JobId, JobRecord>>,
}

impl Coordinator {
    pub fn new(cfg: TestbedConfig) -> Result<Self, crate::config::ConfigError> {
        cfg.validate()?;
        let profile = cfg.dut_profile()?;
        Ok(Self {
            cfg,
            profile,
            busy: AtomicBool::new(false),
            dut: Mutex::new(Dut { flashed: DutProgram::blank() }),
            jobs: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &TestbedConfig {
        &self.cfg
    }

    pub fn status(&self) -> TestbedStatus {
        if self.busy.load(Ordering::Acquire) {
            TestbedStatus::Busy
        } else {
            TestbedStatus::Idle
        }
    }

    pub fn descriptor(&self, config_hash: String, endpoint: String) -> TestbedDescriptor {
        TestbedDescriptor {
            testbed_id: self.cfg.testbed_id.clone(),
            dut_profile: self.profile.id.to_owned(),
            capabilities: Capabilities {
                max_sample_rate_hz: labgrader_core::engine::MAX_SAMPLE_RATE_HZ,
                pins: self.cfg.wiring.values().copied().collect(),
            },
            wiring: self.cfg.wiring.clone(),
            status: self.status(),
            config_hash,
            endpoint,
            heartbeat_interval_s: self.cfg.heartbeat_interval_s,
        }
    }

    /// Runs the full job synchronously: for every test case reset, flash the
    /// blank firmware, flash the student program if it assembled, capture.
    pub fn execute(&self, job: &GradingJob) -> Result<ArtifactArchive, EngineFault> {
        let program = assemble(&job.source);
        let compile_status = match &program {
            Ok(_) => CompileStatus::Ok,
            Err(e) => CompileStatus::CompileError { message: e.to_string() },
        };
        let mut dut = self.dut.lock().expect("dut lock");
        let mut test_cases = Vec::with_capacity(job.test_cases.len());
        for tc in &job.test_cases {
            if !self.cfg.wiring.values().any(|p| *p == tc.capture.pin) {
                return Err(EngineFault::Unwired(tc.capture.pin));
            }
            dut.reset();
            dut.flash(&DutProgram::blank());
            if let Ok(p) = &program {
                dut.flash(p);
            }
            let out = capture(&dut.flashed, &self.profile, &tc.sessions, &tc.capture)?;
            test_cases.push(TestCaseArtifacts {
                test_case: tc.test_case,
                schedule_csv: write_schedule(&tc.sessions),
                capture_rle: write_capture(&out.capture),
                print_log: String::from_utf8_lossy(&out.print_log.bytes).into_owned(),
            });
        }
        Ok(ArtifactArchive {
            job_id: job.job_id,
            compile_status,
            test_cases,
        })
    }

    /// Accepts a job and runs it in the background. At most one job runs at a
    /// time.
    pub fn submit(self: &Arc<Self>, job: GradingJob) -> Result<(), SubmitError> {
        if job.dut_profile != self.profile.id {
            return Err(SubmitError::ProfileMismatch {
                job: job.dut_profile,
                testbed: self.profile.id.to_owned(),
            });
        }
        if self
            .busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .is_err()
        {
            return Err(SubmitError::Busy);
        }
        {
            let mut jobs = self.jobs.lock().expect("jobs lock");
            if jobs.contains_key(&job.job_id) {
                self.busy.store(false, Ordering::Release);
                return Err(SubmitError::Duplicate(job.job_id));
            }
            jobs.insert(
                job.job_id,
                JobRecord {
                    state: JobState::Running,
                    error: None,
                    archive: None,
                    finished_at: None,
                },
            );
        }
        let this = Arc::clone(self);
        let delay = Duration::from_millis(self.cfg.service_delay_ms);
        tokio::spawn(async move {
            tokio::time::sleep(delay).await;
            let worker = Arc::clone(&this);
            let job_id = job.job_id;
            let result = tokio::task::spawn_blocking(move || worker.execute(&job))
                .await
                .unwrap_or_else(|e| Err(EngineFault::Aborted(e.to_string())));
            // free the DUT before publishing, so a poller that sees `done` can
            // submit the next job straight away
            this.busy.store(false, Ordering::Release);
            let mut jobs = this.jobs.lock().expect("jobs lock");
            if let Some(rec) = jobs.get_mut(&job_id) {
                rec.finished_at = Some(Instant::now());
                match result {
                    Ok(archive) => {
                        rec.state = JobState::Done;
                        rec.archive = Some(archive);
                    }
                    Err(e) => {
                        tracing::warn!(%job_id, error = %e, "job failed");
                        rec.state = JobState::Failed;
                        rec.error = Some(e.to_string());
                    }
                }
            }
        });
        Ok(())
    }

    pub fn job_status(&self, id: JobId) -> Option<JobStatusBody> {
        let jobs = self.jobs.lock().expect("jobs lock");
        jobs.get(&id).map(|r| JobStatusBody {
            job_id: id,
            state: r.state,
            error: r.error.clone(),
        })
    }

    pub fn artifacts(&self, id: JobId) -> Result<ArtifactArchive, FetchError> {
        let jobs = self.jobs.lock().expect("jobs lock");
        let rec = jobs.get(&id).ok_or(FetchError::NotFound)?;
        match rec.state {
            JobState::Running => Err(FetchError::NotReady),
            JobState::Failed => Err(FetchError::Failed(rec.error.clone().unwrap_or_default())),
            JobState::Done => Ok(rec.archive.clone().expect("done job has artifacts")),
        }
    }

    /// Releases a finished job's artifacts.
    pub fn release(&self, id: JobId) -> Result<(), FetchError> {
        let mut jobs = self.jobs.lock().expect("jobs lock");
        match jobs.get(&id).map(|r| r.state) {
            None => Err(FetchError::NotFound),
            Some(JobState::Running) => Err(FetchError::NotReady),
            Some(_) => {
                jobs.remove(&id);
                Ok(())
            }
        }
    }

    /// Drops finished jobs older than the retention window. Returns how many.
    pub fn purge_expired(&self, now: Instant) -> usize {
        let retention = Duration::from_secs(self.cfg.artifact_retention_s);
        let mut jobs = self.jobs.lock().expect("jobs lock");
        let before = jobs.len();
        jobs.retain(|_, r| r.finished_at.is_none_or(|t| now.saturating_duration_since(t) < retention));
        before - jobs.len()
    }

    pub fn retained_jobs(&self) -> usize {
        self.jobs.lock().expect("jobs lock").len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use labgrader_core::domain::{SubmissionId, TestCaseId};
    use labgrader_core::protocol::JobTestCase;
    use labgrader_core::{reference, CaptureConfig, Session};

    fn coordinator() -> Arc<Coordinator> {
        Arc::new(Coordinator::new(TestbedConfig::new("tb", &DutProfile::V1, "http://unused", "t")).unwrap())
    }

    fn job(source: &str, pin: u8) -> GradingJob {
        GradingJob {
            job_id: JobId::new(),
            submission: SubmissionId::new(),
            dut_profile: "dut-v1".into(),
            source: source.into(),
            test_cases: vec![JobTestCase {
                test_case: TestCaseId::new(),
                sessions: vec![Session::new(0, 1000, 0.25)],
                capture: CaptureConfig::new(100_000, 20_000, Pin(pin)),
            }],
        }
    }

    #[test]
    fn compile_error_runs_blank_firmware() {
        let c = coordinator();
        let good = c.execute(&job(reference::HARDWARE_PWM, 0)).unwrap();
        assert!(good.test_cases[0].capture_rle.contains("1,"));
        let bad = c.execute(&job(reference::COMPILE_ERROR, 0)).unwrap();
        assert!(matches!(bad.compile_status, CompileStatus::CompileError { .. }));
        let rle = &bad.test_cases[0].capture_rle;
        assert_eq!(rle.lines().skip(1).collect::<Vec<_>>(), vec!["0,2000"]);
    }

    #[test]
    fn unwired_pin_is_a_fault() {
        let c = coordinator();
        assert_eq!(c.execute(&job(reference::HARDWARE_PWM, 3)), Err(EngineFault::Unwired(Pin(3))));
    }

    #[tokio::test]
    async fn single_flight_and_release() {
        let c = coordinator();
        let a = job(reference::HARDWARE_PWM, 0);
        let id = a.job_id;
        c.submit(a.clone()).unwrap();
        assert_eq!(c.submit(job(reference::BLANK, 0)), Err(SubmitError::Busy));
        while c.job_status(id).unwrap().state == JobState::Running {
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        assert_eq!(c.status(), TestbedStatus::Idle);
        assert_eq!(c.submit(a), Err(SubmitError::Duplicate(id)));
        assert_eq!(c.artifacts(id).unwrap().test_cases.len(), 1);
        c.release(id).unwrap();
        assert_eq!(c.artifacts(id), Err(FetchError::NotFound));
    }

    #[test]
    fn retention_purges_old_finished_jobs() {
        let c = coordinator();
        let id = JobId::new();
        let done = Instant::now();
        c.jobs.lock().unwrap().insert(
            id,
            JobRecord {
                state: JobState::Done,
                error: None,
                archive: None,
                finished_at: Some(done),
            },
        );
        assert_eq!(c.purge_expired(done + Duration::from_secs(3600)), 0);
        assert_eq!(c.purge_expired(done + Duration::from_secs(24 * 3600)), 1);
    }
}
