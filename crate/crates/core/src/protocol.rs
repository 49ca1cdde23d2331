//! JSON bodies exchanged between the server and testbed coordinators.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{CompileStatus, JobId, Session, SubmissionId, TestCaseId, TestbedId};
use crate::dut::Pin;
use crate::engine::CaptureConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestbedStatus {
    Idle,
    Busy,
    Fault,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub max_sample_rate_hz: u32,
    /// DUT pins an engine channel is wired to.
    pub pins: Vec<Pin>,
}

/// What a coordinator advertises in every heartbeat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestbedDescriptor {
    pub testbed_id: TestbedId,
    pub dut_profile: String,
    pub capabilities: Capabilities,
    /// Engine channel name to DUT pin.
    pub wiring: BTreeMap<String, Pin>,
    pub status: TestbedStatus,
    /// Hex SHA-256 of the canonical configuration file.
    pub config_hash: String,
    /// Base URL the server uses to reach the coordinator.
    pub endpoint: String,
    pub heartbeat_interval_s: f64,
}

impl TestbedDescriptor {
    pub fn observes(&self, pin: Pin) -> bool {
        self.capabilities.pins.contains(&pin)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobTestCase {
    pub test_case: TestCaseId,
    pub sessions: Vec<Session>,
    pub capture: CaptureConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradingJob {
    pub job_id: JobId,
    pub submission: SubmissionId,
    pub dut_profile: String,
    pub source: String,
    pub test_cases: Vec<JobTestCase>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Running,
    Done,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobStatusBody {
    pub job_id: JobId,
    pub state: JobState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The three artifact files of one test case, as text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCaseArtifacts {
    pub test_case: TestCaseId,
    pub schedule_csv: String,
    pub capture_rle: String,
    pub print_log: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactArchive {
    pub job_id: JobId,
    pub compile_status: CompileStatus,
    pub test_cases: Vec<TestCaseArtifacts>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthBody {
    pub testbed_id: TestbedId,
    pub status: TestbedStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}
