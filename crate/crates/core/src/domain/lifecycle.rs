use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ids::{AssignmentId, SubmissionId, TestbedId, UserId};
use super::report::GradeReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmissionState {
    Pending,
    Claimed,
    Executing,
    Graded,
    Failed,
}

impl SubmissionState {
    pub const ALL: [SubmissionState; 5] = [
        SubmissionState::Pending,
        SubmissionState::Claimed,
        SubmissionState::Executing,
        SubmissionState::Graded,
        SubmissionState::Failed,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, SubmissionState::Graded | SubmissionState::Failed)
    }
}

/// A time-bounded hold a testbed has on a submission.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub testbed: TestbedId,
    pub lease_expiry: DateTime<Utc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub id: SubmissionId,
    pub assignment: AssignmentId,
    pub student: UserId,
    pub source: String,
    pub submitted_at: DateTime<Utc>,
    pub state: SubmissionState,
    pub claim: Option<Claim>,
    pub result: Option<GradeReport>,
    /// Reason recorded when the submission ends `failed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl Submission {
    pub fn new(
        assignment: AssignmentId,
        student: UserId,
        source: String,
        submitted_at: DateTime<Utc>,
    ) -> Self {
        Self {
            id: SubmissionId::new(),
            assignment,
            student,
            source,
            submitted_at,
            state: SubmissionState::Pending,
            claim: None,
            result: None,
            failure: None,
        }
    }

    pub fn claimed_by(&self) -> Option<&TestbedId> {
        self.claim.as_ref().map(|c| &c.testbed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LifecycleEvent {
    Claim { testbed: TestbedId, lease_expiry: DateTime<Utc> },
    StartExecution { testbed: TestbedId },
    Complete { testbed: TestbedId, report: Box<GradeReport> },
    Fail { testbed: TestbedId, reason: String },
    LeaseExpired,
}

impl LifecycleEvent {
    pub fn name(&self) -> &'static str {
        match self {
            LifecycleEvent::Claim { .. } => "claim",
            LifecycleEvent::StartExecution { .. } => "start_execution",
            LifecycleEvent::Complete { .. } => "complete",
            LifecycleEvent::Fail { .. } => "fail",
            LifecycleEvent::LeaseExpired => "lease_expired",
        }
    }

    fn testbed(&self) -> Option<&TestbedId> {
        match self {
            LifecycleEvent::StartExecution { testbed }
            | LifecycleEvent::Complete { testbed, .. }
            | LifecycleEvent::Fail { testbed, .. } => Some(testbed),
            LifecycleEvent::Claim { .. } | LifecycleEvent::LeaseExpired => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransitionError {
    #[error("event {event} is not legal in state {state:?}")]
    IllegalTransition { state: SubmissionState, event: &'static str },
    #[error("testbed {presented} does not hold the claim")]
    StaleClaim { presented: TestbedId },
}

/// Applies one lifecycle event. Legal edges:
///
/// ```text
/// pending   --claim-------------> claimed
/// claimed   --start_execution---> executing
/// claimed   --lease_expired-----> pending
/// executing --complete----------> graded
/// executing --fail--------------> failed
/// executing --lease_expired-----> pending
/// ```
pub fn transition(
    submission: &Submission,
    event: LifecycleEvent,
) -> Result<Submission, TransitionError> {
    use SubmissionState::*;

    let illegal = || TransitionError::IllegalTransition {
        state: submission.state,
        event: event.name(),
    };
    let legal = matches!(
        (submission.state, &event),
        (Pending, LifecycleEvent::Claim { .. })
            | (Claimed, LifecycleEvent::StartExecution { .. })
            | (Claimed, LifecycleEvent::LeaseExpired)
            | (Executing, LifecycleEvent::Complete { .. })
            | (Executing, LifecycleEvent::Fail { .. })
            | (Executing, LifecycleEvent::LeaseExpired)
    );
    if !legal {
        return Err(illegal());
    }
    if let Some(presented) = event.testbed() {
        if submission.claimed_by() != Some(presented) {
            return Err(TransitionError::StaleClaim {
                presented: presented.clone(),
            });
        }
    }

    let mut next = submission.clone();
    match event {
        LifecycleEvent::Claim { testbed, lease_expiry } => {
            next.state = Claimed;
            next.claim = Some(Claim { testbed, lease_expiry });
        }
        LifecycleEvent::StartExecution { .. } => next.state = Executing,
        LifecycleEvent::Complete { report, .. } => {
            next.state = Graded;
            next.claim = None;
            next.result = Some(*report);
        }
        LifecycleEvent::Fail { reason, .. } => {
            next.state = Failed;
            next.claim = None;
            next.failure = Some(reason);
        }
        LifecycleEvent::LeaseExpired => {
            next.state = Pending;
            next.claim = None;
        }
    }
    Ok(next)
}
