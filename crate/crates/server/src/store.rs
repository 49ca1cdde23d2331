//! In-memory persistence. Every state change of a submission goes through a
//! single lock and the domain transition function, which makes each method a
//! compare-and-set on the stored state.

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use labgrader_core::domain::{
    transition, Assignment, AssignmentId, Course, CourseId, GradeReport, LifecycleEvent, Submission, SubmissionId,
    SubmissionState, TestCase, TestCaseId, TestbedId, TransitionError, UserId,
};
use labgrader_core::protocol::TestbedDescriptor;
use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Debug)]
pub struct UserRecord {
    pub id: UserId,
    pub username: String,
    pub display_name: String,
    pub credential: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubmissionRecord {
    pub submission: Submission,
    /// Test cases that existed when the submission arrived; later additions
    /// apply to later submissions only.
    pub test_cases: Vec<TestCaseId>,
    /// Requeues after a failed attempt.
    pub attempts: u32,
    pub completed_at: Option<DateTime<Utc>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredArtifacts {
    pub schedule_csv: String,
    pub capture_rle: String,
    pub print_log: String,
}

impl StoredArtifacts {
    pub fn file(&self, name: &str) -> Option<&str> {
        use labgrader_core::domain::ArtifactRefs as A;
        match name {
            A::SCHEDULE_FILE => Some(&self.schedule_csv),
            A::CAPTURE_FILE => Some(&self.capture_rle),
            A::PRINT_LOG_FILE => Some(&self.print_log),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("{0} not found")]
    NotFound(&'static str),
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error("lease expired before the write")]
    LeaseExpired,
}

/// Picks which of the compatible pending submissions a testbed gets.
/// Candidates arrive oldest first.
pub trait SchedulingPolicy: Send + Sync {
    fn pick(&self, candidates: &[&Submission]) -> Option<usize>;
}

/// Non-preemptive FIFO by submission time, id as tiebreak.
#[derive(Debug, Default, Clone, Copy)]
pub struct Fifo;

impl SchedulingPolicy for Fifo {
    fn pick(&self, candidates: &[&Submission]) -> Option<usize> {
        (!candidates.is_empty()).then_some(0)
    }
}

/// What happened when a worker gave a submission back.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Requeue {
    Requeued { attempts: u32 },
    Failed,
}

#[derive(Default)]
struct Inner {
    users: HashMap<UserId, UserRecord>,
    usernames: HashMap<String, UserId>,
    sessions: HashMap<String, (UserId, DateTime<Utc>)>,
    courses: HashMap<CourseId, Course>,
    assignments: HashMap<AssignmentId, Assignment>,
    test_cases: HashMap<TestCaseId, TestCase>,
    submissions: HashMap<SubmissionId, SubmissionRecord>,
    pending: BTreeSet<(DateTime<Utc>, SubmissionId)>,
    artifacts: HashMap<(SubmissionId, TestCaseId), StoredArtifacts>,
    /// Number of reports ever written per submission.
    report_writes: HashMap<SubmissionId, u32>,
}

#[derive(Default)]
pub struct Store {
    inner: Mutex<Inner>,
}

impl Inner {
    fn record(&mut self, id: SubmissionId) -> Result<&mut SubmissionRecord, StoreError> {
        self.submissions.get_mut(&id).ok_or(StoreError::NotFound("submission"))
    }

    /// Applies `event` and keeps the pending index in step.
    fn apply(&mut self, id: SubmissionId, event: LifecycleEvent) -> Result<Submission, StoreError> {
        let rec = self.record(id)?;
        let before = rec.submission.state;
        let next = transition(&rec.submission, event)?;
        rec.submission = next.clone();
        let key = (next.submitted_at, id);
        match (before, next.state) {
            (SubmissionState::Pending, s) if s != SubmissionState::Pending => {
                self.pending.remove(&key);
            }
            (b, SubmissionState::Pending) if b != SubmissionState::Pending => {
                self.pending.insert(key);
            }
            _ => {}
        }
        Ok(next)
    }

    fn compatible(&self, sub: &Submission, testbed: &TestbedDescriptor) -> bool {
        let Some(assignment) = self.assignments.get(&sub.assignment) else {
            return false;
        };
        if assignment.dut_profile != testbed.dut_profile {
            return false;
        }
        self.submissions[&sub.id]
            .test_cases
            .iter()
            .filter_map(|tc| self.test_cases.get(tc))
            .all(|tc| testbed.observes(tc.capture.pin))
    }
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().expect("store lock")
    }

    // users and sessions

    pub fn create_user(&self, username: &str, display_name: &str, credential: String) -> Result<UserId, StoreError> {
        let mut g = self.lock();
        if g.usernames.contains_key(username) {
            return Err(StoreError::Conflict(format!("user {username} exists")));
        }
        let id = UserId::new();
        g.usernames.insert(username.to_owned(), id);
        g.users.insert(
            id,
            UserRecord {
                id,
                username: username.to_owned(),
                display_name: display_name.to_owned(),
                credential,
            },
        );
        Ok(id)
    }

    pub fn user(&self, id: UserId) -> Option<UserRecord> {
        self.lock().users.get(&id).cloned()
    }

    pub fn user_by_name(&self, username: &str) -> Option<UserRecord> {
        let g = self.lock();
        g.usernames.get(username).and_then(|id| g.users.get(id)).cloned()
    }

    pub fn create_session(&self, token: String, user: UserId, expires: DateTime<Utc>) {
        self.lock().sessions.insert(token, (user, expires));
    }

    pub fn session_user(&self, token: &str, now: DateTime<Utc>) -> Option<UserId> {
        let mut g = self.lock();
        match g.sessions.get(token) {
            Some(&(user, expires)) if now < expires => Some(user),
            Some(_) => {
                g.sessions.remove(token);
                None
            }
            None => None,
        }
    }

    // courses, assignments, test cases

    pub fn insert_course(&self, course: Course) {
        self.lock().courses.insert(course.id, course);
    }

    pub fn course(&self, id: CourseId) -> Option<Course> {
        self.lock().courses.get(&id).cloned()
    }

    pub fn insert_assignment(&self, assignment: Assignment) {
        self.lock().assignments.insert(assignment.id, assignment);
    }

    pub fn assignment(&self, id: AssignmentId) -> Option<Assignment> {
        self.lock().assignments.get(&id).cloned()
    }

    /// Moves the deadline; only extensions are accepted.
    pub fn extend_deadline(&self, id: AssignmentId, deadline: DateTime<Utc>) -> Result<Assignment, StoreError> {
        let mut g = self.lock();
        let a = g.assignments.get_mut(&id).ok_or(StoreError::NotFound("assignment"))?;
        if deadline < a.deadline {
            return Err(StoreError::Conflict(format!(
                "new deadline {deadline} is before the current {}",
                a.deadline
            )));
        }
        a.deadline = deadline;
        Ok(a.clone())
    }

    pub fn add_test_case(&self, assignment: AssignmentId, tc: TestCase) -> Result<(), StoreError> {
        let mut g = self.lock();
        let a = g.assignments.get_mut(&assignment).ok_or(StoreError::NotFound("assignment"))?;
        a.test_cases.push(tc.id);
        g.test_cases.insert(tc.id, tc);
        Ok(())
    }

    pub fn test_cases(&self, ids: &[TestCaseId]) -> Vec<TestCase> {
        let g = self.lock();
        ids.iter().filter_map(|id| g.test_cases.get(id)).cloned().collect()
    }

    // submissions

    pub fn insert_submission(&self, submission: Submission, test_cases: Vec<TestCaseId>) {
        let mut g = self.lock();
        assert_eq!(submission.state, SubmissionState::Pending);
        g.pending.insert((submission.submitted_at, submission.id));
        g.submissions.insert(
            submission.id,
            SubmissionRecord {
                submission,
                test_cases,
                attempts: 0,
                completed_at: None,
            },
        );
    }

    pub fn submission(&self, id: SubmissionId) -> Option<SubmissionRecord> {
        self.lock().submissions.get(&id).cloned()
    }

    /// Every submission to an assignment, oldest first.
    pub fn submissions_for(&self, assignment: AssignmentId) -> Vec<SubmissionRecord> {
        let g = self.lock();
        let mut out: Vec<SubmissionRecord> = g
            .submissions
            .values()
            .filter(|r| r.submission.assignment == assignment)
            .cloned()
            .collect();
        out.sort_by_key(|r| (r.submission.submitted_at, r.submission.id));
        out
    }

    pub fn count_in_state(&self, state: SubmissionState) -> usize {
        self.lock().submissions.values().filter(|r| r.submission.state == state).count()
    }

    /// Atomically claims the submission the policy picks among pending ones
    /// this testbed can run.
    pub fn claim_next_pending(
        &self,
        testbed: &TestbedDescriptor,
        lease_expiry: DateTime<Utc>,
        policy: &dyn SchedulingPolicy,
    ) -> Option<Submission> {
        let mut g = self.lock();
        let candidates: Vec<&Submission> = g
            .pending
            .iter()
            .map(|(_, id)| &g.submissions[id].submission)
            .filter(|s| g.compatible(s, testbed))
            .collect();
        let id = candidates.get(policy.pick(&candidates)?)?.id;
        let event = LifecycleEvent::Claim {
            testbed: testbed.testbed_id.clone(),
            lease_expiry,
        };
        g.apply(id, event).ok()
    }

    pub fn start_execution(&self, id: SubmissionId, testbed: &TestbedId) -> Result<Submission, StoreError> {
        self.lock().apply(id, LifecycleEvent::StartExecution { testbed: testbed.clone() })
    }

    /// Pushes the lease out while the holder is still working. False when
    /// the claim is gone.
    pub fn extend_lease(&self, id: SubmissionId, testbed: &TestbedId, until: DateTime<Utc>, now: DateTime<Utc>) -> bool {
        let mut g = self.lock();
        let Some(rec) = g.submissions.get_mut(&id) else {
            return false;
        };
        match &mut rec.submission.claim {
            Some(claim) if &claim.testbed == testbed && claim.lease_expiry > now => {
                claim.lease_expiry = claim.lease_expiry.max(until);
                true
            }
            _ => false,
        }
    }

    /// Records the grade and its artifacts in one step. Rejected when the
    /// lease has run out, even if the reaper has not collected it yet.
    pub fn complete(
        &self,
        id: SubmissionId,
        testbed: &TestbedId,
        report: GradeReport,
        artifacts: Vec<(TestCaseId, StoredArtifacts)>,
        now: DateTime<Utc>,
    ) -> Result<Submission, StoreError> {
        let mut g = self.lock();
        let rec = g.record(id)?;
        if let Some(claim) = &rec.submission.claim {
            if &claim.testbed == testbed && claim.lease_expiry <= now {
                return Err(StoreError::LeaseExpired);
            }
        }
        let next = g.apply(
            id,
            LifecycleEvent::Complete {
                testbed: testbed.clone(),
                report: Box::new(report),
            },
        )?;
        g.record(id)?.completed_at = Some(now);
        *g.report_writes.entry(id).or_default() += 1;
        for (tc, files) in artifacts {
            g.artifacts.insert((id, tc), files);
        }
        Ok(next)
    }

    /// Gives a submission back after a failed attempt: pending again while
    /// the retry budget lasts, failed after that.
    pub fn requeue_or_fail(
        &self,
        id: SubmissionId,
        testbed: &TestbedId,
        reason: &str,
        max_retries: u32,
        now: DateTime<Utc>,
    ) -> Result<Requeue, StoreError> {
        let mut g = self.lock();
        let rec = g.record(id)?;
        if rec.submission.claimed_by() != Some(testbed) {
            return Err(TransitionError::StaleClaim { presented: testbed.clone() }.into());
        }
        let attempts = rec.attempts;
        let state = rec.submission.state;
        if attempts < max_retries {
            g.apply(id, LifecycleEvent::LeaseExpired)?;
            let rec = g.record(id)?;
            rec.attempts += 1;
            Ok(Requeue::Requeued { attempts: rec.attempts })
        } else {
            if state == SubmissionState::Claimed {
                // fail is only legal from executing
                g.apply(id, LifecycleEvent::StartExecution { testbed: testbed.clone() })?;
            }
            g.apply(
                id,
                LifecycleEvent::Fail {
                    testbed: testbed.clone(),
                    reason: reason.to_owned(),
                },
            )?;
            g.record(id)?.completed_at = Some(now);
            Ok(Requeue::Failed)
        }
    }

    /// Returns every claimed or executing submission with an expired lease
    /// to pending.
    pub fn reap_expired(&self, now: DateTime<Utc>) -> usize {
        let mut g = self.lock();
        let expired: Vec<SubmissionId> = g
            .submissions
            .values()
            .filter(|r| r.submission.claim.as_ref().is_some_and(|c| c.lease_expiry <= now))
            .map(|r| r.submission.id)
            .collect();
        expired
            .into_iter()
            .filter(|id| g.apply(*id, LifecycleEvent::LeaseExpired).is_ok())
            .count()
    }

    pub fn artifact(&self, submission: SubmissionId, test_case: TestCaseId) -> Option<StoredArtifacts> {
        self.lock().artifacts.get(&(submission, test_case)).cloned()
    }

    pub fn report_writes(&self, id: SubmissionId) -> u32 {
        self.lock().report_writes.get(&id).copied().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use labgrader_core::domain::{CompileStatus, Visibility};
    use labgrader_core::protocol::{Capabilities, TestbedStatus};
    use labgrader_core::{reference, Pin};

    pub(crate) fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2026, 3, 1, 12, 0, 0).unwrap()
    }

    pub(crate) fn descriptor(name: &str) -> TestbedDescriptor {
        TestbedDescriptor {
            testbed_id: TestbedId::new(name),
            dut_profile: "dut-v1".into(),
            capabilities: Capabilities {
                max_sample_rate_hz: 1_000_000,
                pins: vec![Pin(0), Pin(1)],
            },
            wiring: Default::default(),
            status: TestbedStatus::Idle,
            config_hash: String::new(),
            endpoint: String::new(),
            heartbeat_interval_s: 10.0,
        }
    }

    fn store_with_assignment() -> (Store, AssignmentId, TestCaseId) {
        let store = Store::new();
        let a = Assignment {
            id: AssignmentId::new(),
            course: CourseId::new(),
            statement: "pwm".into(),
            dut_profile: "dut-v1".into(),
            deadline: t0() + chrono::Duration::days(7),
            test_cases: vec![],
        };
        let aid = a.id;
        store.insert_assignment(a);
        let tc = reference::fixtures()[0].test_case(Visibility::Public);
        let tcid = tc.id;
        store.add_test_case(aid, tc).unwrap();
        (store, aid, tcid)
    }

    fn submit(store: &Store, aid: AssignmentId, tc: TestCaseId, at: DateTime<Utc>) -> SubmissionId {
        let s = Submission::new(aid, UserId::new(), "HALT".into(), at);
        let id = s.id;
        store.insert_submission(s, vec![tc]);
        id
    }

    fn report() -> GradeReport {
        GradeReport::assemble(CompileStatus::Ok, vec![])
    }

    #[test]
    fn fifo_claims_oldest_first() {
        let (store, aid, tc) = store_with_assignment();
        let late = submit(&store, aid, tc, t0() + chrono::Duration::seconds(5));
        let early = submit(&store, aid, tc, t0());
        let d = descriptor("a");
        let lease = t0() + chrono::Duration::minutes(2);
        assert_eq!(store.claim_next_pending(&d, lease, &Fifo).unwrap().id, early);
        assert_eq!(store.claim_next_pending(&d, lease, &Fifo).unwrap().id, late);
        assert!(store.claim_next_pending(&d, lease, &Fifo).is_none());
    }

    #[test]
    fn incompatible_testbeds_are_skipped() {
        let (store, aid, tc) = store_with_assignment();
        submit(&store, aid, tc, t0());
        let mut v2 = descriptor("v2");
        v2.dut_profile = "dut-v2".into();
        let mut no_p0 = descriptor("p1-only");
        no_p0.capabilities.pins = vec![Pin(1)];
        let lease = t0() + chrono::Duration::minutes(2);
        assert!(store.claim_next_pending(&v2, lease, &Fifo).is_none());
        assert!(store.claim_next_pending(&no_p0, lease, &Fifo).is_none());
        assert!(store.claim_next_pending(&descriptor("ok"), lease, &Fifo).is_some());
    }

    #[test]
    fn completion_after_lease_expiry_is_rejected() {
        let (store, aid, tc) = store_with_assignment();
        let id = submit(&store, aid, tc, t0());
        let d = descriptor("a");
        store.claim_next_pending(&d, t0() + chrono::Duration::seconds(10), &Fifo).unwrap();
        store.start_execution(id, &d.testbed_id).unwrap();
        let late = t0() + chrono::Duration::seconds(11);
        assert_eq!(
            store.complete(id, &d.testbed_id, report(), vec![], late),
            Err(StoreError::LeaseExpired)
        );
        assert!(!store.extend_lease(id, &d.testbed_id, late + chrono::Duration::seconds(60), late));
        assert_eq!(store.reap_expired(late), 1);
        assert_eq!(store.submission(id).unwrap().submission.state, SubmissionState::Pending);
        assert_eq!(store.report_writes(id), 0);
    }

    #[test]
    fn retry_budget() {
        let (store, aid, tc) = store_with_assignment();
        let id = submit(&store, aid, tc, t0());
        let d = descriptor("a");
        let lease = t0() + chrono::Duration::minutes(2);
        for expected in 1..=2 {
            store.claim_next_pending(&d, lease, &Fifo).unwrap();
            store.start_execution(id, &d.testbed_id).unwrap();
            assert_eq!(
                store.requeue_or_fail(id, &d.testbed_id, "down", 2, t0()),
                Ok(Requeue::Requeued { attempts: expected })
            );
        }
        store.claim_next_pending(&d, lease, &Fifo).unwrap();
        assert_eq!(store.requeue_or_fail(id, &d.testbed_id, "down", 2, t0()), Ok(Requeue::Failed));
        let rec = store.submission(id).unwrap();
        assert_eq!(rec.submission.state, SubmissionState::Failed);
        assert_eq!(rec.submission.failure.as_deref(), Some("down"));
    }

    #[test]
    fn deadline_only_extends() {
        let (store, aid, _) = store_with_assignment();
        let a = store.assignment(aid).unwrap();
        assert!(store.extend_deadline(aid, a.deadline - chrono::Duration::hours(1)).is_err());
        let later = a.deadline + chrono::Duration::days(1);
        assert_eq!(store.extend_deadline(aid, later).unwrap().deadline, later);
    }
}
