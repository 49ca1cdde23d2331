//! Entities shared by every component, the submission lifecycle and the
//! visibility rules applied to grade reports.

mod course;
mod ids;
mod lifecycle;
mod report;
mod session;
mod visibility;

pub use course::{Assignment, Course, GradingScript, Role, TestCase, Visibility};
pub use ids::{AssignmentId, CourseId, JobId, SubmissionId, TestCaseId, TestbedId, UserId};
pub use lifecycle::{
    transition, Claim, LifecycleEvent, Submission, SubmissionState, TransitionError,
};
pub use report::{ArtifactRefs, CompileStatus, GradeReport, TestCaseResult, GRADER_FAULT_FEEDBACK};
pub use session::{validate_schedule, ScheduleError, Session};
pub(crate) use session::session_end;
pub use visibility::{visible_view, FilteredEntry, FilteredReport};

/// Largest accepted program source, in bytes.
pub const MAX_SOURCE_BYTES: usize = 64 * 1024;
