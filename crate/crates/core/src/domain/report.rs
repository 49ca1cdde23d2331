use serde::{Deserialize, Serialize};

use super::ids::{SubmissionId, TestCaseId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CompileStatus {
    Ok,
    CompileError { message: String },
}

impl CompileStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, CompileStatus::Ok)
    }
}

/// Server-relative download paths of the three per-test-case artifacts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRefs {
    pub schedule: String,
    pub capture: String,
    pub print_log: String,
}

impl ArtifactRefs {
    pub const SCHEDULE_FILE: &'static str = "schedule.csv";
    pub const CAPTURE_FILE: &'static str = "capture.rle";
    pub const PRINT_LOG_FILE: &'static str = "print.log";
    pub const FILES: [&'static str; 3] = [Self::SCHEDULE_FILE, Self::CAPTURE_FILE, Self::PRINT_LOG_FILE];

    pub fn for_submission(submission: SubmissionId, test_case: TestCaseId) -> Self {
        let base = format!("/submissions/{submission}/artifacts/{test_case}");
        Self {
            schedule: format!("{base}/{}", Self::SCHEDULE_FILE),
            capture: format!("{base}/{}", Self::CAPTURE_FILE),
            print_log: format!("{base}/{}", Self::PRINT_LOG_FILE),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestCaseResult {
    pub test_case: TestCaseId,
    pub weight: f64,
    /// Per-session scores in `[0, 1]`.
    pub session_scores: Vec<f64>,
    /// `100 * mean(session_scores)`, or 0 with no sessions.
    pub score: f64,
    pub feedback: String,
    pub artifacts: ArtifactRefs,
    /// Set when the grading script itself failed. Only instructors see the
    /// detail; students get a neutral message in `feedback`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grader_fault: Option<String>,
}

pub const GRADER_FAULT_FEEDBACK: &str = "grading error, instructor notified";

impl TestCaseResult {
    pub fn new(
        test_case: TestCaseId,
        weight: f64,
        session_scores: Vec<f64>,
        feedback: String,
        artifacts: ArtifactRefs,
    ) -> Self {
        let score = mean_percent(&session_scores);
        Self {
            test_case,
            weight,
            session_scores,
            score,
            feedback,
            artifacts,
            grader_fault: None,
        }
    }

    pub fn grader_fault(
        test_case: TestCaseId,
        weight: f64,
        detail: String,
        artifacts: ArtifactRefs,
    ) -> Self {
        Self {
            test_case,
            weight,
            session_scores: Vec::new(),
            score: 0.0,
            feedback: GRADER_FAULT_FEEDBACK.to_owned(),
            artifacts,
            grader_fault: Some(detail),
        }
    }
}

fn mean_percent(scores: &[f64]) -> f64 {
    if scores.is_empty() {
        0.0
    } else {
        100.0 * scores.iter().sum::<f64>() / scores.len() as f64
    }
}

/// Weighted mean of entry scores; 0 when the weights sum to zero.
pub(crate) fn weighted_total<'a>(entries: impl IntoIterator<Item = &'a TestCaseResult>) -> f64 {
    let (num, den) = entries
        .into_iter()
        .fold((0.0, 0.0), |(n, d), e| (n + e.weight * e.score, d + e.weight));
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradeReport {
    pub compile_status: CompileStatus,
    pub entries: Vec<TestCaseResult>,
    pub total: f64,
}

impl GradeReport {
    /// Builds a report and enforces its arithmetic: a compile error zeroes
    /// every entry, and the total is the weight-averaged entry score.
    pub fn assemble(compile_status: CompileStatus, mut entries: Vec<TestCaseResult>) -> Self {
        if let CompileStatus::CompileError { message } = &compile_status {
            for entry in &mut entries {
                entry.session_scores.iter_mut().for_each(|s| *s = 0.0);
                entry.score = 0.0;
                if entry.grader_fault.is_none() {
                    entry.feedback = format!("program did not compile: {message}");
                }
            }
        }
        let total = weighted_total(&entries);
        Self {
            compile_status,
            entries,
            total,
        }
    }

    pub fn entry(&self, test_case: TestCaseId) -> Option<&TestCaseResult> {
        self.entries.iter().find(|e| e.test_case == test_case)
    }
}
