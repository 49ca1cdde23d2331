//! Grading-script runner. A script reads one test case's artifact directory
//! (`schedule.csv`, `capture.rle`, `print.log`) and yields a score in
//! `[0, 100]` plus feedback. `builtin:pwm` runs in-process; anything else is
//! an external executable.

mod builtin;
mod external;

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ArtifactRefs, GradingScript, SubmissionId, TestCase, TestCaseResult};
use crate::par::{self, Execution};

pub use builtin::{grade_pwm, SESSIONS_OK_FEEDBACK};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_MAX_OUTPUT_BYTES: usize = 64 * 1024;
/// File an external script writes into its working directory.
pub const RESULT_FILE: &str = "result.json";

#[derive(Clone, Debug, PartialEq)]
pub struct GradingInvocation {
    pub script: GradingScript,
    pub artifact_dir: PathBuf,
    pub timeout: Duration,
    pub max_output_bytes: usize,
}

impl GradingInvocation {
    pub fn new(script: GradingScript, artifact_dir: impl Into<PathBuf>) -> Self {
        Self {
            script,
            artifact_dir: artifact_dir.into(),
            timeout: DEFAULT_TIMEOUT,
            max_output_bytes: DEFAULT_MAX_OUTPUT_BYTES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradingOutcome {
    /// In `[0, 100]`.
    pub score: f64,
    pub feedback: String,
    /// Per-session scores in `[0, 1]`, when the script reports them.
    #[serde(default)]
    pub sessions: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum GradingError {
    #[error("grading script did not finish within {0:?}")]
    ScriptTimeout(Duration),
    #[error("grading script output is malformed: {0}")]
    ScriptMalformedOutput(String),
    #[error("grading script exited abnormally: {0}")]
    ScriptCrashed(String),
    #[error("grading script not found: {0}")]
    ScriptNotFound(PathBuf),
    #[error("artifact directory is missing {0}")]
    ArtifactsIncomplete(&'static str),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub fn run_grading(inv: &GradingInvocation) -> Result<GradingOutcome, GradingError> {
    for file in ArtifactRefs::FILES {
        if !inv.artifact_dir.join(file).is_file() {
            return Err(GradingError::ArtifactsIncomplete(file));
        }
    }
    let outcome = match &inv.script {
        GradingScript::BuiltinPwm => builtin::run(&inv.artifact_dir)?,
        GradingScript::External(path) => external::run(path, inv)?,
    };
    validate_outcome(outcome)
}

fn validate_outcome(outcome: GradingOutcome) -> Result<GradingOutcome, GradingError> {
    if !outcome.score.is_finite() || !(0.0..=100.0).contains(&outcome.score) {
        return Err(GradingError::ScriptMalformedOutput(format!(
            "score {} outside [0, 100]",
            outcome.score
        )));
    }
    if let Some(bad) = outcome.sessions.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(GradingError::ScriptMalformedOutput(format!(
            "session score {bad} outside [0, 1]"
        )));
    }
    Ok(outcome)
}

/// Lays out one test case's artifacts the way scripts expect them.
pub fn write_artifact_dir(
    dir: &Path,
    schedule_csv: &str,
    capture_rle: &str,
    print_log: &[u8],
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(ArtifactRefs::SCHEDULE_FILE), schedule_csv)?;
    std::fs::write(dir.join(ArtifactRefs::CAPTURE_FILE), capture_rle)?;
    std::fs::write(dir.join(ArtifactRefs::PRINT_LOG_FILE), print_log)
}

/// Grades one test case's artifacts into a report entry. Script failures
/// become a grader-fault entry rather than an error.
pub fn grade_test_case(
    test_case: &TestCase,
    submission: SubmissionId,
    artifact_dir: &Path,
    timeout: Duration,
) -> TestCaseResult {
    let mut inv = GradingInvocation::new(test_case.script.clone(), artifact_dir);
    inv.timeout = timeout;
    let artifacts = ArtifactRefs::for_submission(submission, test_case.id);
    match run_grading(&inv) {
        Ok(outcome) => {
            let mut entry = TestCaseResult::new(
                test_case.id,
                test_case.weight,
                outcome.sessions,
                outcome.feedback,
                artifacts,
            );
            // an external script may report a total without per-session detail
            entry.score = outcome.score;
            entry
        }
        Err(e) => TestCaseResult::grader_fault(test_case.id, test_case.weight, e.to_string(), artifacts),
    }
}

/// Grades several test cases, preserving order.
pub fn grade_all(
    jobs: &[(&TestCase, PathBuf)],
    submission: SubmissionId,
    timeout: Duration,
    exec: Execution,
) -> Vec<TestCaseResult> {
    par::map(exec, jobs, |(tc, dir)| grade_test_case(tc, submission, dir, timeout))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_of_range_scores_are_rejected() {
        let bad = GradingOutcome { score: 101.0, feedback: String::new(), sessions: vec![] };
        assert!(matches!(validate_outcome(bad), Err(GradingError::ScriptMalformedOutput(_))));
        let bad = GradingOutcome { score: 50.0, feedback: String::new(), sessions: vec![1.5] };
        assert!(matches!(validate_outcome(bad), Err(GradingError::ScriptMalformedOutput(_))));
        let nan = GradingOutcome { score: f64::NAN, feedback: String::new(), sessions: vec![] };
        assert!(validate_outcome(nan).is_err());
    }

    #[test]
    fn missing_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("schedule.csv"), "").unwrap();
        let inv = GradingInvocation::new(GradingScript::BuiltinPwm, dir.path());
        assert!(matches!(run_grading(&inv), Err(GradingError::ArtifactsIncomplete("capture.rle"))));
    }
}
