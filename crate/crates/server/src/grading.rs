use std::time::Duration;

use labgrader_core::domain::{GradeReport, SubmissionId, TestCase, TestCaseId};
use labgrader_core::grading::{grade_all, write_artifact_dir};
use labgrader_core::par::Execution;
use labgrader_core::protocol::ArtifactArchive;
use thiserror::Error;

use crate::store::StoredArtifacts;

#[derive(Debug, Error)]
pub enum GradeError {
    #[error("archive does not match the job: {0}")]
    ArchiveMismatch(String),
    #[error("staging artifacts: {0}")]
    Io(#[from] std::io::Error),
}

/// Grades a coordinator's archive against the submission's test cases.
/// Returns the report and the files to keep for download.
pub fn grade_archive(
    submission: SubmissionId,
    test_cases: &[TestCase],
    archive: &ArtifactArchive,
    timeout: Duration,
    exec: Execution,
) -> Result<(GradeReport, Vec<(TestCaseId, StoredArtifacts)>), GradeError> {
    let expected: Vec<TestCaseId> = test_cases.iter().map(|t| t.id).collect();
    let got: Vec<TestCaseId> = archive.test_cases.iter().map(|t| t.test_case).collect();
    if expected != got {
        return Err(GradeError::ArchiveMismatch(format!(
            "expected {} test cases, got {}",
            expected.len(),
            got.len()
        )));
    }

    let scratch = tempfile::tempdir()?;
    let mut jobs = Vec::with_capacity(test_cases.len());
    for (tc, files) in test_cases.iter().zip(&archive.test_cases) {
        let dir = scratch.path().join(tc.id.to_string());
        write_artifact_dir(&dir, &files.schedule_csv, &files.capture_rle, files.print_log.as_bytes())?;
        jobs.push((tc, dir));
    }
    let entries = grade_all(&jobs, submission, timeout, exec);
    let report = GradeReport::assemble(archive.compile_status.clone(), entries);
    let stored = archive
        .test_cases
        .iter()
        .map(|t| {
            (
                t.test_case,
                StoredArtifacts {
                    schedule_csv: t.schedule_csv.clone(),
                    capture_rle: t.capture_rle.clone(),
                    print_log: t.print_log.clone(),
                },
            )
        })
        .collect();
    Ok((report, stored))
}
