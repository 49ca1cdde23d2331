use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::course::{Role, TestCase, Visibility};
use super::ids::TestCaseId;
use super::report::{weighted_total, ArtifactRefs, CompileStatus, GradeReport};

/// One test-case entry as a particular viewer may see it. Absent fields were
/// withheld.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilteredEntry {
    pub test_case: TestCaseId,
    pub visibility: Visibility,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_scores: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifacts: Option<ArtifactRefs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grader_fault: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilteredReport {
    pub compile_status: CompileStatus,
    pub entries: Vec<FilteredEntry>,
    /// Weighted total over the entries listed here.
    pub total: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Exposure {
    Omitted,
    ScoreOnly,
    Details,
    Everything,
}

fn exposure(viewer: Role, visibility: Visibility, after_deadline: bool) -> Exposure {
    match (viewer, visibility, after_deadline) {
        (Role::Instructor, _, _) => Exposure::Everything,
        (Role::Student, _, true) => Exposure::Details,
        (Role::Student, Visibility::Public, false) => Exposure::Details,
        (Role::Student, Visibility::SemiPublic, false) => Exposure::ScoreOnly,
        (Role::Student, Visibility::Hidden, false) => Exposure::Omitted,
    }
}

/// Filters a report for `viewer`. Instructors see everything. Before the
/// deadline a student sees public entries in full, semi-public entries as a
/// bare score, and nothing of hidden entries. From the deadline on students
/// see every entry's details. Grader-fault diagnostics stay instructor-only.
///
/// Entries whose test case is missing from `test_cases` are treated as hidden.
pub fn visible_view(
    report: &GradeReport,
    test_cases: &[TestCase],
    viewer: Role,
    now: DateTime<Utc>,
    deadline: DateTime<Utc>,
) -> FilteredReport {
    let after_deadline = now >= deadline;
    let mut kept = Vec::new();
    let mut entries = Vec::new();
    for entry in &report.entries {
        let visibility = test_cases
            .iter()
            .find(|tc| tc.id == entry.test_case)
            .map(|tc| tc.visibility)
            .unwrap_or(Visibility::Hidden);
        let exposure = exposure(viewer, visibility, after_deadline);
        if exposure == Exposure::Omitted {
            continue;
        }
        let details = matches!(exposure, Exposure::Details | Exposure::Everything);
        kept.push(entry);
        entries.push(FilteredEntry {
            test_case: entry.test_case,
            visibility,
            score: entry.score,
            session_scores: details.then(|| entry.session_scores.clone()),
            feedback: details.then(|| entry.feedback.clone()),
            artifacts: details.then(|| entry.artifacts.clone()),
            grader_fault: if exposure == Exposure::Everything {
                entry.grader_fault.clone()
            } else {
                None
            },
        });
    }
    FilteredReport {
        compile_status: report.compile_status.clone(),
        total: weighted_total(kept),
        entries,
    }
}
