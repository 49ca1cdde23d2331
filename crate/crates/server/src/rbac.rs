//! Course-scoped permission table. A user holds at most one role per course;
//! users outside the course hold none and are denied everything below.
//!
//! | action              | instructor | student |
//! |---------------------|------------|---------|
//! | create_assignment   | allow      | deny    |
//! | manage_test_cases   | allow      | deny    |
//! | extend_deadline     | allow      | deny    |
//! | view_assignment     | allow      | allow   |
//! | submit              | deny       | allow   |
//! | view_own_result     | allow      | allow   |
//! | view_others_result  | allow      | deny    |
//! | view_overview       | allow      | deny    |
//!
//! Course creation, login and the testbed list need only an authenticated
//! session; heartbeats need a testbed token.

use labgrader_core::domain::Role;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    CreateAssignment,
    ManageTestCases,
    ExtendDeadline,
    ViewAssignment,
    Submit,
    ViewOwnResult,
    ViewOthersResult,
    ViewOverview,
}

impl Action {
    pub const ALL: [Action; 8] = [
        Action::CreateAssignment,
        Action::ManageTestCases,
        Action::ExtendDeadline,
        Action::ViewAssignment,
        Action::Submit,
        Action::ViewOwnResult,
        Action::ViewOthersResult,
        Action::ViewOverview,
    ];
}

pub fn permits(role: Option<Role>, action: Action) -> bool {
    use Action::*;
    match role {
        None => false,
        Some(Role::Instructor) => !matches!(action, Submit),
        Some(Role::Student) => matches!(action, ViewAssignment | Submit | ViewOwnResult),
    }
}

/// Course-scoped endpoints and the action each one checks.
pub const ENDPOINTS: &[(&str, &str, Action)] = &[
    ("POST", "/courses/{c}/assignments", Action::CreateAssignment),
    ("GET", "/assignments/{a}", Action::ViewAssignment),
    ("POST", "/assignments/{a}/testcases", Action::ManageTestCases),
    ("PUT", "/assignments/{a}/deadline", Action::ExtendDeadline),
    ("POST", "/assignments/{a}/submissions", Action::Submit),
    ("GET", "/assignments/{a}/overview", Action::ViewOverview),
    ("GET", "/submissions/{s}", Action::ViewOwnResult),
    ("GET", "/submissions/{s}/artifacts/{testcase}/{file}", Action::ViewOwnResult),
];
