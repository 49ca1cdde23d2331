use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ids::{AssignmentId, CourseId, TestCaseId, UserId};
use super::session::Session;
use crate::engine::CaptureConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Instructor,
    Student,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Course {
    pub id: CourseId,
    pub title: String,
    /// One role per enrolled user.
    pub roster: BTreeMap<UserId, Role>,
}

impl Course {
    pub fn role_of(&self, user: UserId) -> Option<Role> {
        self.roster.get(&user).copied()
    }

    pub fn students(&self) -> impl Iterator<Item = UserId> + '_ {
        self.roster
            .iter()
            .filter(|(_, role)| **role == Role::Student)
            .map(|(user, _)| *user)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub id: AssignmentId,
    pub course: CourseId,
    pub statement: String,
    pub dut_profile: String,
    pub deadline: DateTime<Utc>,
    pub test_cases: Vec<TestCaseId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Public,
    SemiPublic,
    Hidden,
}

impl Visibility {
    pub const ALL: [Visibility; 3] = [Visibility::Public, Visibility::SemiPublic, Visibility::Hidden];
}

/// Which grader turns a test case's artifacts into a score. Serialized as
/// `builtin:pwm` or as the path of an external executable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GradingScript {
    BuiltinPwm,
    External(PathBuf),
}

impl GradingScript {
    pub const BUILTIN_PWM: &'static str = "builtin:pwm";
}

impl fmt::Display for GradingScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GradingScript::BuiltinPwm => f.write_str(Self::BUILTIN_PWM),
            GradingScript::External(path) => write!(f, "{}", path.display()),
        }
    }
}

impl FromStr for GradingScript {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(if s == Self::BUILTIN_PWM {
            GradingScript::BuiltinPwm
        } else {
            GradingScript::External(PathBuf::from(s))
        })
    }
}

impl Serialize for GradingScript {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GradingScript {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(s.parse().expect("infallible"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: TestCaseId,
    pub visibility: Visibility,
    pub sessions: Vec<Session>,
    pub capture: CaptureConfig,
    pub script: GradingScript,
    pub weight: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grading_script_serializes_as_string() {
        let builtin = serde_json::to_string(&GradingScript::BuiltinPwm).unwrap();
        assert_eq!(builtin, "\"builtin:pwm\"");
        let ext: GradingScript = serde_json::from_str("\"/opt/grade.py\"").unwrap();
        assert_eq!(ext, GradingScript::External(PathBuf::from("/opt/grade.py")));
    }
}
