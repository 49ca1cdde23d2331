use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, PathRejection};
use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::request::Parts;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use labgrader_core::domain::{
    validate_schedule, visible_view, GRADER_FAULT_FEEDBACK, ArtifactRefs, Assignment, AssignmentId, Course, CourseId, FilteredReport,
    GradingScript, Role, Session, Submission, SubmissionId, SubmissionState, TestCase, TestCaseId, TestbedId, UserId,
    Visibility, MAX_SOURCE_BYTES,
};
use labgrader_core::dut::DutProfile;
use labgrader_core::protocol::TestbedDescriptor;
use labgrader_core::CaptureConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::auth;
use crate::clock::Clock;
use crate::error::{ApiError, ApiResult};
use crate::rbac::{permits, Action};
use crate::registry::{Liveness, Registry, RegistryEntry, Upsert};
use crate::scheduler::WorkerPool;
use crate::store::{Store, SubmissionRecord, UserRecord};

pub struct AppState {
    pub store: Arc<Store>,
    pub registry: Arc<Registry>,
    pub pool: Arc<WorkerPool>,
    pub clock: Arc<dyn Clock>,
    pub testbed_tokens: HashMap<TestbedId, String>,
    pub session_ttl: chrono::Duration,
}

type AppStateRef = State<Arc<AppState>>;

/// JSON body whose rejections use the API error shape.
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| ApiJson(v))
            .map_err(|r: JsonRejection| ApiError::new(r.status(), "bad_request", r.body_text()))
    }
}

/// Path parameters whose rejections use the API error shape.
pub struct ApiPath<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned + Send> FromRequestParts<S> for ApiPath<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        Path::<T>::from_request_parts(parts, state)
            .await
            .map(|Path(v)| ApiPath(v))
            .map_err(|r: PathRejection| ApiError::new(StatusCode::NOT_FOUND, "not_found", r.body_text()))
    }
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
}

/// The user behind the request's session token.
pub struct AuthUser(pub UserRecord);

impl FromRequestParts<Arc<AppState>> for AuthUser {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &Arc<AppState>) -> Result<Self, ApiError> {
        let token = bearer(&parts.headers).ok_or_else(ApiError::unauthorized)?;
        let user = state
            .store
            .session_user(token, state.clock.now())
            .and_then(|id| state.store.user(id))
            .ok_or_else(ApiError::unauthorized)?;
        Ok(AuthUser(user))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(serde_json::json!({ "ok": true })) }))
        .route("/auth/login", post(login))
        .route("/courses", post(create_course))
        .route("/courses/{c}/assignments", post(create_assignment))
        .route("/assignments/{a}", get(get_assignment))
        .route("/assignments/{a}/testcases", post(create_test_case))
        .route("/assignments/{a}/deadline", put(extend_deadline))
        .route("/assignments/{a}/submissions", post(submit))
        .route("/assignments/{a}/overview", get(overview))
        .route("/submissions/{s}", get(get_submission))
        .route("/submissions/{s}/artifacts/{tc}/{file}", get(get_artifact))
        .route("/testbeds/heartbeat", post(heartbeat))
        .route("/testbeds", get(list_testbeds))
        .with_state(state)
}

// lookups shared by handlers

fn assignment_and_role(state: &AppState, id: AssignmentId, user: UserId) -> ApiResult<(Assignment, Course, Option<Role>)> {
    let assignment = state.store.assignment(id).ok_or_else(|| ApiError::not_found("assignment"))?;
    let course = state.store.course(assignment.course).ok_or_else(|| ApiError::not_found("course"))?;
    let role = course.role_of(user);
    Ok((assignment, course, role))
}

fn require(role: Option<Role>, action: Action) -> ApiResult<()> {
    if permits(role, action) {
        Ok(())
    } else {
        Err(ApiError::forbidden())
    }
}

// auth

#[derive(Deserialize)]
pub struct LoginRequest {
    pub username: String,
    pub password: String,
}

#[derive(Serialize, Deserialize)]
pub struct LoginResponse {
    pub token: String,
    pub user_id: UserId,
    pub expires_at: DateTime<Utc>,
}

async fn login(State(state): AppStateRef, ApiJson(req): ApiJson<LoginRequest>) -> ApiResult<Json<LoginResponse>> {
    let user = state.store.user_by_name(&req.username);
    // verify against a dummy hash for unknown users so timing does not reveal them
    let stored = user.as_ref().map_or(DUMMY_HASH, |u| u.credential.as_str());
    let ok = auth::verify_password(&req.password, stored);
    let user = user.filter(|_| ok).ok_or_else(ApiError::unauthorized)?;
    let token = auth::new_token();
    let expires_at = state.clock.now() + state.session_ttl;
    state.store.create_session(token.clone(), user.id, expires_at);
    Ok(Json(LoginResponse {
        token,
        user_id: user.id,
        expires_at,
    }))
}

const DUMMY_HASH: &str = "pbkdf2-sha256$100000$00000000000000000000000000000000$\
                          0000000000000000000000000000000000000000000000000000000000000000";

// courses and assignments

#[derive(Deserialize)]
pub struct RosterEntry {
    pub username: String,
    pub role: Role,
}

#[derive(Deserialize)]
pub struct CreateCourse {
    pub title: String,
    #[serde(default)]
    pub roster: Vec<RosterEntry>,
}

async fn create_course(
    State(state): AppStateRef,
    AuthUser(user): AuthUser,
    ApiJson(req): ApiJson<CreateCourse>,
) -> ApiResult<(StatusCode, Json<Course>)> {
    let mut roster = std::collections::BTreeMap::new();
    for entry in req.roster {
        let member = state
            .store
            .user_by_name(&entry.username)
            .ok_or_else(|| ApiError::invalid(format!("unknown user {}", entry.username)))?;
        roster.insert(member.id, entry.role);
    }
    roster.insert(user.id, Role::Instructor);
    let course = Course {
        id: CourseId::new(),
        title: req.title,
        roster,
    };
    state.store.insert_course(course.clone());
    Ok((StatusCode::CREATED, Json(course)))
}

#[derive(Deserialize)]
pub struct CreateAssignment {
    pub statement: String,
    pub dut_profile: String,
    pub deadline: DateTime<Utc>,
}

async fn create_assignment(
    State(state): AppStateRef,
    AuthUser(user): AuthUser,
    ApiPath(course_id): ApiPath<CourseId>,
    ApiJson(req): ApiJson<CreateAssignment>,
) -> ApiResult<(StatusCode, Json<Assignment>)> {
    let course = state.store.course(course_id).ok_or_else(|| ApiError::not_found("course"))?;
    require(course.role_of(user.id), Action::CreateAssignment)?;
    if DutProfile::lookup(&req.dut_profile).is_none() {
        return Err(ApiError::invalid(format!("unknown dut profile {}", req.dut_profile)));
    }
    let assignment = Assignment {
        id: AssignmentId::new(),
        course: course_id,
        statement: req.statement,
        dut_profile: req.dut_profile,
        deadline: req.deadline,
        test_cases: Vec::new(),
    };
    state.store.insert_assignment(assignment.clone());
    Ok((StatusCode::CREATED, Json(assignment)))
}

/// A test case as shown to one viewer; detail fields are withheld where the
/// visibility rules say so.
#[derive(Serialize, Deserialize)]
pub struct TestCaseView {
    pub id: TestCaseId,
    pub visibility: Visibility,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sessions: Option<Vec<Session>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capture: Option<CaptureConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<GradingScript>,
}

#[derive(Serialize, Deserialize)]
pub struct AssignmentView {
    pub id: AssignmentId,
    pub course: CourseId,
    pub statement: String,
    pub dut_profile: String,
    pub deadline: DateTime<Utc>,
    pub test_cases: Vec<TestCaseView>,
}

async fn get_assignment(
    State(state): AppStateRef,
    AuthUser(user): AuthUser,
    ApiPath(id): ApiPath<AssignmentId>,
) -> ApiResult<Json<AssignmentView>> {
    let (assignment, _, role) = assignment_and_role(&state, id, user.id)?;
    require(role, Action::ViewAssignment)?;
    let full = role == Some(Role::Instructor) || state.clock.now() >= assignment.deadline;
    let test_cases = state
        .store
        .test_cases(&assignment.test_cases)
        .into_iter()
        .filter_map(|tc| {
            let details = full || tc.visibility == Visibility::Public;
            if !full && tc.visibility == Visibility::Hidden {
                return None;
            }
            Some(TestCaseView {
                id: tc.id,
                visibility: tc.visibility,
                weight: tc.weight,
                sessions: details.then_some(tc.sessions),
                capture: details.then_some(tc.capture),
                script: (role == Some(Role::Instructor)).then_some(tc.script),
            })
        })
        .collect();
    Ok(Json(AssignmentView {
        id: assignment.id,
        course: assignment.course,
        statement: assignment.statement,
        dut_profile: assignment.dut_profile,
        deadline: assignment.deadline,
        test_cases,
    }))
}

#[derive(Deserialize)]
pub struct CreateTestCase {
    pub visibility: Visibility,
    pub sessions: Vec<Session>,
    pub capture: CaptureConfig,
    #[serde(default = "builtin_script")]
    pub script: GradingScript,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn builtin_script() -> GradingScript {
    GradingScript::BuiltinPwm
}

fn unit_weight() -> f64 {
    1.0
}

async fn create_test_case(
    State(state): AppStateRef,
    AuthUser(user): AuthUser,
    ApiPath(id): ApiPath<AssignmentId>,
    ApiJson(req): ApiJson<CreateTestCase>,
) -> ApiResult<(StatusCode, Json<TestCase>)> {
    let (assignment, _, role) = assignment_and_role(&state, id, user.id)?;
    require(role, Action::ManageTestCases)?;
    req.capture.validate().map_err(|e| ApiError::invalid(e.to_string()))?;
    validate_schedule(&req.sessions, req.capture.duration_us).map_err(|e| ApiError::invalid(e.to_string()))?;
    let profile = DutProfile::lookup(&assignment.dut_profile).expect("validated at creation");
    if !profile.has_pin(req.capture.pin) {
        return Err(ApiError::invalid(format!("{} has no pin {}", profile.id, req.capture.pin)));
    }
    if !req.weight.is_finite() || req.weight < 0.0 {
        return Err(ApiError::invalid("weight must be a non-negative number"));
    }
    let tc = TestCase {
        id: TestCaseId::new(),
        visibility: req.visibility,
        sessions: req.sessions,
        capture: req.capture,
        script: req.script,
        weight: req.weight,
    };
    state.store.add_test_case(id, tc.clone())?;
    Ok((StatusCode::CREATED, Json(tc)))
}

#[derive(Deserialize)]
pub struct ExtendDeadline {
    pub deadline: DateTime<Utc>,
}

async fn extend_deadline(
    State(state): AppStateRef,
    AuthUser(user): AuthUser,
    ApiPath(id): ApiPath<AssignmentId>,
    ApiJson(req): ApiJson<ExtendDeadline>,
) -> ApiResult<Json<Assignment>> {
    let (_, _, role) = assignment_and_role(&state, id, user.id)?;
    require(role, Action::ExtendDeadline)?;
    let updated = state
        .store
        .extend_deadline(id, req.deadline)
        .map_err(|e| ApiError::invalid(e.to_string()))?;
    Ok(Json(updated))
}

// submissions

#[derive(Deserialize)]
pub struct CreateSubmission {
    pub source: String,
}

#[derive(Serialize, Deserialize)]
pub struct SubmissionCreated {
    pub submission_id: SubmissionId,
    pub submitted_at: DateTime<Utc>,
    pub state: SubmissionState,
}

async fn submit(
    State(state): AppStateRef,
    AuthUser(user): AuthUser,
    ApiPath(id): ApiPath<AssignmentId>,
    ApiJson(req): ApiJson<CreateSubmission>,
) -> ApiResult<(StatusCode, Json<SubmissionCreated>)> {
    let (assignment, _, role) = assignment_and_role(&state, id, user.id)?;
    require(role, Action::Submit)?;
    let now = state.clock.now();
    if now >= assignment.deadline {
        return Err(ApiError::new(
            StatusCode::FORBIDDEN,
            "deadline_passed",
            format!("deadline was {}", assignment.deadline.to_rfc3339()),
        ));
    }
    if req.source.len() > MAX_SOURCE_BYTES {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "payload_too_large",
            format!("source is {} bytes, limit is {MAX_SOURCE_BYTES}", req.source.len()),
        ));
    }
    let submission = Submission::new(id, user.id, req.source, now);
    let created = SubmissionCreated {
        submission_id: submission.id,
        submitted_at: now,
        state: submission.state,
    };
    state.store.insert_submission(submission, assignment.test_cases.clone());
    Ok((StatusCode::ACCEPTED, Json(created)))
}

#[derive(Serialize, Deserialize)]
pub struct SubmissionView {
    pub submission_id: SubmissionId,
    pub assignment: AssignmentId,
    pub student: UserId,
    pub submitted_at: DateTime<Utc>,
    pub state: SubmissionState,
    pub completed_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<FilteredReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Loads a submission and checks the caller may see it.
fn readable_submission(state: &AppState, id: SubmissionId, user: UserId) -> ApiResult<(SubmissionRecord, Assignment, Role)> {
    let rec = state.store.submission(id).ok_or_else(|| ApiError::not_found("submission"))?;
    let (assignment, _, role) = assignment_and_role(state, rec.submission.assignment, user)?;
    let action = if rec.submission.student == user {
        Action::ViewOwnResult
    } else {
        Action::ViewOthersResult
    };
    require(role, action)?;
    Ok((rec, assignment, role.expect("permitted roles exist")))
}

fn filtered(state: &AppState, rec: &SubmissionRecord, assignment: &Assignment, role: Role) -> Option<FilteredReport> {
    let report = rec.submission.result.as_ref()?;
    let test_cases = state.store.test_cases(&rec.test_cases);
    Some(visible_view(report, &test_cases, role, state.clock.now(), assignment.deadline))
}

async fn get_submission(
    State(state): AppStateRef,
    AuthUser(user): AuthUser,
    ApiPath(id): ApiPath<SubmissionId>,
) -> ApiResult<Json<SubmissionView>> {
    let (rec, assignment, role) = readable_submission(&state, id, user.id)?;
    let s = &rec.submission;
    if !s.state.is_terminal() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "not_graded_yet",
            format!("submission is {}", serde_json::to_value(s.state).expect("state").as_str().unwrap_or("")),
        ));
    }
    let failure = s.failure.as_ref().map(|reason| match role {
        Role::Instructor => reason.clone(),
        Role::Student => GRADER_FAULT_FEEDBACK.to_owned(),
    });
    Ok(Json(SubmissionView {
        submission_id: s.id,
        assignment: s.assignment,
        student: s.student,
        submitted_at: s.submitted_at,
        state: s.state,
        completed_at: rec.completed_at,
        report: filtered(&state, &rec, &assignment, role),
        failure,
    }))
}

async fn get_artifact(
    State(state): AppStateRef,
    AuthUser(user): AuthUser,
    ApiPath((id, tc, file)): ApiPath<(SubmissionId, TestCaseId, String)>,
) -> ApiResult<Response> {
    let (rec, assignment, role) = readable_submission(&state, id, user.id)?;
    let view = filtered(&state, &rec, &assignment, role).ok_or_else(|| ApiError::not_found("artifact"))?;
    let entry = view
        .entries
        .iter()
        .find(|e| e.test_case == tc)
        .ok_or_else(|| ApiError::not_found("artifact"))?;
    if entry.artifacts.is_none() {
        return Err(ApiError::forbidden());
    }
    let stored = state.store.artifact(id, tc).ok_or_else(|| ApiError::not_found("artifact"))?;
    let body = stored.file(&file).ok_or_else(|| ApiError::not_found("artifact"))?;
    let content_type = if file == ArtifactRefs::SCHEDULE_FILE {
        "text/csv; charset=utf-8"
    } else {
        "text/plain; charset=utf-8"
    };
    Ok(([(header::CONTENT_TYPE, content_type)], body.to_owned()).into_response())
}

// instructor overview

#[derive(Deserialize)]
pub struct OverviewQuery {
    #[serde(default)]
    pub include_hidden: bool,
}

#[derive(Serialize, Deserialize)]
pub struct OverviewPoint {
    pub submission_id: SubmissionId,
    pub submitted_at: DateTime<Utc>,
    pub state: SubmissionState,
    pub completed_at: Option<DateTime<Utc>>,
    /// Score a student would see for this submission; absent until graded.
    pub score: Option<f64>,
}

#[derive(Serialize, Deserialize)]
pub struct StudentSeries {
    pub student: UserId,
    pub username: String,
    pub points: Vec<OverviewPoint>,
}

#[derive(Serialize, Deserialize)]
pub struct ProgressionOverview {
    pub assignment: AssignmentId,
    pub deadline: DateTime<Utc>,
    pub include_hidden: bool,
    pub students: Vec<StudentSeries>,
}

async fn overview(
    State(state): AppStateRef,
    AuthUser(user): AuthUser,
    ApiPath(id): ApiPath<AssignmentId>,
    Query(q): Query<OverviewQuery>,
) -> ApiResult<Json<ProgressionOverview>> {
    let (assignment, course, role) = assignment_and_role(&state, id, user.id)?;
    require(role, Action::ViewOverview)?;
    let now = state.clock.now();
    let mut series: Vec<StudentSeries> = course
        .students()
        .map(|student| StudentSeries {
            student,
            username: state.store.user(student).map(|u| u.username).unwrap_or_default(),
            points: Vec::new(),
        })
        .collect();
    series.sort_by(|a, b| a.username.cmp(&b.username));
    let index: HashMap<UserId, usize> = series.iter().enumerate().map(|(i, s)| (s.student, i)).collect();
    for rec in state.store.submissions_for(id) {
        let Some(&i) = index.get(&rec.submission.student) else {
            continue;
        };
        let score = rec.submission.result.as_ref().map(|report| {
            if q.include_hidden {
                report.total
            } else {
                let tcs = state.store.test_cases(&rec.test_cases);
                visible_view(report, &tcs, Role::Student, now, assignment.deadline).total
            }
        });
        series[i].points.push(OverviewPoint {
            submission_id: rec.submission.id,
            submitted_at: rec.submission.submitted_at,
            state: rec.submission.state,
            completed_at: rec.completed_at,
            score,
        });
    }
    Ok(Json(ProgressionOverview {
        assignment: id,
        deadline: assignment.deadline,
        include_hidden: q.include_hidden,
        students: series,
    }))
}

// testbeds

#[derive(Serialize, Deserialize)]
pub struct HeartbeatAck {
    pub ack: bool,
    pub liveness: Liveness,
}

async fn heartbeat(
    State(state): AppStateRef,
    headers: HeaderMap,
    ApiJson(descriptor): ApiJson<TestbedDescriptor>,
) -> ApiResult<Json<HeartbeatAck>> {
    let presented = bearer(&headers).ok_or_else(ApiError::unauthorized)?;
    match state.testbed_tokens.get(&descriptor.testbed_id) {
        Some(expected) if expected == presented => {}
        _ => return Err(ApiError::unauthorized()),
    }
    let id = descriptor.testbed_id.clone();
    match state.registry.upsert(descriptor, state.clock.now()) {
        Upsert::New => tracing::info!(testbed = %id, "testbed registered"),
        Upsert::Changed => tracing::info!(testbed = %id, "testbed descriptor changed"),
        Upsert::Unchanged => {}
    }
    state.pool.reconcile();
    Ok(Json(HeartbeatAck {
        ack: true,
        liveness: Liveness::Online,
    }))
}

async fn list_testbeds(State(state): AppStateRef, AuthUser(_): AuthUser) -> Json<Vec<RegistryEntry>> {
    Json(state.registry.entries(state.clock.now()))
}
