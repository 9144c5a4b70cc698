//! Routing of wire requests onto [`Cloud`] operations.

use std::sync::{RwLock, RwLockReadGuard, RwLockWriteGuard};

use bytes::Bytes;
use campuscloud::canonical::to_canonical_vec;
use campuscloud::datacenter::NodeStatus;
use campuscloud::domain::{Error, ErrorCode, Role, StudentPatch, StudentRecord};
use campuscloud::provider::Capability;
use campuscloud::{Cloud, NewAccount};
use percent_encoding::percent_decode_str;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const API_PREFIX: &str = "/api/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Get,
    Post,
    Patch,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
            Method::Patch => "PATCH",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "GET" => Some(Method::Get),
            "POST" => Some(Method::Post),
            "PATCH" => Some(Method::Patch),
            _ => None,
        }
    }
}

/// What a caller must hold to reach an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Public,
    /// Any live session.
    Session,
    Capability(Capability),
    /// `any` for every id, or `own` when the id is the caller's.
    OwnOrAny { own: Capability, any: Capability },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operation {
    Login,
    Logout,
    SwitchRole,
    ListServices,
    RequestService,
    InsertStudent,
    RetrieveSelf,
    RetrieveStudent,
    UpdateStudent,
    SubmitAssignment,
    ListSubmissions,
    UploadMaterial,
    DownloadMaterial,
    RecordGrade,
    AddNode,
    SetNodeStatus,
    Rereplicate,
    AdvanceClock,
    UsageReport,
    ComputeBill,
    Health,
    CreateAccount,
    Digest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Endpoint {
    pub method: Method,
    /// Relative to [`API_PREFIX`]; `{x}` matches one path segment.
    pub path: &'static str,
    pub operation: Operation,
    pub access: Access,
    pub mutates: bool,
}

const fn ep(method: Method, path: &'static str, operation: Operation, access: Access, mutates: bool) -> Endpoint {
    Endpoint {
        method,
        path,
        operation,
        access,
        mutates,
    }
}

use Access::{Capability as Cap, OwnOrAny, Public, Session};
use Capability as C;
use Method::{Get, Patch, Post};

/// Every endpoint, in match order.
pub const ENDPOINTS: &[Endpoint] = &[
    ep(Post, "/login", Operation::Login, Public, true),
    ep(Post, "/logout", Operation::Logout, Session, true),
    ep(Post, "/session/role", Operation::SwitchRole, Session, true),
    ep(Get, "/services", Operation::ListServices, Cap(C::ServiceRequest), false),
    ep(Post, "/services/request", Operation::RequestService, Cap(C::ServiceRequest), true),
    ep(Post, "/students", Operation::InsertStudent, Cap(C::StudentInsert), true),
    ep(Get, "/students/self", Operation::RetrieveSelf, Cap(C::StudentReadSelf), false),
    ep(
        Get,
        "/students/{id}",
        Operation::RetrieveStudent,
        OwnOrAny {
            own: C::StudentReadSelf,
            any: C::StudentRetrieveAny,
        },
        false,
    ),
    ep(
        Patch,
        "/students/{id}",
        Operation::UpdateStudent,
        OwnOrAny {
            own: C::StudentUpdateSelf,
            any: C::StudentUpdateAny,
        },
        true,
    ),
    ep(Post, "/courses/{c}/assignments", Operation::SubmitAssignment, Cap(C::AssignmentSubmit), true),
    ep(Get, "/courses/{c}/submissions", Operation::ListSubmissions, Cap(C::SubmissionList), false),
    ep(Post, "/courses/{c}/materials", Operation::UploadMaterial, Cap(C::MaterialUpload), true),
    ep(Get, "/courses/{c}/materials/{m}", Operation::DownloadMaterial, Cap(C::MaterialDownload), false),
    ep(Post, "/assignments/{id}/grade", Operation::RecordGrade, Cap(C::GradeRecord), true),
    ep(Post, "/admin/nodes", Operation::AddNode, Cap(C::AdminNodeOps), true),
    ep(Post, "/admin/nodes/{id}/status", Operation::SetNodeStatus, Cap(C::AdminNodeOps), true),
    ep(Post, "/admin/rereplicate", Operation::Rereplicate, Cap(C::AdminNodeOps), true),
    ep(Post, "/admin/clock/advance", Operation::AdvanceClock, Cap(C::AdminClock), true),
    ep(Get, "/admin/usage", Operation::UsageReport, Cap(C::AdminBilling), false),
    ep(Get, "/admin/bill", Operation::ComputeBill, Cap(C::AdminBilling), false),
    ep(Get, "/health", Operation::Health, Public, false),
    ep(Post, "/admin/accounts", Operation::CreateAccount, Cap(C::AdminAccounts), true),
    ep(Get, "/admin/digest", Operation::Digest, Cap(C::AdminNodeOps), false),
];

pub fn http_status(code: ErrorCode) -> u16 {
    match code {
        ErrorCode::DuplicateId => 409,
        ErrorCode::NotFound => 404,
        ErrorCode::Forbidden => 403,
        ErrorCode::Unauthorized => 401,
        ErrorCode::Validation => 400,
        ErrorCode::CapacityExceeded => 507,
        ErrorCode::InsufficientNodes => 503,
        ErrorCode::Degraded => 503,
        ErrorCode::ReplayError => 500,
    }
}

/// Wire form of an error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl From<&Error> for ApiError {
    fn from(e: &Error) -> Self {
        ApiError {
            code: e.code,
            message: e.message.clone(),
        }
    }
}

impl From<ApiError> for Error {
    fn from(e: ApiError) -> Self {
        Error::new(e.code, e.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub method: Method,
    /// Path without the query string.
    pub path: String,
    pub query: String,
    /// Lower-case names.
    pub headers: Vec<(String, String)>,
    pub body: Bytes,
}

impl Request {
    /// `target` is a path with optional `?query`.
    pub fn new(method: Method, target: &str) -> Self {
        let (path, query) = target.split_once('?').unwrap_or((target, ""));
        Request {
            method,
            path: path.to_owned(),
            query: query.to_owned(),
            headers: Vec::new(),
            body: Bytes::new(),
        }
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn with_header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.to_ascii_lowercase(), value.to_owned()));
        self
    }

    pub fn with_token(self, token: &str) -> Self {
        self.with_header("authorization", &format!("Bearer {token}"))
    }

    pub fn with_json<T: Serialize>(self, body: &T) -> Self {
        self.with_header("content-type", "application/json")
            .with_body(Bytes::from(to_canonical_vec(body)))
    }

    pub fn with_body(mut self, body: Bytes) -> Self {
        self.body = body;
        self
    }

    pub fn bearer(&self) -> Option<&str> {
        let value = self.header("authorization")?;
        let (scheme, token) = value.split_once(' ')?;
        scheme.eq_ignore_ascii_case("bearer").then(|| token.trim())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Bytes,
}

impl Response {
    pub fn json<T: Serialize>(status: u16, body: &T) -> Self {
        Response {
            status,
            content_type: "application/json",
            body: Bytes::from(to_canonical_vec(body)),
        }
    }

    pub fn bytes(body: Bytes) -> Self {
        Response {
            status: 200,
            content_type: "application/octet-stream",
            body,
        }
    }

    pub fn error(err: &Error) -> Self {
        Self::json(http_status(err.code), &ApiError::from(err))
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// Decodes a success body as `T`, or the error body.
    pub fn into_result<T: DeserializeOwned>(self) -> Result<T, Error> {
        if !self.is_success() {
            return Err(self.api_error());
        }
        serde_json::from_slice(&self.body)
            .map_err(|e| Error::validation(format!("unexpected response body: {e}")))
    }

    pub fn api_error(&self) -> Error {
        match serde_json::from_slice::<ApiError>(&self.body) {
            Ok(e) => e.into(),
            Err(_) => Error::validation(format!(
                "HTTP {}: {}",
                self.status,
                String::from_utf8_lossy(&self.body)
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoginRequest {
    pub user_id: String,
    pub secret: String,
    #[serde(default)]
    pub role: Option<Role>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleRequest {
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceRequest {
    pub service: String,
}

/// Insert body. A `version`, if sent, is ignored: new records start at 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentInsert {
    pub user_id: String,
    pub name: String,
    pub program: String,
    pub year: u32,
    pub contact: String,
    #[serde(default, skip_serializing)]
    pub version: Option<u64>,
}

impl From<&StudentRecord> for StudentInsert {
    fn from(r: &StudentRecord) -> Self {
        StudentInsert {
            user_id: r.user_id.to_string(),
            name: r.name.clone(),
            program: r.program.clone(),
            year: r.year,
            contact: r.contact.clone(),
            version: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradeRequest {
    pub grade: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRequest {
    pub capacity_bytes: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatusRequest {
    pub status: NodeStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvanceRequest {
    pub ticks: i64,
}

fn match_path<'a>(pattern: &str, segments: &[&'a str]) -> Option<Vec<&'a str>> {
    let parts: Vec<&str> = pattern.trim_start_matches('/').split('/').collect();
    if parts.len() != segments.len() {
        return None;
    }
    let mut params = Vec::new();
    for (p, s) in parts.iter().zip(segments) {
        if p.starts_with('{') {
            if s.is_empty() {
                return None;
            }
            params.push(*s);
        } else if p != s {
            return None;
        }
    }
    Some(params)
}

/// Finds the endpoint for a request line. Unknown paths are NOT_FOUND; a
/// known path with another method is VALIDATION (405).
pub fn match_endpoint(method: Method, path: &str) -> Result<(&'static Endpoint, Vec<String>), (u16, Error)> {
    let rest = path
        .strip_prefix(API_PREFIX)
        .filter(|r| r.starts_with('/'))
        .ok_or_else(|| (404, Error::not_found(format!("no endpoint at {path}"))))?;
    let segments: Vec<&str> = rest.trim_start_matches('/').split('/').collect();
    let mut path_known = false;
    for endpoint in ENDPOINTS {
        if let Some(params) = match_path(endpoint.path, &segments) {
            if endpoint.method == method {
                let params = params
                    .into_iter()
                    .map(|p| percent_decode_str(p).decode_utf8_lossy().into_owned())
                    .collect();
                return Ok((endpoint, params));
            }
            path_known = true;
        }
    }
    if path_known {
        Err((405, Error::validation(format!("{} not allowed on {path}", method.as_str()))))
    } else {
        Err((404, Error::not_found(format!("no endpoint at {path}"))))
    }
}

fn body<T: DeserializeOwned>(req: &Request) -> Result<T, Error> {
    let raw: &[u8] = if req.body.is_empty() { b"{}" } else { &req.body };
    serde_json::from_slice(raw).map_err(|e| Error::validation(format!("malformed request body: {e}")))
}

fn query_u64(req: &Request, name: &str) -> Result<u64, Error> {
    let value = form_urlencoded::parse(req.query.as_bytes())
        .find(|(k, _)| k == name)
        .map(|(_, v)| v.into_owned())
        .ok_or_else(|| Error::validation(format!("missing query parameter {name}")))?;
    value
        .parse()
        .map_err(|_| Error::validation(format!("query parameter {name} must be a non-negative integer")))
}

fn read(cloud: &RwLock<Cloud>) -> RwLockReadGuard<'_, Cloud> {
    cloud.read().unwrap_or_else(|e| e.into_inner())
}

fn write(cloud: &RwLock<Cloud>) -> RwLockWriteGuard<'_, Cloud> {
    cloud.write().unwrap_or_else(|e| e.into_inner())
}

/// Checks the endpoint's declared access before any body is interpreted.
fn precheck(cloud: &RwLock<Cloud>, endpoint: &Endpoint, token: Option<&str>) -> Result<(), Error> {
    if endpoint.access == Public {
        return Ok(());
    }
    let token = token.ok_or_else(Error::unauthorized)?;
    let cloud = read(cloud);
    match endpoint.access {
        Public => Ok(()),
        Session | OwnOrAny { .. } => cloud.check_session(token).map(drop),
        Cap(cap) => cloud.authorize(token, cap).map(drop),
    }
}

/// Handles one request. Never panics on bad input; every failure becomes an
/// error body.
pub fn route(cloud: &RwLock<Cloud>, req: &Request) -> Response {
    let (endpoint, params) = match match_endpoint(req.method, &req.path) {
        Ok(found) => found,
        Err((status, err)) => {
            let mut resp = Response::error(&err);
            resp.status = status;
            return resp;
        }
    };
    let token = req.bearer();
    if let Err(err) = precheck(cloud, endpoint, token) {
        return Response::error(&err);
    }
    match dispatch(cloud, endpoint.operation, &params, token.unwrap_or(""), req) {
        Ok(resp) => resp,
        Err(err) => Response::error(&err),
    }
}

fn dispatch(
    cloud: &RwLock<Cloud>,
    op: Operation,
    params: &[String],
    token: &str,
    req: &Request,
) -> Result<Response, Error> {
    let ok = |v: serde_json::Value| Response::json(200, &v);
    Ok(match op {
        Operation::Login => {
            let b: LoginRequest = body(req)?;
            Response::json(200, &write(cloud).login(&b.user_id, &b.secret, b.role)?)
        }
        Operation::Logout => {
            write(cloud).logout(token)?;
            ok(json!({}))
        }
        Operation::SwitchRole => {
            let b: RoleRequest = body(req)?;
            write(cloud).switch_role(token, b.role)?;
            ok(json!({"role": b.role}))
        }
        Operation::ListServices => Response::json(200, &read(cloud).list_entitled_services(token)?),
        Operation::RequestService => {
            let b: ServiceRequest = body(req)?;
            write(cloud).request_service(token, &b.service)?;
            ok(json!({"service": b.service}))
        }
        Operation::InsertStudent => {
            let b: StudentInsert = body(req)?;
            let record = StudentRecord {
                user_id: campuscloud::domain::validate_user_id(&b.user_id)?,
                name: b.name,
                program: b.program,
                year: b.year,
                contact: b.contact,
                version: 1,
            };
            Response::json(201, &write(cloud).insert_student(token, record)?)
        }
        Operation::RetrieveSelf => Response::json(200, &read(cloud).retrieve_self(token)?),
        Operation::RetrieveStudent => Response::json(200, &read(cloud).retrieve_student(token, &params[0])?),
        Operation::UpdateStudent => {
            let patch: StudentPatch = body(req)?;
            let version = write(cloud).update_student(token, &params[0], patch)?;
            ok(json!({"user_id": params[0], "version": version}))
        }
        Operation::SubmitAssignment => Response::json(
            201,
            &write(cloud).submit_assignment(token, &params[0], req.body.clone())?,
        ),
        Operation::ListSubmissions => Response::json(200, &read(cloud).list_submissions(token, &params[0])?),
        Operation::UploadMaterial => Response::json(
            201,
            &write(cloud).upload_material(token, &params[0], req.body.clone())?,
        ),
        Operation::DownloadMaterial => {
            Response::bytes(read(cloud).download_material(token, &params[0], &params[1])?)
        }
        Operation::RecordGrade => {
            let b: GradeRequest = body(req)?;
            write(cloud).record_grade(token, &params[0], &b.grade)?;
            ok(json!({"assignment": params[0], "grade": b.grade}))
        }
        Operation::AddNode => {
            let b: NodeRequest = body(req)?;
            let node = write(cloud).add_node(token, b.capacity_bytes)?;
            Response::json(201, &json!({"node": node}))
        }
        Operation::SetNodeStatus => {
            let b: StatusRequest = body(req)?;
            write(cloud).set_node_status(token, &params[0], b.status)?;
            ok(json!({"node": params[0], "status": b.status}))
        }
        Operation::Rereplicate => Response::json(200, &write(cloud).rereplicate(token)?),
        Operation::AdvanceClock => {
            let b: AdvanceRequest = body(req)?;
            let tick = write(cloud).advance_clock(token, b.ticks)?;
            ok(json!({"tick": tick}))
        }
        Operation::UsageReport => {
            let (from, to) = (query_u64(req, "from")?, query_u64(req, "to")?);
            Response::json(200, &read(cloud).usage_report(token, from, to)?)
        }
        Operation::ComputeBill => {
            let (from, to) = (query_u64(req, "from")?, query_u64(req, "to")?);
            Response::json(200, &read(cloud).compute_bill(token, from, to)?)
        }
        Operation::Health => Response::json(200, &read(cloud).health()),
        Operation::CreateAccount => {
            let b: NewAccount = body(req)?;
            let user_id = b.user_id.clone();
            write(cloud).create_account(token, b)?;
            Response::json(201, &json!({"user_id": user_id}))
        }
        Operation::Digest => {
            let (seq, digest) = read(cloud).admin_digest(token)?;
            ok(json!({"seq": seq, "digest": digest}))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_segments_win_over_parameters() {
        let (ep, params) = match_endpoint(Get, "/api/v1/students/self").unwrap();
        assert_eq!(ep.operation, Operation::RetrieveSelf);
        assert!(params.is_empty());
        let (ep, params) = match_endpoint(Get, "/api/v1/students/S1001").unwrap();
        assert_eq!(ep.operation, Operation::RetrieveStudent);
        assert_eq!(params, vec!["S1001"]);
    }

    #[test]
    fn unknown_and_wrong_method() {
        assert_eq!(match_endpoint(Get, "/api/v1/nope").unwrap_err().0, 404);
        assert_eq!(match_endpoint(Get, "/api/v2/health").unwrap_err().0, 404);
        assert_eq!(match_endpoint(Get, "/api/v1/login").unwrap_err().0, 405);
        assert_eq!(match_endpoint(Get, "/api/v1/students/").unwrap_err().0, 404);
    }

    #[test]
    fn params_are_percent_decoded() {
        let (_, params) = match_endpoint(Get, "/api/v1/courses/CS%20101/materials/mat-1").unwrap();
        assert_eq!(params, vec!["CS 101", "mat-1"]);
    }

    #[test]
    fn bearer_parsing() {
        let req = Request::new(Get, "/x").with_header("Authorization", "bearer abc ");
        assert_eq!(req.bearer(), Some("abc"));
        let req = Request::new(Get, "/x").with_header("Authorization", "Basic abc");
        assert_eq!(req.bearer(), None);
    }

    #[test]
    fn status_table() {
        let pairs: Vec<(ErrorCode, u16)> = ErrorCode::ALL.iter().map(|c| (*c, http_status(*c))).collect();
        assert_eq!(
            pairs,
            vec![
                (ErrorCode::DuplicateId, 409),
                (ErrorCode::NotFound, 404),
                (ErrorCode::Forbidden, 403),
                (ErrorCode::Unauthorized, 401),
                (ErrorCode::Validation, 400),
                (ErrorCode::CapacityExceeded, 507),
                (ErrorCode::InsufficientNodes, 503),
                (ErrorCode::ReplayError, 500),
                (ErrorCode::Degraded, 503),
            ]
        );
    }

    #[test]
    fn every_endpoint_is_reachable() {
        for ep in ENDPOINTS {
            let path = format!("{API_PREFIX}{}", ep.path.replace("{c}", "CS101").replace("{m}", "mat-1").replace("{id}", "x1y"));
            let (found, _) = match_endpoint(ep.method, &path).unwrap();
            assert_eq!(found.operation, ep.operation, "{path}");
        }
    }
}
