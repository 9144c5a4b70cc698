//! Typed client over any [`Transport`]: in-process routing or HTTP.

use std::fmt;
use std::io::Read;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use bytes::Bytes;
use campuscloud::datacenter::{Health, NodeStatus, RepairReport, UsageReport};
use campuscloud::domain::{Assignment, CourseMaterial, Error, ErrorCode, Role, StudentPatch, StudentRecord};
use campuscloud::provider::{BillingStatement, CatalogEntry};
use campuscloud::workload::{CallError, WorkloadClient};
use campuscloud::{Cloud, LoginGrant, NewAccount};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::api::{
    route, AdvanceRequest, GradeRequest, LoginRequest, Method, NodeRequest, Request, Response, RoleRequest,
    ServiceRequest, StatusRequest, StudentInsert, API_PREFIX,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientError {
    Api(Error),
    Transport(String),
}

impl ClientError {
    pub fn code(&self) -> Option<ErrorCode> {
        match self {
            ClientError::Api(e) => Some(e.code),
            ClientError::Transport(_) => None,
        }
    }
}

impl fmt::Display for ClientError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClientError::Api(e) => write!(f, "{e}"),
            ClientError::Transport(msg) => write!(f, "transport error: {msg}"),
        }
    }
}

impl std::error::Error for ClientError {}

impl From<Error> for ClientError {
    fn from(e: Error) -> Self {
        ClientError::Api(e)
    }
}

impl CallError for ClientError {
    fn api_code(&self) -> Option<ErrorCode> {
        self.code()
    }
}

pub type ClientResult<T> = Result<T, ClientError>;

pub trait Transport {
    fn send(&self, req: Request) -> ClientResult<Response>;
}

/// Routes requests straight into a shared [`Cloud`].
#[derive(Clone)]
pub struct InProcess(pub Arc<RwLock<Cloud>>);

impl Transport for InProcess {
    fn send(&self, req: Request) -> ClientResult<Response> {
        Ok(route(&self.0, &req))
    }
}

pub struct Http {
    base: String,
    agent: ureq::Agent,
}

impl Http {
    /// `base` like `http://127.0.0.1:8080`.
    pub fn new(base: &str) -> Self {
        Http {
            base: base.trim_end_matches('/').to_owned(),
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(120)).build(),
        }
    }
}

impl Transport for Http {
    fn send(&self, req: Request) -> ClientResult<Response> {
        let mut url = format!("{}{}", self.base, req.path);
        if !req.query.is_empty() {
            url = format!("{url}?{}", req.query);
        }
        let mut call = self.agent.request(req.method.as_str(), &url);
        for (name, value) in &req.headers {
            call = call.set(name, value);
        }
        let resp = match call.send_bytes(&req.body) {
            Ok(resp) => resp,
            Err(ureq::Error::Status(_, resp)) => resp,
            Err(e) => return Err(ClientError::Transport(e.to_string())),
        };
        let status = resp.status();
        let content_type = if resp.content_type() == "application/octet-stream" {
            "application/octet-stream"
        } else {
            "application/json"
        };
        let mut body = Vec::new();
        resp.into_reader()
            .read_to_end(&mut body)
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(Response {
            status,
            content_type,
            body: Bytes::from(body),
        })
    }
}

#[derive(Deserialize)]
struct NodeCreated {
    node: String,
}

#[derive(Deserialize)]
struct Versioned {
    version: u64,
}

#[derive(Deserialize)]
struct TickReply {
    tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct DigestReply {
    pub seq: u64,
    pub digest: String,
}

pub struct ApiClient<T: Transport> {
    transport: T,
}

fn path(rest: &str) -> String {
    format!("{API_PREFIX}{rest}")
}

impl<T: Transport> ApiClient<T> {
    pub fn new(transport: T) -> Self {
        ApiClient { transport }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn send(&self, req: Request) -> ClientResult<Response> {
        self.transport.send(req)
    }

    fn call<R: DeserializeOwned>(&self, req: Request) -> ClientResult<R> {
        Ok(self.send(req)?.into_result()?)
    }

    fn call_json<R: DeserializeOwned>(&self, method: Method, rest: &str, token: Option<&str>, body: Option<Value>) -> ClientResult<R> {
        let mut req = Request::new(method, &path(rest));
        if let Some(token) = token {
            req = req.with_token(token);
        }
        if let Some(body) = body {
            req = req.with_json(&body);
        }
        self.call(req)
    }

    fn drop_body(&self, method: Method, rest: &str, token: &str, body: Value) -> ClientResult<()> {
        self.call_json::<Value>(method, rest, Some(token), Some(body)).map(drop)
    }

    pub fn login(&self, user_id: &str, secret: &str, role: Option<Role>) -> ClientResult<LoginGrant> {
        let body = LoginRequest {
            user_id: user_id.to_owned(),
            secret: secret.to_owned(),
            role,
        };
        self.call(Request::new(Method::Post, &path("/login")).with_json(&body))
    }

    pub fn logout(&self, token: &str) -> ClientResult<()> {
        self.drop_body(Method::Post, "/logout", token, json!({}))
    }

    pub fn switch_role(&self, token: &str, role: Role) -> ClientResult<()> {
        self.drop_body(Method::Post, "/session/role", token, json!(RoleRequest { role }))
    }

    pub fn list_entitled_services(&self, token: &str) -> ClientResult<Vec<CatalogEntry>> {
        self.call_json(Method::Get, "/services", Some(token), None)
    }

    pub fn request_service(&self, token: &str, service: &str) -> ClientResult<()> {
        let body = ServiceRequest {
            service: service.to_owned(),
        };
        self.drop_body(Method::Post, "/services/request", token, json!(body))
    }

    pub fn create_account(&self, token: &str, account: &NewAccount) -> ClientResult<()> {
        self.drop_body(Method::Post, "/admin/accounts", token, json!(account))
    }

    pub fn insert_student(&self, token: &str, record: &StudentRecord) -> ClientResult<StudentRecord> {
        self.call_json(Method::Post, "/students", Some(token), Some(json!(StudentInsert::from(record))))
    }

    pub fn retrieve_student(&self, token: &str, user_id: &str) -> ClientResult<StudentRecord> {
        self.call_json(Method::Get, &format!("/students/{}", encode(user_id)), Some(token), None)
    }

    pub fn retrieve_self(&self, token: &str) -> ClientResult<StudentRecord> {
        self.call_json(Method::Get, "/students/self", Some(token), None)
    }

    pub fn update_student(&self, token: &str, user_id: &str, patch: &StudentPatch) -> ClientResult<u64> {
        let reply: Versioned = self.call_json(
            Method::Patch,
            &format!("/students/{}", encode(user_id)),
            Some(token),
            Some(json!(patch)),
        )?;
        Ok(reply.version)
    }

    fn upload<R: DeserializeOwned>(&self, token: &str, rest: &str, payload: Bytes) -> ClientResult<R> {
        let req = Request::new(Method::Post, &path(rest))
            .with_token(token)
            .with_header("content-type", "application/octet-stream")
            .with_body(payload);
        self.call(req)
    }

    pub fn submit_assignment(&self, token: &str, course: &str, payload: Bytes) -> ClientResult<Assignment> {
        self.upload(token, &format!("/courses/{}/assignments", encode(course)), payload)
    }

    pub fn list_submissions(&self, token: &str, course: &str) -> ClientResult<Vec<Assignment>> {
        self.call_json(Method::Get, &format!("/courses/{}/submissions", encode(course)), Some(token), None)
    }

    pub fn upload_material(&self, token: &str, course: &str, payload: Bytes) -> ClientResult<CourseMaterial> {
        self.upload(token, &format!("/courses/{}/materials", encode(course)), payload)
    }

    pub fn download_material(&self, token: &str, course: &str, material: &str) -> ClientResult<Bytes> {
        let req = Request::new(
            Method::Get,
            &path(&format!("/courses/{}/materials/{}", encode(course), encode(material))),
        )
        .with_token(token);
        let resp = self.send(req)?;
        if !resp.is_success() {
            return Err(resp.api_error().into());
        }
        Ok(resp.body)
    }

    pub fn record_grade(&self, token: &str, assignment: &str, grade: &str) -> ClientResult<()> {
        let body = GradeRequest {
            grade: grade.to_owned(),
        };
        self.drop_body(Method::Post, &format!("/assignments/{}/grade", encode(assignment)), token, json!(body))
    }

    pub fn add_node(&self, token: &str, capacity_bytes: i64) -> ClientResult<String> {
        let reply: NodeCreated =
            self.call_json(Method::Post, "/admin/nodes", Some(token), Some(json!(NodeRequest { capacity_bytes })))?;
        Ok(reply.node)
    }

    pub fn set_node_status(&self, token: &str, node: &str, status: NodeStatus) -> ClientResult<()> {
        self.drop_body(
            Method::Post,
            &format!("/admin/nodes/{}/status", encode(node)),
            token,
            json!(StatusRequest { status }),
        )
    }

    pub fn rereplicate(&self, token: &str) -> ClientResult<RepairReport> {
        self.call_json(Method::Post, "/admin/rereplicate", Some(token), Some(json!({})))
    }

    pub fn advance_clock(&self, token: &str, ticks: i64) -> ClientResult<u64> {
        let reply: TickReply =
            self.call_json(Method::Post, "/admin/clock/advance", Some(token), Some(json!(AdvanceRequest { ticks })))?;
        Ok(reply.tick)
    }

    pub fn usage_report(&self, token: &str, from: u64, to: u64) -> ClientResult<UsageReport> {
        self.call_json(Method::Get, &format!("/admin/usage?from={from}&to={to}"), Some(token), None)
    }

    pub fn compute_bill(&self, token: &str, from: u64, to: u64) -> ClientResult<BillingStatement> {
        self.call_json(Method::Get, &format!("/admin/bill?from={from}&to={to}"), Some(token), None)
    }

    pub fn health(&self) -> ClientResult<Health> {
        self.call_json(Method::Get, "/health", None, None)
    }

    pub fn digest(&self, token: &str) -> ClientResult<DigestReply> {
        self.call_json(Method::Get, "/admin/digest", Some(token), None)
    }
}

fn encode(segment: &str) -> String {
    percent_encoding::utf8_percent_encode(segment, percent_encoding::NON_ALPHANUMERIC).to_string()
}

impl<T: Transport> WorkloadClient for ApiClient<T> {
    type Error = ClientError;

    fn login(&mut self, user_id: &str, secret: &str, role: Option<Role>) -> ClientResult<String> {
        Ok(ApiClient::login(self, user_id, secret, role)?.token.0)
    }
    fn create_account(&mut self, token: &str, account: NewAccount) -> ClientResult<()> {
        ApiClient::create_account(self, token, &account)
    }
    fn health(&mut self) -> ClientResult<Health> {
        ApiClient::health(self)
    }
    fn add_node(&mut self, token: &str, capacity_bytes: i64) -> ClientResult<()> {
        ApiClient::add_node(self, token, capacity_bytes).map(drop)
    }
    fn insert_student(&mut self, token: &str, record: StudentRecord) -> ClientResult<()> {
        ApiClient::insert_student(self, token, &record).map(drop)
    }
    fn retrieve_student(&mut self, token: &str, user_id: &str) -> ClientResult<()> {
        ApiClient::retrieve_student(self, token, user_id).map(drop)
    }
    fn update_student(&mut self, token: &str, user_id: &str, patch: StudentPatch) -> ClientResult<()> {
        ApiClient::update_student(self, token, user_id, &patch).map(drop)
    }
    fn submit_assignment(&mut self, token: &str, course: &str, payload: Bytes) -> ClientResult<()> {
        ApiClient::submit_assignment(self, token, course, payload).map(drop)
    }
    fn set_node_status(&mut self, token: &str, node: &str, status: NodeStatus) -> ClientResult<()> {
        ApiClient::set_node_status(self, token, node, status)
    }
    fn rereplicate(&mut self, token: &str) -> ClientResult<()> {
        ApiClient::rereplicate(self, token).map(drop)
    }
    fn advance_clock(&mut self, token: &str, ticks: i64) -> ClientResult<()> {
        ApiClient::advance_clock(self, token, ticks).map(drop)
    }
}
