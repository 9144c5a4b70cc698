//! Seeded workload generation and a driver that runs a workload against
//! anything implementing [`WorkloadClient`].

use std::collections::BTreeMap;

use bytes::Bytes;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{Cloud, NewAccount};
use crate::datacenter::{Health, NodeStatus, GIB};
use crate::domain::{Error, ErrorCode, Result, Role, StudentPatch, StudentRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mix {
    pub retrieve: f64,
    pub insert: f64,
    pub submit: f64,
    pub update: f64,
    pub admin: f64,
}

impl Default for Mix {
    fn default() -> Self {
        Mix {
            retrieve: 0.5,
            insert: 0.2,
            submit: 0.15,
            update: 0.1,
            admin: 0.05,
        }
    }
}

impl Mix {
    fn weights(&self) -> [f64; 5] {
        [self.retrieve, self.insert, self.submit, self.update, self.admin]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub seed: u64,
    pub ops: u64,
    #[serde(default)]
    pub mix: Mix,
    /// Inclusive submission size range in bytes.
    #[serde(default = "default_payload_bytes")]
    pub payload_bytes: [u64; 2],
    /// Up nodes ensured before the run, and the id range failures pick from.
    #[serde(default = "default_nodes")]
    pub nodes: u64,
}

fn default_payload_bytes() -> [u64; 2] {
    [1024, 256 * 1024]
}

fn default_nodes() -> u64 {
    4
}

impl WorkloadSpec {
    pub fn new(seed: u64, ops: u64) -> Self {
        WorkloadSpec {
            seed,
            ops,
            mix: Mix::default(),
            payload_bytes: default_payload_bytes(),
            nodes: default_nodes(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ops == 0 {
            return Err(Error::validation("ops must be positive"));
        }
        let weights = self.mix.weights();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::validation("mix proportions must be non-negative"));
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::validation("mix proportions must sum to 1"));
        }
        let [lo, hi] = self.payload_bytes;
        if lo == 0 || lo > hi {
            return Err(Error::validation("payload_bytes must be a range [min, max] with 0 < min <= max"));
        }
        if self.nodes == 0 {
            return Err(Error::validation("nodes must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdminAction {
    AdvanceClock(i64),
    FailNode(String),
    RecoverNode(String),
    Rereplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorkloadOp {
    Retrieve { user_id: String },
    Insert { record: StudentRecord },
    Submit { course: String, size: u64, fill_seed: u64 },
    Update { user_id: String, patch: StudentPatch },
    Admin(AdminAction),
}

const COURSES: [&str; 4] = ["CS101", "CS204", "MATH110", "PHYS150"];
const PROGRAMS: [&str; 4] = ["BSc", "MSc", "BEng", "PhD"];

/// Expands a spec into its operation sequence. Pure in the spec.
pub fn generate(spec: &WorkloadSpec) -> Result<Vec<WorkloadOp>> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let kinds = WeightedIndex::new(spec.mix.weights()).expect("validated weights");
    let prefix = format!("W{:04x}", spec.seed & 0xffff);
    let mut inserted: Vec<String> = Vec::new();
    let mut failed: Option<String> = None;
    let mut ops = Vec::with_capacity(spec.ops as usize);

    let pick_id = |rng: &mut ChaCha20Rng, inserted: &[String]| {
        if inserted.is_empty() || rng.gen_bool(0.1) {
            format!("X{:08}", rng.gen_range(0..100_000_000u32))
        } else {
            inserted[rng.gen_range(0..inserted.len())].clone()
        }
    };

    for _ in 0..spec.ops {
        let op = match kinds.sample(&mut rng) {
            0 => WorkloadOp::Retrieve {
                user_id: pick_id(&mut rng, &inserted),
            },
            1 => {
                let user_id = if !inserted.is_empty() && rng.gen_bool(0.05) {
                    inserted[rng.gen_range(0..inserted.len())].clone()
                } else {
                    let id = format!("{prefix}-{:05}", inserted.len() + 1);
                    inserted.push(id.clone());
                    id
                };
                let n = rng.gen_range(0..10_000u32);
                WorkloadOp::Insert {
                    record: StudentRecord {
                        user_id: user_id.parse().expect("generated ids are valid"),
                        name: format!("Student {n}"),
                        program: PROGRAMS[rng.gen_range(0..PROGRAMS.len())].to_owned(),
                        year: rng.gen_range(1..=5),
                        contact: format!("s{n}@example.edu"),
                        version: 1,
                    },
                }
            }
            2 => WorkloadOp::Submit {
                course: COURSES[rng.gen_range(0..COURSES.len())].to_owned(),
                size: rng.gen_range(spec.payload_bytes[0]..=spec.payload_bytes[1]),
                fill_seed: rng.gen(),
            },
            3 => {
                let user_id = pick_id(&mut rng, &inserted);
                let patch = if rng.gen_bool(0.5) {
                    StudentPatch {
                        contact: Some(format!("c{}@example.edu", rng.gen_range(0..10_000u32))),
                        ..Default::default()
                    }
                } else {
                    StudentPatch {
                        program: Some(PROGRAMS[rng.gen_range(0..PROGRAMS.len())].to_owned()),
                        year: Some(rng.gen_range(1..=5)),
                        ..Default::default()
                    }
                };
                WorkloadOp::Update { user_id, patch }
            }
            _ => {
                let action = if let Some(node) = failed.take() {
                    AdminAction::RecoverNode(node)
                } else {
                    match rng.gen_range(0..10u32) {
                        0..=4 => AdminAction::AdvanceClock(rng.gen_range(1..=5)),
                        5..=7 => {
                            let node = format!("n{}", rng.gen_range(1..=spec.nodes));
                            failed = Some(node.clone());
                            AdminAction::FailNode(node)
                        }
                        _ => AdminAction::Rereplicate,
                    }
                };
                WorkloadOp::Admin(action)
            }
        };
        ops.push(op);
    }
    Ok(ops)
}

/// Deterministic submission bytes.
pub fn fill_payload(size: u64, fill_seed: u64) -> Bytes {
    let mut buf = vec![0u8; size as usize];
    ChaCha20Rng::seed_from_u64(fill_seed).fill_bytes(&mut buf);
    Bytes::from(buf)
}

/// Failure of one client call: either an API error, which a workload counts,
/// or something else (a broken connection), which aborts the run.
pub trait CallError: From<Error> {
    fn api_code(&self) -> Option<ErrorCode>;
}

impl CallError for Error {
    fn api_code(&self) -> Option<ErrorCode> {
        Some(self.code)
    }
}

/// The calls a workload needs, so the same driver runs in-process or over
/// the wire.
pub trait WorkloadClient {
    type Error: CallError;

    fn login(&mut self, user_id: &str, secret: &str, role: Option<Role>) -> Result<String, Self::Error>;
    fn create_account(&mut self, token: &str, account: NewAccount) -> Result<(), Self::Error>;
    fn health(&mut self) -> Result<Health, Self::Error>;
    fn add_node(&mut self, token: &str, capacity_bytes: i64) -> Result<(), Self::Error>;
    fn insert_student(&mut self, token: &str, record: StudentRecord) -> Result<(), Self::Error>;
    fn retrieve_student(&mut self, token: &str, user_id: &str) -> Result<(), Self::Error>;
    fn update_student(&mut self, token: &str, user_id: &str, patch: StudentPatch) -> Result<(), Self::Error>;
    fn submit_assignment(&mut self, token: &str, course: &str, payload: Bytes) -> Result<(), Self::Error>;
    fn set_node_status(&mut self, token: &str, node: &str, status: NodeStatus) -> Result<(), Self::Error>;
    fn rereplicate(&mut self, token: &str) -> Result<(), Self::Error>;
    fn advance_clock(&mut self, token: &str, ticks: i64) -> Result<(), Self::Error>;
}

impl WorkloadClient for Cloud {
    type Error = Error;

    fn login(&mut self, user_id: &str, secret: &str, role: Option<Role>) -> Result<String> {
        Ok(Cloud::login(self, user_id, secret, role)?.token.0)
    }
    fn create_account(&mut self, token: &str, account: NewAccount) -> Result<()> {
        Cloud::create_account(self, token, account)
    }
    fn health(&mut self) -> Result<Health> {
        Ok(Cloud::health(self))
    }
    fn add_node(&mut self, token: &str, capacity_bytes: i64) -> Result<()> {
        Cloud::add_node(self, token, capacity_bytes).map(drop)
    }
    fn insert_student(&mut self, token: &str, record: StudentRecord) -> Result<()> {
        Cloud::insert_student(self, token, record).map(drop)
    }
    fn retrieve_student(&mut self, token: &str, user_id: &str) -> Result<()> {
        Cloud::retrieve_student(self, token, user_id).map(drop)
    }
    fn update_student(&mut self, token: &str, user_id: &str, patch: StudentPatch) -> Result<()> {
        Cloud::update_student(self, token, user_id, patch).map(drop)
    }
    fn submit_assignment(&mut self, token: &str, course: &str, payload: Bytes) -> Result<()> {
        Cloud::submit_assignment(self, token, course, payload).map(drop)
    }
    fn set_node_status(&mut self, token: &str, node: &str, status: NodeStatus) -> Result<()> {
        Cloud::set_node_status(self, token, node, status)
    }
    fn rereplicate(&mut self, token: &str) -> Result<()> {
        Cloud::rereplicate(self, token).map(drop)
    }
    fn advance_clock(&mut self, token: &str, ticks: i64) -> Result<()> {
        Cloud::advance_clock(self, token, ticks).map(drop)
    }
}

pub const WORKLOAD_STAFF: &str = "wl-staff";
pub const WORKLOAD_STUDENT: &str = "wl-student";
const WORKLOAD_SECRET: &str = "workload-secret";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSummary {
    pub ops: u64,
    pub applied: u64,
    pub errors: BTreeMap<ErrorCode, u64>,
}

fn ensure_account<C: WorkloadClient + ?Sized>(
    client: &mut C,
    admin: &str,
    user_id: &str,
    role: Role,
) -> Result<String, C::Error> {
    let created = client.create_account(
        admin,
        NewAccount {
            user_id: user_id.to_owned(),
            roles: vec![role],
            secret: WORKLOAD_SECRET.to_owned(),
            ..Default::default()
        },
    );
    match created {
        Ok(()) => {}
        Err(e) if e.api_code() == Some(ErrorCode::DuplicateId) => {}
        Err(e) => return Err(e),
    }
    client.login(user_id, WORKLOAD_SECRET, Some(role))
}

/// Runs `spec` as the given administrator. Setup creates the workload's
/// staff and student accounts (if absent) and tops the cluster up to
/// `spec.nodes` Up nodes. Failures of individual operations are counted by
/// code; failures during setup, and transport failures, abort the run.
pub fn run_workload<C: WorkloadClient + ?Sized>(
    client: &mut C,
    spec: &WorkloadSpec,
    admin_user: &str,
    admin_secret: &str,
) -> Result<WorkloadSummary, C::Error> {
    let ops = generate(spec)?;
    let admin = client.login(admin_user, admin_secret, Some(Role::Admin))?;
    let staff = ensure_account(client, &admin, WORKLOAD_STAFF, Role::Staff)?;
    let student = ensure_account(client, &admin, WORKLOAD_STUDENT, Role::Student)?;
    let up = client.health()?.up_nodes;
    for _ in up..spec.nodes {
        client.add_node(&admin, GIB as i64)?;
    }

    let mut summary = WorkloadSummary {
        ops: ops.len() as u64,
        ..Default::default()
    };
    for op in ops {
        let result = match op {
            WorkloadOp::Retrieve { user_id } => client.retrieve_student(&staff, &user_id),
            WorkloadOp::Insert { record } => client.insert_student(&staff, record),
            WorkloadOp::Submit { course, size, fill_seed } => {
                client.submit_assignment(&student, &course, fill_payload(size, fill_seed))
            }
            WorkloadOp::Update { user_id, patch } => client.update_student(&staff, &user_id, patch),
            WorkloadOp::Admin(AdminAction::AdvanceClock(t)) => client.advance_clock(&admin, t),
            WorkloadOp::Admin(AdminAction::FailNode(n)) => {
                client.set_node_status(&admin, &n, NodeStatus::Down)
            }
            WorkloadOp::Admin(AdminAction::RecoverNode(n)) => {
                client.set_node_status(&admin, &n, NodeStatus::Up)
            }
            WorkloadOp::Admin(AdminAction::Rereplicate) => client.rereplicate(&admin),
        };
        match result {
            Ok(()) => summary.applied += 1,
            Err(e) => match e.api_code() {
                Some(code) => *summary.errors.entry(code).or_default() += 1,
                None => return Err(e),
            },
        }
    }
    Ok(summary)
}
