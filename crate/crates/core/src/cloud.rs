//! The running system: one [`CloudState`] behind the single-writer commit
//! path. Every accepted mutation is applied, appended to the event log
//! (synced for file logs) and only then acknowledged.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use bytes::Bytes;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::canonical::state_digest;
use crate::config::{CloudConfig, CONFIG_FILE};
use crate::datacenter::{
    sync_node_dirs, Health, NodeId, NodeStatus, RepairReport, StorageEffect, UsageReport,
};
use crate::domain::{
    validate_course, validate_user_id, Assignment, AssignmentId, CourseMaterial, Error, ErrorCode,
    MaterialId, Result, Role, StudentPatch, StudentRecord, UserId,
};
use crate::edu::AuditReport;
use crate::persistence::{
    list_snapshots, read_log, read_snapshot, write_snapshot, EventLog, EventLogEntry, Snapshot,
    TailPolicy, GENESIS_DIGEST, LOG_FILE,
};
use crate::provider::{
    hash_secret, BillingStatement, Capability, CatalogEntry, Principal, ServiceId, Session,
    SessionToken,
};
use crate::state::{CloudState, CloudStateDoc, Op, Outcome, StaffProfile};

pub const NODES_DIR: &str = "nodes";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewAccount {
    pub user_id: String,
    pub roles: Vec<Role>,
    pub secret: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub department: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginGrant {
    pub token: SessionToken,
    pub role: Role,
    pub roles: Vec<Role>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub entries: u64,
    pub digest: String,
    /// Snapshot seqs whose recorded digest matched the replayed state.
    pub checkpoints_verified: Vec<u64>,
    /// Snapshot seqs beyond the end of the log: the log was cut at an entry
    /// boundary after they were taken.
    pub snapshots_past_end: Vec<u64>,
}

pub struct Cloud {
    config: CloudConfig,
    state: CloudState,
    log: EventLog,
    data_dir: Option<PathBuf>,
    rng: ChaCha20Rng,
    checkpoints: Vec<(u64, String)>,
    poisoned: Option<Error>,
    mirror_error: Option<String>,
}

impl std::fmt::Debug for Cloud {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cloud")
            .field("data_dir", &self.data_dir)
            .field("seq", &self.log.last_seq())
            .field("state", &self.state.datacenter)
            .finish_non_exhaustive()
    }
}

fn derive_rng(seed: u64, seq: u64, head: &str) -> ChaCha20Rng {
    let digest = Sha256::digest(format!("{seed}:{seq}:{head}").as_bytes());
    ChaCha20Rng::from_seed(digest.into())
}

fn log_payload(args: Value, outcome: &Outcome) -> Value {
    json!({"args": args, "result": outcome})
}

/// Applies one logged entry to `state`, checking that the recorded tick and
/// outcome are reproduced exactly.
fn replay_entry(state: &mut CloudState, config: &CloudConfig, entry: &EventLogEntry) -> Result<()> {
    let seq = entry.seq;
    let args = entry.payload.get("args").cloned().unwrap_or(Value::Null);
    let op = Op::from_log_parts(&entry.op, args)
        .map_err(|e| Error::replay(seq, format!("undecodable {} entry: {e}", entry.op)))?;
    let recorded: Outcome = serde_json::from_value(
        entry.payload.get("result").cloned().unwrap_or(Value::Null),
    )
    .map_err(|e| Error::replay(seq, format!("undecodable result: {e}")))?;
    if entry.tick != state.tick() {
        return Err(Error::replay(
            seq,
            format!("entry tick {} but state is at tick {}", entry.tick, state.tick()),
        ));
    }
    let outcome = state
        .apply(config, &op)
        .map_err(|e| Error::replay(seq, format!("{} no longer applies: {e}", entry.op)))?;
    if outcome != recorded {
        return Err(Error::replay(seq, format!("{} produced a different outcome", entry.op)));
    }
    Ok(())
}

/// Rebuilds state from genesis. `on_entry` sees the state after each entry.
pub fn replay<F>(config: &CloudConfig, entries: &[EventLogEntry], mut on_entry: F) -> Result<CloudState>
where
    F: FnMut(u64, &CloudState) -> Result<()>,
{
    let mut state = CloudState::new(config);
    for entry in entries {
        replay_entry(&mut state, config, entry)?;
        on_entry(entry.seq, &state)?;
    }
    Ok(state)
}

/// Replays the data directory's log from genesis, cross-checking every
/// snapshot. Any corruption, including a partial final entry, is an error.
pub fn verify_replay(dir: &Path) -> Result<ReplayReport> {
    let config = CloudConfig::load(&dir.join(CONFIG_FILE))?;
    let contents = read_log(&dir.join(LOG_FILE), TailPolicy::Strict)?;
    let snapshots = list_snapshots(dir)?
        .into_iter()
        .map(|(seq, path)| Ok((seq, read_snapshot(&path)?)))
        .collect::<Result<Vec<(u64, Snapshot)>>>()?;
    let entries = contents.entries;
    let mut verified = Vec::new();
    let state = replay(&config, &entries, |seq, state| {
        if let Some((_, snap)) = snapshots.iter().find(|(s, _)| *s == seq) {
            if snap.log_digest != entries[seq as usize - 1].digest() {
                return Err(Error::replay(seq, "snapshot was taken on a different history"));
            }
            if state.digest() != snap.digest {
                return Err(Error::replay(seq, "replayed state differs from snapshot"));
            }
            verified.push(seq);
        }
        Ok(())
    })?;
    Ok(ReplayReport {
        entries: entries.len() as u64,
        digest: state.digest(),
        checkpoints_verified: verified,
        snapshots_past_end: snapshots
            .iter()
            .map(|(s, _)| *s)
            .filter(|s| *s > entries.len() as u64)
            .collect(),
    })
}

impl Cloud {
    pub fn in_memory(config: CloudConfig) -> Result<Self> {
        config.validate()?;
        Ok(Cloud {
            rng: derive_rng(config.rng_seed, 0, GENESIS_DIGEST),
            state: CloudState::new(&config),
            config,
            log: EventLog::in_memory(),
            data_dir: None,
            checkpoints: Vec::new(),
            poisoned: None,
            mirror_error: None,
        })
    }

    /// Initializes an empty data directory.
    pub fn create(dir: &Path, config: CloudConfig) -> Result<Self> {
        config.validate()?;
        let config_path = dir.join(CONFIG_FILE);
        if config_path.exists() {
            return Err(Error::duplicate(format!("{} already initialized", dir.display())));
        }
        fs::create_dir_all(dir).map_err(|e| Error::validation(format!("{}: {e}", dir.display())))?;
        config.save(&config_path)?;
        fs::File::create(dir.join(LOG_FILE))
            .and_then(|f| f.sync_all())
            .map_err(|e| Error::validation(format!("{}: {e}", dir.display())))?;
        Self::open(dir)
    }

    /// Opens a data directory, restoring state from the newest usable
    /// snapshot plus the log tail. A partial final log entry (never
    /// acknowledged) is cut off.
    pub fn open(dir: &Path) -> Result<Self> {
        let config = CloudConfig::load(&dir.join(CONFIG_FILE))?;
        let log_path = dir.join(LOG_FILE);
        let contents = read_log(&log_path, TailPolicy::DropPartial)?;
        let entries = &contents.entries;

        let mut start = 0usize;
        let mut state = CloudState::new(&config);
        for (seq, path) in list_snapshots(dir)?.into_iter().rev() {
            if seq as usize > entries.len() {
                continue;
            }
            let Ok(snap) = read_snapshot(&path) else { continue };
            if snap.log_digest != entries[seq as usize - 1].digest() {
                continue;
            }
            let Ok(doc) = serde_json::from_value::<CloudStateDoc>(snap.state) else {
                continue;
            };
            state = CloudState::from_doc(&config, doc)?;
            start = seq as usize;
            break;
        }
        for entry in &entries[start..] {
            replay_entry(&mut state, &config, entry)?;
        }

        let log = EventLog::open_file(&log_path, &contents)?;
        let mut cloud = Cloud {
            rng: derive_rng(config.rng_seed, log.last_seq(), log.last_digest()),
            config,
            state,
            log,
            data_dir: Some(dir.to_owned()),
            checkpoints: Vec::new(),
            poisoned: None,
            mirror_error: None,
        };
        cloud.mirror(None);
        Ok(cloud)
    }

    pub fn config(&self) -> &CloudConfig {
        &self.config
    }

    pub fn state(&self) -> &CloudState {
        &self.state
    }

    pub fn digest(&self) -> String {
        self.state.digest()
    }

    pub fn last_seq(&self) -> u64 {
        self.log.last_seq()
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    /// Entries of an in-memory log.
    pub fn log_entries(&self) -> Option<&[EventLogEntry]> {
        self.log.memory_entries()
    }

    /// `(seq, digest)` pairs recorded live at each snapshot boundary.
    pub fn checkpoints(&self) -> &[(u64, String)] {
        &self.checkpoints
    }

    pub fn mirror_error(&self) -> Option<&str> {
        self.mirror_error.as_deref()
    }

    fn commit(&mut self, op: Op) -> Result<Outcome> {
        if let Some(err) = &self.poisoned {
            return Err(err.clone());
        }
        let tick = self.state.tick();
        let outcome = self.state.apply(&self.config, &op)?;
        let (name, args) = op.to_log_parts();
        let entry = self.log.next_entry(tick, name, log_payload(args, &outcome));
        if let Err(err) = self.log.append(entry) {
            // Memory and log now disagree; stop accepting writes.
            let err = Error::new(
                ErrorCode::ReplayError,
                format!("event log append failed, refusing further mutations: {}", err.message),
            );
            self.poisoned = Some(err.clone());
            return Err(err);
        }
        let seq = self.log.last_seq();
        if self.config.snapshot_every > 0 && seq.is_multiple_of(self.config.snapshot_every) {
            self.checkpoint(seq)?;
        }
        let touched: BTreeSet<NodeId> = outcome
            .effects
            .iter()
            .filter_map(|e| match e {
                StorageEffect::NodeAdded { node, .. }
                | StorageEffect::NodeStatus { node, .. }
                | StorageEffect::ReplicaWritten { node, .. }
                | StorageEffect::ReplicaRemoved { node, .. } => Some(*node),
                _ => None,
            })
            .collect();
        if !touched.is_empty() {
            self.mirror(Some(&touched));
        }
        Ok(outcome)
    }

    fn mirror(&mut self, only: Option<&BTreeSet<NodeId>>) {
        if let Some(dir) = &self.data_dir {
            self.mirror_error = sync_node_dirs(&self.state.datacenter, &dir.join(NODES_DIR), only)
                .err()
                .map(|e| e.to_string());
        }
    }

    fn checkpoint(&mut self, seq: u64) -> Result<()> {
        let doc = serde_json::to_value(self.state.to_doc()).expect("state serializes");
        let digest = state_digest(&doc);
        self.checkpoints.push((seq, digest.clone()));
        if let Some(dir) = &self.data_dir {
            write_snapshot(
                dir,
                &Snapshot {
                    seq,
                    digest,
                    log_digest: self.log.last_digest().to_owned(),
                    state: doc,
                },
            )?;
        }
        Ok(())
    }

    fn tick(&self) -> u64 {
        self.state.tick()
    }

    fn session(&self, token: &str) -> Result<&Session> {
        self.state
            .provider
            .live_session(token, self.tick(), self.config.provider.session_ttl_ticks)
    }

    /// Allows iff the session is live and its active role holds `capability`.
    pub fn authorize(&self, token: &str, capability: Capability) -> Result<Principal> {
        self.state
            .provider
            .authorize(token, capability, self.tick(), &self.config.provider)
    }

    /// The principal behind a live session, without a capability check.
    pub fn check_session(&self, token: &str) -> Result<Principal> {
        let session = self.session(token)?;
        Ok(Principal {
            user_id: session.user_id.clone(),
            role: session.active_role,
        })
    }

    fn role_allows(&self, role: Role, capability: Capability) -> bool {
        self.config.provider.capabilities.allows(role, capability)
    }

    fn draw_salt(&mut self) -> String {
        hex::encode(self.rng.gen::<[u8; 16]>())
    }

    fn draw_token(&mut self) -> SessionToken {
        loop {
            let token = SessionToken::from_bits(self.rng.gen());
            if !self.state.provider.sessions.contains_key(&token) {
                return token;
            }
        }
    }

    // ---- provider level ----

    /// Creates the first administrator. Only valid on a system with no
    /// accounts.
    pub fn bootstrap_admin(&mut self, user_id: &str, secret: &str) -> Result<()> {
        let user_id = validate_user_id(user_id)?;
        let salt = self.draw_salt();
        self.commit(Op::CreateAccount {
            actor: None,
            user_id,
            roles: [Role::Admin].into(),
            secret_hash: hash_secret(&salt, secret),
            salt,
            staff_profile: None,
        })?;
        Ok(())
    }

    pub fn create_account(&mut self, token: &str, account: NewAccount) -> Result<()> {
        let actor = self.authorize(token, Capability::AdminAccounts)?;
        let user_id = validate_user_id(&account.user_id)?;
        if account.roles.is_empty() {
            return Err(Error::validation("an account needs at least one role"));
        }
        if account.secret.is_empty() {
            return Err(Error::validation("secret must not be empty"));
        }
        let staff_profile = account.roles.contains(&Role::Staff).then(|| StaffProfile {
            name: account.name.clone().unwrap_or_else(|| user_id.to_string()),
            department: account.department.clone().unwrap_or_default(),
        });
        let salt = self.draw_salt();
        self.commit(Op::CreateAccount {
            actor: Some(actor.user_id),
            user_id,
            roles: account.roles.into_iter().collect(),
            secret_hash: hash_secret(&salt, &account.secret),
            salt,
            staff_profile,
        })?;
        Ok(())
    }

    pub fn login(&mut self, user_id: &str, secret: &str, role: Option<Role>) -> Result<LoginGrant> {
        let role = self.state.provider.check_login(user_id, secret, role)?;
        let user_id = validate_user_id(user_id)?;
        let token = self.draw_token();
        self.commit(Op::Login {
            user_id: user_id.clone(),
            role,
            token: token.clone(),
        })?;
        let roles = self.state.provider.accounts[&user_id].roles.iter().copied().collect();
        Ok(LoginGrant { token, role, roles })
    }

    pub fn logout(&mut self, token: &str) -> Result<()> {
        self.commit(Op::Logout {
            token: SessionToken(token.to_owned()),
        })?;
        Ok(())
    }

    pub fn switch_role(&mut self, token: &str, role: Role) -> Result<()> {
        let session = self.session(token)?;
        self.state.provider.check_switch_role(session, role)?;
        self.commit(Op::SwitchRole {
            token: SessionToken(token.to_owned()),
            role,
        })?;
        Ok(())
    }

    pub fn request_service(&mut self, token: &str, service: &str) -> Result<()> {
        let principal = self.authorize(token, Capability::ServiceRequest)?;
        self.commit(Op::RequestService {
            user_id: principal.user_id,
            service: ServiceId(service.to_owned()),
        })?;
        Ok(())
    }

    pub fn list_entitled_services(&self, token: &str) -> Result<Vec<CatalogEntry>> {
        let principal = self.authorize(token, Capability::ServiceRequest)?;
        Ok(self
            .state
            .provider
            .entitled_services(&principal.user_id, &self.config.provider))
    }

    pub fn usage_report(&self, token: &str, from_tick: u64, to_tick: u64) -> Result<UsageReport> {
        self.authorize(token, Capability::AdminBilling)?;
        self.state.datacenter.usage_report(from_tick, to_tick)
    }

    pub fn compute_bill(&self, token: &str, from_tick: u64, to_tick: u64) -> Result<BillingStatement> {
        let report = self.usage_report(token, from_tick, to_tick)?;
        Ok(BillingStatement::from_usage(
            &report,
            self.config.datacenter.rate_micro_per_mib_tick,
        ))
    }

    pub fn health(&self) -> Health {
        self.state.datacenter.health()
    }

    /// State digest, for operators comparing runs.
    pub fn admin_digest(&self, token: &str) -> Result<(u64, String)> {
        self.authorize(token, Capability::AdminNodeOps)?;
        Ok((self.last_seq(), self.digest()))
    }

    // ---- data center administration ----

    pub fn add_node(&mut self, token: &str, capacity_bytes: i64) -> Result<NodeId> {
        let actor = self.authorize(token, Capability::AdminNodeOps)?;
        let outcome = self.commit(Op::AddNode {
            actor: actor.user_id,
            capacity_bytes,
        })?;
        Ok(outcome.node.expect("add_node assigns a node id"))
    }

    pub fn set_node_status(&mut self, token: &str, node: &str, status: NodeStatus) -> Result<()> {
        let actor = self.authorize(token, Capability::AdminNodeOps)?;
        let node: NodeId = node
            .parse()
            .map_err(|_| Error::not_found(format!("unknown node {node}")))?;
        self.commit(Op::SetNodeStatus {
            actor: actor.user_id,
            node,
            status,
        })?;
        Ok(())
    }

    pub fn rereplicate(&mut self, token: &str) -> Result<RepairReport> {
        let actor = self.authorize(token, Capability::AdminNodeOps)?;
        let outcome = self.commit(Op::Rereplicate {
            actor: actor.user_id,
        })?;
        Ok(outcome.repair.unwrap_or_default())
    }

    pub fn advance_clock(&mut self, token: &str, ticks: i64) -> Result<u64> {
        let actor = self.authorize(token, Capability::AdminClock)?;
        self.commit(Op::AdvanceClock {
            actor: actor.user_id,
            ticks,
        })?;
        Ok(self.tick())
    }

    // ---- educational user level ----

    pub fn insert_student(&mut self, token: &str, record: StudentRecord) -> Result<StudentRecord> {
        let actor = self.authorize(token, Capability::StudentInsert)?;
        let user_id = record.user_id.clone();
        self.commit(Op::InsertStudent {
            actor: actor.user_id,
            record,
        })?;
        self.state.edu.read_student(&self.state.datacenter, &user_id)
    }

    /// Staff (any id) or the student themself.
    fn student_access(&self, token: &str, id: &str, any: Capability, own: Capability) -> Result<(Principal, bool)> {
        let session = self.session(token)?;
        let principal = Principal {
            user_id: session.user_id.clone(),
            role: session.active_role,
        };
        if self.role_allows(principal.role, any) {
            return Ok((principal, false));
        }
        if self.role_allows(principal.role, own) {
            if principal.user_id.as_str() == id {
                return Ok((principal, true));
            }
            return Err(Error::forbidden("students may only access their own record"));
        }
        Err(Error::forbidden(format!("role {} lacks {any}", principal.role)))
    }

    pub fn retrieve_student(&self, token: &str, id: &str) -> Result<StudentRecord> {
        self.student_access(
            token,
            id,
            Capability::StudentRetrieveAny,
            Capability::StudentReadSelf,
        )?;
        let id: UserId = id.parse().map_err(|_| Error::no_user_found())?;
        self.state.edu.read_student(&self.state.datacenter, &id)
    }

    /// The caller's own record.
    pub fn retrieve_self(&self, token: &str) -> Result<StudentRecord> {
        let principal = self.authorize(token, Capability::StudentReadSelf)?;
        self.state
            .edu
            .read_student(&self.state.datacenter, &principal.user_id)
    }

    pub fn update_student(&mut self, token: &str, id: &str, patch: StudentPatch) -> Result<u64> {
        let (actor, self_only) = self.student_access(
            token,
            id,
            Capability::StudentUpdateAny,
            Capability::StudentUpdateSelf,
        )?;
        if self_only && !patch.touches_only_contact() {
            return Err(Error::validation("students may only change their contact field"));
        }
        let user_id: UserId = id.parse().map_err(|_| Error::no_user_found())?;
        let outcome = self.commit(Op::UpdateStudent {
            actor: actor.user_id,
            user_id,
            patch,
        })?;
        Ok(outcome.version.expect("update assigns a version"))
    }

    pub fn submit_assignment(&mut self, token: &str, course: &str, payload: Bytes) -> Result<Assignment> {
        let actor = self.authorize(token, Capability::AssignmentSubmit)?;
        let course = validate_course(course)?;
        let outcome = self.commit(Op::SubmitAssignment {
            actor: actor.user_id,
            course,
            payload,
        })?;
        let id = outcome.assignment.expect("submission assigns an id");
        Ok(self.state.edu.assignment(&id).expect("just submitted").clone())
    }

    pub fn list_submissions(&self, token: &str, course: &str) -> Result<Vec<Assignment>> {
        self.authorize(token, Capability::SubmissionList)?;
        let course = validate_course(course)?;
        Ok(self.state.edu.list_submissions(&course))
    }

    pub fn upload_material(&mut self, token: &str, course: &str, payload: Bytes) -> Result<CourseMaterial> {
        let actor = self.authorize(token, Capability::MaterialUpload)?;
        let course = validate_course(course)?;
        let size = payload.len() as u64;
        let outcome = self.commit(Op::UploadMaterial {
            actor: actor.user_id.clone(),
            course: course.clone(),
            payload,
        })?;
        Ok(CourseMaterial {
            id: outcome.material.expect("upload assigns an id"),
            course,
            uploader: actor.user_id,
            object_ref: outcome.object.expect("upload stores an object"),
            size_bytes: size,
        })
    }

    pub fn download_material(&self, token: &str, course: &str, id: &str) -> Result<Bytes> {
        self.authorize(token, Capability::MaterialDownload)?;
        self.state
            .edu
            .download_material(&self.state.datacenter, course, &MaterialId(id.to_owned()))
    }

    pub fn record_grade(&mut self, token: &str, assignment: &str, grade: &str) -> Result<()> {
        let actor = self.authorize(token, Capability::GradeRecord)?;
        self.commit(Op::RecordGrade {
            actor: actor.user_id,
            assignment: AssignmentId(assignment.to_owned()),
            grade: grade.to_owned(),
        })?;
        Ok(())
    }

    pub fn audit(&self) -> AuditReport {
        self.state.edu.audit(&self.state.datacenter)
    }
}
