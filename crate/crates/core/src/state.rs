//! The whole system state and the operations that mutate it.
//!
//! An [`Op`] carries everything needed to apply a mutation deterministically,
//! including any random values (tokens, salts) drawn before it was applied.
//! Applying an op yields an [`Outcome`] with the ids it assigned and the
//! storage effects it caused; both are logged, and replay re-derives and
//! compares them.

use std::collections::BTreeSet;

use bytes::Bytes;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical::{base64_bytes, state_digest};
use crate::config::CloudConfig;
use crate::datacenter::{
    DataCenter, DataCenterState, NodeId, NodeStatus, ObjectId, RepairReport, StorageEffect,
};
use crate::domain::{
    AssignmentId, Error, MaterialId, Result, Role, StaffRecord, StudentPatch, StudentRecord, UserId,
};
use crate::edu::EduState;
use crate::provider::{Account, ProviderState, ServiceId, SessionToken};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "args", rename_all = "snake_case")]
pub enum Op {
    CreateAccount {
        /// `None` only for the bootstrap administrator.
        actor: Option<UserId>,
        user_id: UserId,
        roles: BTreeSet<Role>,
        salt: String,
        secret_hash: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        staff_profile: Option<StaffProfile>,
    },
    Login {
        user_id: UserId,
        role: Role,
        token: SessionToken,
    },
    Logout {
        token: SessionToken,
    },
    SwitchRole {
        token: SessionToken,
        role: Role,
    },
    RequestService {
        user_id: UserId,
        service: ServiceId,
    },
    InsertStudent {
        actor: UserId,
        record: StudentRecord,
    },
    UpdateStudent {
        actor: UserId,
        user_id: UserId,
        patch: StudentPatch,
    },
    SubmitAssignment {
        actor: UserId,
        course: String,
        #[serde(with = "base64_bytes")]
        payload: Bytes,
    },
    UploadMaterial {
        actor: UserId,
        course: String,
        #[serde(with = "base64_bytes")]
        payload: Bytes,
    },
    RecordGrade {
        actor: UserId,
        assignment: AssignmentId,
        grade: String,
    },
    AddNode {
        actor: UserId,
        capacity_bytes: i64,
    },
    SetNodeStatus {
        actor: UserId,
        node: NodeId,
        status: NodeStatus,
    },
    Rereplicate {
        actor: UserId,
    },
    AdvanceClock {
        actor: UserId,
        ticks: i64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaffProfile {
    pub name: String,
    pub department: String,
}

impl Op {
    /// Log name of the operation.
    pub fn name(&self) -> String {
        match serde_json::to_value(self).expect("ops serialize") {
            Value::Object(map) => map["op"].as_str().expect("tagged").to_owned(),
            _ => unreachable!("ops serialize as tagged objects"),
        }
    }

    /// Splits into the log's `(op, args)` pair.
    pub fn to_log_parts(&self) -> (String, Value) {
        match serde_json::to_value(self).expect("ops serialize") {
            Value::Object(mut map) => (
                map["op"].as_str().expect("tagged").to_owned(),
                map.remove("args").unwrap_or(Value::Null),
            ),
            _ => unreachable!("ops serialize as tagged objects"),
        }
    }

    pub fn from_log_parts(op: &str, args: Value) -> serde_json::Result<Op> {
        serde_json::from_value(serde_json::json!({"op": op, "args": args}))
    }
}

/// Ids and effects an op produced.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outcome {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<AssignmentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<MaterialId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<RepairReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub effects: Vec<StorageEffect>,
}

/// Serializable form of [`CloudState`]; its canonical bytes define the
/// state digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloudStateDoc {
    pub datacenter: DataCenterState,
    pub provider: ProviderState,
    pub edu: EduState,
}

#[derive(Debug, Clone)]
pub struct CloudState {
    pub datacenter: DataCenter,
    pub provider: ProviderState,
    pub edu: EduState,
}

impl CloudState {
    pub fn new(config: &CloudConfig) -> Self {
        CloudState {
            datacenter: DataCenter::new(config.datacenter.clone()),
            provider: ProviderState::default(),
            edu: EduState::new(),
        }
    }

    pub fn to_doc(&self) -> CloudStateDoc {
        CloudStateDoc {
            datacenter: self.datacenter.to_state(),
            provider: self.provider.clone(),
            edu: self.edu.clone(),
        }
    }

    pub fn from_doc(config: &CloudConfig, doc: CloudStateDoc) -> Result<Self> {
        Ok(CloudState {
            datacenter: DataCenter::from_state(config.datacenter.clone(), doc.datacenter)?,
            provider: doc.provider,
            edu: doc.edu,
        })
    }

    pub fn digest(&self) -> String {
        state_digest(&self.to_doc())
    }

    pub fn tick(&self) -> u64 {
        self.datacenter.tick()
    }

    /// Applies `op`. On error the state is unchanged.
    pub fn apply(&mut self, config: &CloudConfig, op: &Op) -> Result<Outcome> {
        let result = self.apply_inner(config, op);
        let effects = self.datacenter.take_effects();
        let mut outcome = result?;
        outcome.effects = effects;
        Ok(outcome)
    }

    fn apply_inner(&mut self, config: &CloudConfig, op: &Op) -> Result<Outcome> {
        let r = config.datacenter.replication;
        let max = config.max_payload_bytes;
        let mut out = Outcome::default();
        match op {
            Op::CreateAccount {
                actor,
                user_id,
                roles,
                salt,
                secret_hash,
                staff_profile,
            } => {
                if actor.is_none() && !self.provider.accounts.is_empty() {
                    return Err(Error::forbidden("bootstrap is only possible on an empty system"));
                }
                if roles.is_empty() {
                    return Err(Error::validation("an account needs at least one role"));
                }
                if self.provider.account(user_id).is_some() {
                    return Err(Error::duplicate(format!("account {user_id} already exists")));
                }
                let is_staff = roles.contains(&Role::Staff);
                if is_staff {
                    self.edu.check_staff_id_free(user_id)?;
                }
                self.provider.insert_account(Account {
                    user_id: user_id.clone(),
                    roles: roles.clone(),
                    salt: salt.clone(),
                    secret_hash: secret_hash.clone(),
                    requested_services: BTreeSet::new(),
                })?;
                if is_staff {
                    let profile = staff_profile.clone().unwrap_or(StaffProfile {
                        name: user_id.to_string(),
                        department: String::new(),
                    });
                    self.edu.add_staff(StaffRecord {
                        user_id: user_id.clone(),
                        name: profile.name,
                        department: profile.department,
                        version: 1,
                    })?;
                }
            }
            Op::Login {
                user_id,
                role,
                token,
            } => {
                let account = self
                    .provider
                    .account(user_id)
                    .ok_or_else(Error::unauthorized)?;
                if !account.roles.contains(role) {
                    return Err(Error::forbidden(format!("account does not hold role {role}")));
                }
                let tick = self.tick();
                self.provider
                    .open_session(token.clone(), user_id.clone(), *role, tick)?;
            }
            Op::Logout { token } => self.provider.expire(token)?,
            Op::SwitchRole { token, role } => {
                let session = self
                    .provider
                    .sessions
                    .get(token)
                    .ok_or_else(Error::unauthorized)?;
                self.provider.check_switch_role(session, *role)?;
                self.provider.set_role(token, *role)?;
            }
            Op::RequestService { user_id, service } => {
                self.provider
                    .request_service(user_id, service, &config.provider)?;
            }
            Op::InsertStudent { record, .. } => {
                out.object = Some(self.edu.insert_student(&mut self.datacenter, r, record)?);
                out.version = Some(1);
            }
            Op::UpdateStudent { user_id, patch, .. } => {
                let (version, object) =
                    self.edu
                        .update_student(&mut self.datacenter, r, user_id, patch)?;
                out.version = Some(version);
                out.object = Some(object);
            }
            Op::SubmitAssignment {
                actor,
                course,
                payload,
            } => {
                let a = self.edu.submit_assignment(
                    &mut self.datacenter,
                    r,
                    actor,
                    course,
                    payload.clone(),
                    max,
                )?;
                out.object = Some(a.object_ref);
                out.assignment = Some(a.id);
            }
            Op::UploadMaterial {
                actor,
                course,
                payload,
            } => {
                let m = self.edu.upload_material(
                    &mut self.datacenter,
                    r,
                    actor,
                    course,
                    payload.clone(),
                    max,
                )?;
                out.object = Some(m.object_ref);
                out.material = Some(m.id);
            }
            Op::RecordGrade {
                assignment, grade, ..
            } => self.edu.record_grade(assignment, grade)?,
            Op::AddNode { capacity_bytes, .. } => {
                out.node = Some(self.datacenter.add_node(*capacity_bytes)?);
            }
            Op::SetNodeStatus { node, status, .. } => {
                self.datacenter.set_node_status(*node, *status)?;
            }
            Op::Rereplicate { .. } => {
                out.repair = Some(self.datacenter.rereplicate());
            }
            Op::AdvanceClock { ticks, .. } => self.datacenter.advance_clock(*ticks)?,
        }
        Ok(out)
    }
}
