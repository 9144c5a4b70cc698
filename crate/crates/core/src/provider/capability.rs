use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{Error, Result, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Capability {
    StudentReadSelf,
    StudentUpdateSelf,
    AssignmentSubmit,
    MaterialDownload,
    StudentInsert,
    StudentRetrieveAny,
    StudentUpdateAny,
    MaterialUpload,
    SubmissionList,
    GradeRecord,
    ServiceRequest,
    AdminNodeOps,
    AdminBilling,
    AdminAccounts,
    AdminClock,
}

impl Capability {
    pub const ALL: [Capability; 15] = [
        Capability::StudentReadSelf,
        Capability::StudentUpdateSelf,
        Capability::AssignmentSubmit,
        Capability::MaterialDownload,
        Capability::StudentInsert,
        Capability::StudentRetrieveAny,
        Capability::StudentUpdateAny,
        Capability::MaterialUpload,
        Capability::SubmissionList,
        Capability::GradeRecord,
        Capability::ServiceRequest,
        Capability::AdminNodeOps,
        Capability::AdminBilling,
        Capability::AdminAccounts,
        Capability::AdminClock,
    ];

    /// Capabilities that act on other users' education data.
    pub const STAFF_ONLY: [Capability; 6] = [
        Capability::StudentInsert,
        Capability::StudentRetrieveAny,
        Capability::StudentUpdateAny,
        Capability::MaterialUpload,
        Capability::SubmissionList,
        Capability::GradeRecord,
    ];

    pub fn is_edu_data(self) -> bool {
        !matches!(
            self,
            Capability::ServiceRequest
                | Capability::AdminNodeOps
                | Capability::AdminBilling
                | Capability::AdminAccounts
                | Capability::AdminClock
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Capability::StudentReadSelf => "STUDENT_READ_SELF",
            Capability::StudentUpdateSelf => "STUDENT_UPDATE_SELF",
            Capability::AssignmentSubmit => "ASSIGNMENT_SUBMIT",
            Capability::MaterialDownload => "MATERIAL_DOWNLOAD",
            Capability::StudentInsert => "STUDENT_INSERT",
            Capability::StudentRetrieveAny => "STUDENT_RETRIEVE_ANY",
            Capability::StudentUpdateAny => "STUDENT_UPDATE_ANY",
            Capability::MaterialUpload => "MATERIAL_UPLOAD",
            Capability::SubmissionList => "SUBMISSION_LIST",
            Capability::GradeRecord => "GRADE_RECORD",
            Capability::ServiceRequest => "SERVICE_REQUEST",
            Capability::AdminNodeOps => "ADMIN_NODE_OPS",
            Capability::AdminBilling => "ADMIN_BILLING",
            Capability::AdminAccounts => "ADMIN_ACCOUNTS",
            Capability::AdminClock => "ADMIN_CLOCK",
        }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Capability {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Capability::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown capability {s:?}")))
    }
}

/// Role to capability mapping, fixed once loaded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<Role, BTreeSet<Capability>>", into = "BTreeMap<Role, BTreeSet<Capability>>")]
pub struct CapabilityTable(BTreeMap<Role, BTreeSet<Capability>>);

impl CapabilityTable {
    pub fn new(table: BTreeMap<Role, BTreeSet<Capability>>) -> Result<Self> {
        for role in Role::ALL {
            if !table.contains_key(&role) {
                return Err(Error::validation(format!("capability table lacks role {role}")));
            }
        }
        let student = &table[&Role::Student];
        if let Some(cap) = Capability::STAFF_ONLY.iter().find(|c| student.contains(c)) {
            return Err(Error::validation(format!("Student role may not hold {cap}")));
        }
        if let Some(cap) = table[&Role::Admin].iter().find(|c| c.is_edu_data()) {
            return Err(Error::validation(format!("Admin role may not hold {cap}")));
        }
        Ok(CapabilityTable(table))
    }

    pub fn allows(&self, role: Role, capability: Capability) -> bool {
        self.0.get(&role).is_some_and(|caps| caps.contains(&capability))
    }

    pub fn capabilities(&self, role: Role) -> &BTreeSet<Capability> {
        &self.0[&role]
    }
}

impl Default for CapabilityTable {
    fn default() -> Self {
        use Capability::*;
        let table = BTreeMap::from([
            (
                Role::Student,
                BTreeSet::from([
                    StudentReadSelf,
                    StudentUpdateSelf,
                    AssignmentSubmit,
                    MaterialDownload,
                    ServiceRequest,
                ]),
            ),
            (
                Role::Staff,
                BTreeSet::from([
                    StudentInsert,
                    StudentRetrieveAny,
                    StudentUpdateAny,
                    MaterialUpload,
                    MaterialDownload,
                    SubmissionList,
                    GradeRecord,
                    ServiceRequest,
                ]),
            ),
            (
                Role::Admin,
                BTreeSet::from([AdminNodeOps, AdminBilling, AdminAccounts, AdminClock]),
            ),
        ]);
        CapabilityTable::new(table).expect("default table satisfies its own invariants")
    }
}

impl TryFrom<BTreeMap<Role, BTreeSet<Capability>>> for CapabilityTable {
    type Error = Error;

    fn try_from(table: BTreeMap<Role, BTreeSet<Capability>>) -> Result<Self> {
        CapabilityTable::new(table)
    }
}

impl From<CapabilityTable> for BTreeMap<Role, BTreeSet<Capability>> {
    fn from(table: CapabilityTable) -> Self {
        table.0
    }
}
