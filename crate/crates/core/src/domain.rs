//! Shared vocabulary: identifiers, roles, university records and the uniform
//! error surface every operation reports through.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datacenter::ObjectId;

/// Message carried by every lookup miss on the student store.
pub const NO_USER_FOUND: &str = "No user found";

const USER_ID_MIN: usize = 3;
const USER_ID_MAX: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    DuplicateId,
    NotFound,
    Forbidden,
    Unauthorized,
    Validation,
    CapacityExceeded,
    InsufficientNodes,
    ReplayError,
    Degraded,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 9] = [
        ErrorCode::DuplicateId,
        ErrorCode::NotFound,
        ErrorCode::Forbidden,
        ErrorCode::Unauthorized,
        ErrorCode::Validation,
        ErrorCode::CapacityExceeded,
        ErrorCode::InsufficientNodes,
        ErrorCode::ReplayError,
        ErrorCode::Degraded,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::DuplicateId => "DUPLICATE_ID",
            ErrorCode::NotFound => "NOT_FOUND",
            ErrorCode::Forbidden => "FORBIDDEN",
            ErrorCode::Unauthorized => "UNAUTHORIZED",
            ErrorCode::Validation => "VALIDATION",
            ErrorCode::CapacityExceeded => "CAPACITY_EXCEEDED",
            ErrorCode::InsufficientNodes => "INSUFFICIENT_NODES",
            ErrorCode::ReplayError => "REPLAY_ERROR",
            ErrorCode::Degraded => "DEGRADED",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ErrorCode::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown error code {s:?}")))
    }
}

/// The single error type of the system: exactly one code plus a message.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{code}: {message}")]
pub struct Error {
    pub code: ErrorCode,
    pub message: String,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Error {
            code,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Validation, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::NotFound, message)
    }

    pub fn no_user_found() -> Self {
        Self::new(ErrorCode::NotFound, NO_USER_FOUND)
    }

    pub fn duplicate(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::DuplicateId, message)
    }

    pub fn forbidden(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Forbidden, message)
    }

    pub fn unauthorized() -> Self {
        Self::new(ErrorCode::Unauthorized, "invalid credentials or session")
    }

    pub fn replay(seq: u64, message: impl fmt::Display) -> Self {
        Self::new(ErrorCode::ReplayError, format!("seq {seq}: {message}"))
    }
}

/// Account and record identity. Case-sensitive, `[A-Za-z0-9_-]{3,32}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct UserId(String);

impl UserId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Accepts `raw` iff it matches `^[A-Za-z0-9_-]{3,32}$`.
pub fn validate_user_id(raw: &str) -> Result<UserId> {
    let len = raw.chars().count();
    if len < USER_ID_MIN {
        return Err(Error::validation(format!(
            "user id {raw:?} is shorter than {USER_ID_MIN} characters"
        )));
    }
    if len > USER_ID_MAX {
        return Err(Error::validation(format!(
            "user id {raw:?} is longer than {USER_ID_MAX} characters"
        )));
    }
    if let Some(bad) = raw
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || *c == '_' || *c == '-'))
    {
        return Err(Error::validation(format!(
            "user id {raw:?} contains illegal character {bad:?}"
        )));
    }
    Ok(UserId(raw.to_owned()))
}

impl FromStr for UserId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        validate_user_id(s)
    }
}

impl TryFrom<String> for UserId {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        validate_user_id(&value)
    }
}

impl From<UserId> for String {
    fn from(id: UserId) -> String {
        id.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Student,
    Staff,
    Admin,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Student, Role::Staff, Role::Admin];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Student => "Student",
            Role::Staff => "Staff",
            Role::Admin => "Admin",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::validation(format!("unknown role {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentRecord {
    pub user_id: UserId,
    pub name: String,
    pub program: String,
    pub year: u32,
    pub contact: String,
    pub version: u64,
}

impl StudentRecord {
    pub fn validate(&self) -> Result<()> {
        let name_len = self.name.chars().count();
        if name_len == 0 || name_len > 128 {
            return Err(Error::validation("name must be 1-128 characters"));
        }
        if self.year < 1 {
            return Err(Error::validation("year must be at least 1"));
        }
        if self.version < 1 {
            return Err(Error::validation("version must be at least 1"));
        }
        Ok(())
    }
}

/// Mutable subset of a [`StudentRecord`]. Absent fields are left untouched.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentPatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact: Option<String>,
}

impl StudentPatch {
    pub fn is_empty(&self) -> bool {
        self.name.is_none() && self.program.is_none() && self.year.is_none() && self.contact.is_none()
    }

    pub fn touches_only_contact(&self) -> bool {
        self.name.is_none() && self.program.is_none() && self.year.is_none()
    }

    pub fn apply_to(&self, record: &StudentRecord) -> StudentRecord {
        StudentRecord {
            user_id: record.user_id.clone(),
            name: self.name.clone().unwrap_or_else(|| record.name.clone()),
            program: self.program.clone().unwrap_or_else(|| record.program.clone()),
            year: self.year.unwrap_or(record.year),
            contact: self.contact.clone().unwrap_or_else(|| record.contact.clone()),
            version: record.version + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaffRecord {
    pub user_id: UserId,
    pub name: String,
    pub department: String,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssignmentId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaterialId(pub String);

impl fmt::Display for AssignmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for MaterialId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub id: AssignmentId,
    pub course: String,
    pub owner: UserId,
    pub object_ref: ObjectId,
    pub size_bytes: u64,
    pub submitted_at_tick: u64,
    pub grade: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourseMaterial {
    pub id: MaterialId,
    pub course: String,
    pub uploader: UserId,
    pub object_ref: ObjectId,
    pub size_bytes: u64,
}

/// Course names appear in URL paths, so they follow the same character rules
/// as user ids but allow up to 64 characters.
pub fn validate_course(raw: &str) -> Result<String> {
    let ok = !raw.is_empty()
        && raw.len() <= 64
        && raw
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(raw.to_owned())
    } else {
        Err(Error::validation(format!("invalid course name {raw:?}")))
    }
}
