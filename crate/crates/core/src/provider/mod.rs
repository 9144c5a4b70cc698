//! Service-provider level: accounts, sessions and role switching, capability
//! checks, the software catalog with per-account entitlements, and billing.

mod billing;
mod capability;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{Error, ErrorCode, Result, Role, UserId};

pub use billing::{BillingStatement, NodeCharge};
pub use capability::{Capability, CapabilityTable};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ServiceId(pub String);

impl fmt::Display for ServiceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: ServiceId,
    pub description: String,
}

/// Bearer credential: 128 random bits, lowercase hex.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionToken(pub String);

impl SessionToken {
    pub fn from_bits(bits: u128) -> Self {
        SessionToken(format!("{bits:032x}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SessionToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub user_id: UserId,
    pub roles: BTreeSet<Role>,
    pub salt: String,
    pub secret_hash: String,
    pub requested_services: BTreeSet<ServiceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub token: SessionToken,
    pub user_id: UserId,
    pub active_role: Role,
    pub created_at_tick: u64,
    pub expired: bool,
}

/// Who an authorized call acts for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Principal {
    pub user_id: UserId,
    pub role: Role,
}

/// Salted SHA-256 of a secret, hex-encoded.
pub fn hash_secret(salt_hex: &str, secret: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(hex::decode(salt_hex).unwrap_or_default());
    hasher.update(secret.as_bytes());
    hex::encode(hasher.finalize())
}

/// Catalog, capability table and session policy. Loaded once at startup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub capabilities: CapabilityTable,
    pub catalog: Vec<CatalogEntry>,
    /// Sessions older than this many ticks stop authorizing. `None` keeps
    /// them alive until logout.
    #[serde(default)]
    pub session_ttl_ticks: Option<u64>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        let entry = |id: &str, description: &str| CatalogEntry {
            id: ServiceId(id.into()),
            description: description.into(),
        };
        ProviderConfig {
            capabilities: CapabilityTable::default(),
            catalog: vec![
                entry("matlab-saas", "MATLAB numerical computing, hosted"),
                entry("office-suite", "Document, spreadsheet and slide editors"),
                entry("virtual-lab-vm", "Per-user Linux lab virtual machine"),
                entry("lecture-capture", "Recorded lecture streaming"),
            ],
            session_ttl_ticks: None,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for entry in &self.catalog {
            if entry.id.0.is_empty() || !seen.insert(&entry.id) {
                return Err(Error::validation(format!(
                    "catalog id {:?} is empty or repeated",
                    entry.id.0
                )));
            }
        }
        Ok(())
    }

    pub fn catalog_entry(&self, id: &ServiceId) -> Option<&CatalogEntry> {
        self.catalog.iter().find(|e| &e.id == id)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderState {
    pub accounts: BTreeMap<UserId, Account>,
    pub sessions: BTreeMap<SessionToken, Session>,
}

impl ProviderState {
    pub fn account(&self, user: &UserId) -> Option<&Account> {
        self.accounts.get(user)
    }

    pub fn insert_account(&mut self, account: Account) -> Result<()> {
        if account.roles.is_empty() {
            return Err(Error::validation("an account needs at least one role"));
        }
        if self.accounts.contains_key(&account.user_id) {
            return Err(Error::duplicate(format!(
                "account {} already exists",
                account.user_id
            )));
        }
        self.accounts.insert(account.user_id.clone(), account);
        Ok(())
    }

    /// Checks credentials and picks the role a new session starts in.
    /// Unknown users and wrong secrets fail identically.
    pub fn check_login(&self, user: &str, secret: &str, role: Option<Role>) -> Result<Role> {
        let account = user
            .parse::<UserId>()
            .ok()
            .and_then(|id| self.accounts.get(&id));
        let Some(account) = account else {
            // Spend the same hashing work as a real comparison.
            let _ = hash_secret("00000000000000000000000000000000", secret);
            return Err(Error::unauthorized());
        };
        if hash_secret(&account.salt, secret) != account.secret_hash {
            return Err(Error::unauthorized());
        }
        match role {
            Some(role) if account.roles.contains(&role) => Ok(role),
            Some(role) => Err(Error::forbidden(format!("account does not hold role {role}"))),
            None if account.roles.len() == 1 => {
                Ok(*account.roles.first().expect("roles are non-empty"))
            }
            None => Err(Error::validation(
                "account holds several roles; name one to log in with",
            )),
        }
    }

    pub fn open_session(&mut self, token: SessionToken, user: UserId, role: Role, tick: u64) -> Result<()> {
        if self.sessions.contains_key(&token) {
            return Err(Error::duplicate("session token already issued"));
        }
        self.sessions.insert(
            token.clone(),
            Session {
                token,
                user_id: user,
                active_role: role,
                created_at_tick: tick,
                expired: false,
            },
        );
        Ok(())
    }

    /// The session behind `token` if it still authorizes anything.
    pub fn live_session(&self, token: &str, tick: u64, ttl: Option<u64>) -> Result<&Session> {
        let session = self
            .sessions
            .get(&SessionToken(token.to_owned()))
            .ok_or_else(Error::unauthorized)?;
        let timed_out = ttl.is_some_and(|ttl| tick >= session.created_at_tick.saturating_add(ttl));
        if session.expired || timed_out {
            return Err(Error::unauthorized());
        }
        Ok(session)
    }

    pub fn authorize(
        &self,
        token: &str,
        capability: Capability,
        tick: u64,
        config: &ProviderConfig,
    ) -> Result<Principal> {
        let session = self.live_session(token, tick, config.session_ttl_ticks)?;
        if !config.capabilities.allows(session.active_role, capability) {
            return Err(Error::forbidden(format!(
                "role {} lacks {capability}",
                session.active_role
            )));
        }
        Ok(Principal {
            user_id: session.user_id.clone(),
            role: session.active_role,
        })
    }

    pub fn check_switch_role(&self, session: &Session, role: Role) -> Result<()> {
        let account = self
            .accounts
            .get(&session.user_id)
            .ok_or_else(Error::unauthorized)?;
        if account.roles.contains(&role) {
            Ok(())
        } else {
            Err(Error::forbidden(format!("account does not hold role {role}")))
        }
    }

    pub fn set_role(&mut self, token: &SessionToken, role: Role) -> Result<()> {
        let session = self.sessions.get_mut(token).ok_or_else(Error::unauthorized)?;
        session.active_role = role;
        Ok(())
    }

    pub fn expire(&mut self, token: &SessionToken) -> Result<()> {
        match self.sessions.get_mut(token) {
            Some(session) if !session.expired => {
                session.expired = true;
                Ok(())
            }
            _ => Err(Error::unauthorized()),
        }
    }

    pub fn request_service(&mut self, user: &UserId, service: &ServiceId, config: &ProviderConfig) -> Result<()> {
        if config.catalog_entry(service).is_none() {
            return Err(Error::not_found(format!("unknown service {service}")));
        }
        let account = self
            .accounts
            .get_mut(user)
            .ok_or_else(|| Error::new(ErrorCode::Unauthorized, "account no longer exists"))?;
        account.requested_services.insert(service.clone());
        Ok(())
    }

    /// Catalog entries this user asked for, in catalog order.
    pub fn entitled_services(&self, user: &UserId, config: &ProviderConfig) -> Vec<CatalogEntry> {
        let Some(account) = self.accounts.get(user) else {
            return Vec::new();
        };
        config
            .catalog
            .iter()
            .filter(|e| account.requested_services.contains(&e.id))
            .cloned()
            .collect()
    }
}
