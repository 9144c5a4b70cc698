//! Campus cloud: student records, coursework and course materials kept as
//! replicated objects on a simulated, metered data center, with an
//! append-only event log that reproduces the whole system state.

pub mod canonical;
pub mod cloud;
pub mod config;
pub mod datacenter;
pub mod domain;
pub mod edu;
pub mod persistence;
pub mod provider;
pub mod state;
pub mod workload;

pub use cloud::{replay, verify_replay, Cloud, LoginGrant, NewAccount, ReplayReport};
pub use config::CloudConfig;
pub use domain::{Error, ErrorCode, Result, Role, StudentPatch, StudentRecord, UserId};
