//! Wire API of the campus cloud: JSON over HTTP under `/api/v1`, bearer
//! tokens in the `Authorization` header, binary bodies for uploads.

pub mod api;
pub mod client;
pub mod server;

pub use api::{route, Access, ApiError, Endpoint, Method, Operation, Request, Response, ENDPOINTS};
pub use client::{ApiClient, ClientError, Http, InProcess, Transport};
pub use server::{serve, ServerHandle};
