//! Multi-session host for the scene synthesis loop: REST + WebSocket API and CLI helpers.

pub mod api;
pub mod cli;
pub mod manager;

pub use manager::{ConfigOverrides, EventRecord, ServiceError, SessionDescriptor, SessionManager};
