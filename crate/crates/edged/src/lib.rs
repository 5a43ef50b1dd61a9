//! Edge service for the network digital twin.
//!
//! Clients send length-prefixed JSON requests over TCP (or the same JSON
//! bodies over a WebSocket); the service dispatches them to fault
//! localization, navigation and card identification, stamps every reply
//! with server receive/send times for latency decomposition, and keeps
//! collaboration rooms in sync with last-writer-wins by sequence number.

pub mod client;
pub mod collab;
pub mod frame;
pub mod latency;
pub mod protocol;
pub mod server;
pub mod service;

pub use client::{EdgeClient, Exchange, Received};
pub use protocol::{ErrorCode, Request, ServerFrame};
pub use server::{serve, ServeConfig, ServeError, ServerHandle};
pub use service::{Service, Session};
