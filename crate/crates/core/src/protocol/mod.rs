//! Two-round inference protocol: the client sends a compressed encrypted
//! query, the server answers with blinded path sums, the client converts
//! them, and the server returns the encrypted scores.

pub mod client;
pub mod frame;
pub mod messages;
pub mod server;
pub mod transport;

use std::fmt;
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

pub use client::{Client, InferenceResult, TranscriptEntry};
pub use frame::{Frame, MessageType, QueryId, PROTOCOL_VERSION};
pub use messages::SetupInfo;
pub use server::{Deployment, QueryReport, RoundOne, Server, ServerConfig, ServerModel, ServerSession};
pub use transport::{memory_pair, Connection, MemoryTransport, TcpTransport, TrafficStats, Transport};

use crate::error::ProtocolError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Setup,
    Ready,
    QuerySent,
    BccPending,
    Done,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Setup => "awaiting setup",
            Self::Ready => "ready",
            Self::QuerySent => "query sent",
            Self::BccPending => "conversion pending",
            Self::Done => "done",
        })
    }
}

/// Runs `server` on a background thread behind an in-process transport and
/// returns the client end.
pub fn serve_in_process(server: Arc<Server>) -> (Connection, JoinHandle<Result<(), ProtocolError>>) {
    let (client_end, server_end) = memory_pair();
    let handle = std::thread::spawn(move || server.serve(&mut Connection::new(server_end)));
    (Connection::new(client_end), handle)
}
