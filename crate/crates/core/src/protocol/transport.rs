//! Byte transports carrying whole encoded frames, and a framed connection
//! that counts traffic per message type.

use std::collections::BTreeMap;
use std::io::{ErrorKind, Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{channel, Receiver, Sender};

use serde::{Deserialize, Serialize};

use super::frame::{Frame, MessageType, MAX_FRAME_LEN};
use crate::error::ProtocolError;

/// Moves encoded frames (length prefix included) between two peers.
pub trait Transport: Send {
    fn send_bytes(&mut self, frame: &[u8]) -> Result<(), ProtocolError>;
    /// Next complete frame, or `Closed` once the peer has gone away.
    fn recv_bytes(&mut self) -> Result<Vec<u8>, ProtocolError>;
}

/// In-process transport over a pair of channels.
pub struct MemoryTransport {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

pub fn memory_pair() -> (MemoryTransport, MemoryTransport) {
    let (a_tx, b_rx) = channel();
    let (b_tx, a_rx) = channel();
    (
        MemoryTransport { tx: a_tx, rx: a_rx },
        MemoryTransport { tx: b_tx, rx: b_rx },
    )
}

impl Transport for MemoryTransport {
    fn send_bytes(&mut self, frame: &[u8]) -> Result<(), ProtocolError> {
        self.tx.send(frame.to_vec()).map_err(|_| ProtocolError::Closed)
    }

    fn recv_bytes(&mut self) -> Result<Vec<u8>, ProtocolError> {
        self.rx.recv().map_err(|_| ProtocolError::Closed)
    }
}

pub struct TcpTransport {
    stream: TcpStream,
}

impl TcpTransport {
    pub fn new(stream: TcpStream) -> Self {
        Self { stream }
    }

    pub fn connect(addr: &str) -> Result<Self, ProtocolError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self::new(stream))
    }
}

impl Transport for TcpTransport {
    fn send_bytes(&mut self, frame: &[u8]) -> Result<(), ProtocolError> {
        self.stream.write_all(frame)?;
        self.stream.flush()?;
        Ok(())
    }

    fn recv_bytes(&mut self) -> Result<Vec<u8>, ProtocolError> {
        let mut prefix = [0u8; 4];
        match self.stream.read_exact(&mut prefix) {
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Err(ProtocolError::Closed),
            r => r?,
        }
        let len = u32::from_be_bytes(prefix) as usize;
        if len > MAX_FRAME_LEN {
            return Err(ProtocolError::Frame(format!("frame of {len} bytes exceeds limit")));
        }
        let mut out = vec![0u8; 4 + len];
        out[..4].copy_from_slice(&prefix);
        self.stream.read_exact(&mut out[4..])?;
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficCount {
    pub frames: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficStats {
    pub sent: BTreeMap<MessageType, TrafficCount>,
    pub received: BTreeMap<MessageType, TrafficCount>,
}

impl TrafficStats {
    pub fn bytes_sent(&self) -> u64 {
        self.sent.values().map(|c| c.bytes).sum()
    }

    pub fn bytes_received(&self) -> u64 {
        self.received.values().map(|c| c.bytes).sum()
    }

    pub fn bytes_of(&self, kind: MessageType) -> u64 {
        self.sent.get(&kind).map_or(0, |c| c.bytes) + self.received.get(&kind).map_or(0, |c| c.bytes)
    }
}

/// Frame-level view of a transport.
pub struct Connection {
    inner: Box<dyn Transport>,
    stats: TrafficStats,
}

impl Connection {
    pub fn new(inner: impl Transport + 'static) -> Self {
        Self {
            inner: Box::new(inner),
            stats: TrafficStats::default(),
        }
    }

    pub fn send(&mut self, frame: &Frame) -> Result<(), ProtocolError> {
        let bytes = frame.encode();
        self.inner.send_bytes(&bytes)?;
        let c = self.stats.sent.entry(frame.kind).or_default();
        c.frames += 1;
        c.bytes += bytes.len() as u64;
        Ok(())
    }

    pub fn recv(&mut self) -> Result<Frame, ProtocolError> {
        let bytes = self.inner.recv_bytes()?;
        let frame = Frame::decode(&bytes)?;
        let c = self.stats.received.entry(frame.kind).or_default();
        c.frames += 1;
        c.bytes += bytes.len() as u64;
        Ok(frame)
    }

    /// Sends raw bytes as if they were a frame; for fault-injection tests.
    pub fn send_raw(&mut self, bytes: &[u8]) -> Result<(), ProtocolError> {
        self.inner.send_bytes(bytes)
    }

    pub fn stats(&self) -> &TrafficStats {
        &self.stats
    }
}
