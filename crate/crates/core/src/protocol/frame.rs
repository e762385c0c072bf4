//! Wire frames: `[len u32 BE][version u8][type u8][query_id 8B][payload][crc32 BE]`.
//! `len` counts every byte after itself; the checksum covers version through
//! payload.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ProtocolError;

pub const PROTOCOL_VERSION: u8 = 1;
/// Largest accepted frame body.
pub const MAX_FRAME_LEN: usize = 1 << 30;
const HEADER_LEN: usize = 1 + 1 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageType {
    SetupReq = 1,
    SetupResp = 2,
    Query = 3,
    BccChallenge = 4,
    BccResponse = 5,
    Result = 6,
    Error = 7,
}

impl MessageType {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            1 => Self::SetupReq,
            2 => Self::SetupResp,
            3 => Self::Query,
            4 => Self::BccChallenge,
            5 => Self::BccResponse,
            6 => Self::Result,
            7 => Self::Error,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SetupReq => "SETUP_REQ",
            Self::SetupResp => "SETUP_RESP",
            Self::Query => "QUERY",
            Self::BccChallenge => "BCC_CHALLENGE",
            Self::BccResponse => "BCC_RESPONSE",
            Self::Result => "RESULT",
            Self::Error => "ERROR",
        }
    }
}

impl fmt::Display for MessageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct QueryId(pub [u8; 8]);

impl QueryId {
    pub const NONE: Self = Self([0; 8]);
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: MessageType,
    pub query_id: QueryId,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: MessageType, query_id: QueryId, payload: Vec<u8>) -> Self {
        Self {
            kind,
            query_id,
            payload,
        }
    }

    pub fn error(query_id: QueryId, message: &str) -> Self {
        Self::new(MessageType::Error, query_id, message.as_bytes().to_vec())
    }

    /// Encoded size including the length prefix.
    pub fn wire_len(&self) -> usize {
        4 + HEADER_LEN + self.payload.len() + 4
    }

    pub fn encode(&self) -> Vec<u8> {
        let body_len = HEADER_LEN + self.payload.len() + 4;
        let mut out = Vec::with_capacity(4 + body_len);
        out.extend_from_slice(&(body_len as u32).to_be_bytes());
        out.push(PROTOCOL_VERSION);
        out.push(self.kind as u8);
        out.extend_from_slice(&self.query_id.0);
        out.extend_from_slice(&self.payload);
        let crc = crc32fast::hash(&out[4..]);
        out.extend_from_slice(&crc.to_be_bytes());
        out
    }

    /// Decodes one complete frame, length prefix included.
    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        if bytes.len() < 4 {
            return Err(ProtocolError::Frame("missing length prefix".into()));
        }
        let len = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
        let body = &bytes[4..];
        if body.len() != len {
            return Err(ProtocolError::Frame(format!(
                "length prefix {len} but {} bytes follow",
                body.len()
            )));
        }
        if len < HEADER_LEN + 4 {
            return Err(ProtocolError::Frame(format!("frame of {len} bytes is too short")));
        }
        let (content, crc) = body.split_at(len - 4);
        let found = u32::from_be_bytes(crc.try_into().expect("4 bytes"));
        let expected = crc32fast::hash(content);
        if expected != found {
            return Err(ProtocolError::Checksum { expected, found });
        }
        if content[0] != PROTOCOL_VERSION {
            return Err(ProtocolError::Version(content[0]));
        }
        let kind = MessageType::from_u8(content[1])
            .ok_or_else(|| ProtocolError::Frame(format!("unknown message type {}", content[1])))?;
        let query_id = QueryId(content[2..10].try_into().expect("8 bytes"));
        Ok(Self {
            kind,
            query_id,
            payload: content[HEADER_LEN..].to_vec(),
        })
    }
}
