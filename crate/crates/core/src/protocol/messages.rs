//! Message payloads. Setup metadata travels as JSON; keys and ciphertexts use
//! the backend's binary encoding.

use serde::{Deserialize, Serialize};

use crate::bcc::FrequencyProfile;
use crate::encoding::QueryLayout;
use crate::error::ProtocolError;
use crate::fhe::serialize::{
    read_cipher_list, read_eval_keys, write_cipher_list, write_eval_keys, ByteReader, ByteWriter,
};
use crate::fhe::{CipherHandle, EvalKeys};
use crate::forest::{FeatureSpec, ModelKind, ScoreMode};

/// What the server publishes after accepting a client's keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupInfo {
    pub model_kind: ModelKind,
    pub num_classes: usize,
    pub score_mode: ScoreMode,
    /// Result slots the client reads: 1 in signed mode, one per class otherwise.
    pub score_len: usize,
    /// Feature ranges used to quantize query values.
    pub features: Vec<FeatureSpec>,
    pub layout: QueryLayout,
    /// Class counts every conversion challenge exhibits.
    pub profile: FrequencyProfile,
    /// Conversion challenges per query.
    pub chunk_count: usize,
}

impl SetupInfo {
    /// Zero-valued slots each challenge must contain absent collisions.
    pub fn expected_zeros(&self) -> usize {
        let zero = self
            .profile
            .class_index(crate::bcc::ValueClass::Zero)
            .expect("profiles carry a zero class");
        self.profile.totals()[zero]
    }
}

pub fn encode_keys(keys: &EvalKeys) -> Vec<u8> {
    let mut w = ByteWriter::new();
    write_eval_keys(&mut w, keys);
    w.into_bytes()
}

pub fn decode_keys(bytes: &[u8]) -> Result<EvalKeys, ProtocolError> {
    let mut r = ByteReader::new(bytes);
    let keys = read_eval_keys(&mut r)?;
    r.finish()?;
    Ok(keys)
}

pub fn encode_ciphers(cs: &[CipherHandle]) -> Vec<u8> {
    let mut w = ByteWriter::new();
    write_cipher_list(&mut w, cs);
    w.into_bytes()
}

pub fn decode_ciphers(bytes: &[u8]) -> Result<Vec<CipherHandle>, ProtocolError> {
    let mut r = ByteReader::new(bytes);
    let cs = read_cipher_list(&mut r)?;
    r.finish()?;
    Ok(cs)
}
