use serde::{Deserialize, Serialize};

use crate::error::BccError;
use crate::fhe::{CipherHandle, SecretKey};

/// Client-side re-encoding rule applied slot by slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConversionRule {
    /// 0 becomes 1, every nonzero value becomes 0.
    ZeroIndicator,
}

impl ConversionRule {
    pub fn apply(&self, v: u64) -> u64 {
        match self {
            Self::ZeroIndicator => u64::from(v == 0),
        }
    }
}

/// What the client observes while converting: class counts only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionStats {
    pub zeros: usize,
    pub nonzeros: usize,
}

/// Decrypts, applies `rule` to every slot and encrypts the result afresh,
/// which also resets its depth.
pub fn client_convert(
    sk: &SecretKey,
    c_s: &CipherHandle,
    rule: ConversionRule,
) -> Result<(CipherHandle, ConversionStats), BccError> {
    let params = sk.params();
    let values = params.decode(&sk.decrypt(c_s)?);
    let zeros = values.iter().filter(|&&v| v == 0).count();
    let converted: Vec<u64> = values.iter().map(|&v| rule.apply(v)).collect();
    let c_c = sk.encrypt(&params.encode(&converted)?)?;
    Ok((
        c_c,
        ConversionStats {
            zeros,
            nonzeros: values.len() - zeros,
        },
    ))
}
