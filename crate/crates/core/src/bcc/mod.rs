//! Blind code conversion: the server pads and blindly shuffles an encrypted
//! vector to a fixed value-frequency profile, the client re-encodes it slot
//! by slot, and the server keeps track of where every value went.

pub mod convert;
pub mod profile;
pub mod shuffle;

use rand::Rng;

pub use convert::{client_convert, ConversionRule, ConversionStats};
pub use profile::{FrequencyProfile, ValueClass};
pub use shuffle::{blind_shuffle, pad_to_profile, replicate, ShuffleRecord, ShuffleRound, SlotOrigin};

use crate::error::BccError;
use crate::fhe::{CipherHandle, Evaluator};

/// Server-side state of one conversion round.
#[derive(Debug, Clone)]
pub struct BccTranscript {
    pub input: CipherHandle,
    pub padded: CipherHandle,
    pub shuffled: CipherHandle,
    pub converted: Option<CipherHandle>,
    pub record: ShuffleRecord,
    /// Rotations spent on replication plus shuffling.
    pub rotations: usize,
}

/// Pads, replicates and shuffles `input`, whose first `used` slots hold
/// `counts[j]` values of each profile class.
pub fn prepare_challenge<R: Rng>(
    ev: &Evaluator,
    input: &CipherHandle,
    used: usize,
    counts: &[usize],
    profile: &FrequencyProfile,
    rng: &mut R,
) -> Result<BccTranscript, BccError> {
    let body = pad_to_profile(ev, input, used, counts, profile, rng)?;
    let padded = replicate(ev, &body, profile.n)?;
    let replication_rotations = profile.replication().trailing_zeros() as usize;
    let (shuffled, record) = blind_shuffle(ev, &padded, used, profile, rng)?;
    Ok(BccTranscript {
        input: input.clone(),
        padded,
        shuffled,
        converted: None,
        rotations: replication_rotations + record.rotations,
        record,
    })
}
