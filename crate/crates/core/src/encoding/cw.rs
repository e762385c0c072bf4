use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::EncodingError;

/// Largest codeword length the default parameter choice accepts before
/// raising the weight.
const MAX_DEFAULT_LENGTH: usize = 512;

/// Constant-weight code parameters: codewords of `length` bits with exactly
/// `weight` ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CwParams {
    pub length: usize,
    pub weight: usize,
}

impl CwParams {
    pub fn new(length: usize, weight: usize) -> Result<Self, EncodingError> {
        if weight == 0 || weight > length {
            return Err(EncodingError::InvalidCw(format!(
                "weight {weight} must lie in [1, {length}]"
            )));
        }
        Ok(Self { length, weight })
    }

    /// Shortest code of the given weight with at least `alphabet` codewords.
    pub fn for_alphabet(alphabet: u128, weight: usize) -> Result<Self, EncodingError> {
        if weight == 0 {
            return Err(EncodingError::InvalidCw("weight must be positive".into()));
        }
        // C(l, w) grows monotonically in l; gallop then bisect.
        let mut hi = weight.max(1);
        while binomial(hi, weight) < alphabet {
            hi *= 2;
        }
        let mut lo = weight;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if binomial(mid, weight) >= alphabet {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Self::new(lo, weight)
    }

    /// Weight 2 with the shortest sufficient length, unless that length exceeds
    /// 512 bits; then the smallest weight whose code fits in 512 bits.
    pub fn default_for_bits(bits: u32) -> Self {
        let alphabet = 1u128 << bits;
        let mut weight = 2;
        loop {
            let p = Self::for_alphabet(alphabet, weight).expect("positive weight");
            if p.length <= MAX_DEFAULT_LENGTH {
                return p;
            }
            weight += 1;
        }
    }

    pub fn codebook_size(&self) -> u128 {
        binomial(self.length, self.weight)
    }

    /// Multiplicative depth of one equality test: `ceil(log2 h) + 2`.
    pub fn equality_depth(&self) -> u32 {
        ceil_log2(self.weight) + 2
    }
}

pub(crate) fn ceil_log2(x: usize) -> u32 {
    if x <= 1 {
        0
    } else {
        usize::BITS - (x - 1).leading_zeros()
    }
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// A constant-weight codeword; bit 0 is the leftmost character when printed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CwCodeword {
    bits: Vec<bool>,
}

impl CwCodeword {
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn bit(&self, i: usize) -> u64 {
        u64::from(self.bits[i])
    }
}

impl fmt::Display for CwCodeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for CwCodeword {
    type Err = EncodingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(EncodingError::InvalidCw(format!("bad bit character {other:?}"))),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { bits })
    }
}

/// Maps `value` to the codeword of that rank in lexicographic order of the
/// one-positions (rank 0 = all ones first).
pub fn cw_encode(value: u64, params: CwParams) -> Result<CwCodeword, EncodingError> {
    let size = params.codebook_size();
    if u128::from(value) >= size {
        return Err(EncodingError::OutOfCodebook { value, size });
    }
    let mut rank = u128::from(value);
    let mut remaining = params.weight;
    let mut bits = vec![false; params.length];
    for (pos, bit) in bits.iter_mut().enumerate() {
        if remaining == 0 {
            break;
        }
        // words that place a one here
        let with_one = binomial(params.length - pos - 1, remaining - 1);
        if rank < with_one {
            *bit = true;
            remaining -= 1;
        } else {
            rank -= with_one;
        }
    }
    Ok(CwCodeword { bits })
}

/// Inverse of [`cw_encode`]. Returns `None` for words of the wrong shape.
pub fn cw_rank(word: &CwCodeword, params: CwParams) -> Option<u64> {
    if word.len() != params.length || word.weight() != params.weight {
        return None;
    }
    let mut rank: u128 = 0;
    let mut remaining = params.weight;
    for (pos, &b) in word.bits.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if b {
            remaining -= 1;
        } else {
            rank += binomial(params.length - pos - 1, remaining - 1);
        }
    }
    u64::try_from(rank).ok()
}
