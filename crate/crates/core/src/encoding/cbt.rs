//! Point and range encodings over a complete binary tree whose leaves are the
//! integers `0..2^bits`. Level 0 is the root; level `bits` holds the leaves.
//! A node at level `d` is labelled with the CW codeword of its index within
//! that level.

use super::cw::{cw_encode, CwCodeword, CwParams};
use crate::error::EncodingError;

/// Root-to-leaf labels of one value; `bits + 1` entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeVector {
    labels: Vec<CwCodeword>,
}

/// Minimal node cover of the suffix range `(beta, 2^bits - 1]`, at most one
/// node per level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReVector {
    labels: Vec<Option<CwCodeword>>,
}

impl PeVector {
    pub fn labels(&self) -> &[CwCodeword] {
        &self.labels
    }

    pub fn levels(&self) -> usize {
        self.labels.len()
    }
}

impl ReVector {
    pub fn labels(&self) -> &[Option<CwCodeword>] {
        &self.labels
    }

    pub fn levels(&self) -> usize {
        self.labels.len()
    }
}

fn check_domain(value: u64, bits: u32, cw: CwParams) -> Result<(), EncodingError> {
    if bits == 0 || bits > 32 {
        return Err(EncodingError::InvalidCw(format!("bit width {bits} outside 1..=32")));
    }
    if value >> bits != 0 {
        return Err(EncodingError::OutOfDomain { value, bits });
    }
    if cw.codebook_size() < 1u128 << bits {
        return Err(EncodingError::InvalidCw(format!(
            "codebook of {} words cannot label {} leaves",
            cw.codebook_size(),
            1u64 << bits
        )));
    }
    Ok(())
}

/// Index within each level of the ancestors of leaf `alpha`.
pub fn pe_node_indices(alpha: u64, bits: u32) -> Vec<u64> {
    (0..=bits).map(|d| alpha >> (bits - d)).collect()
}

/// Index within each level of the cover nodes of `(beta, max]`. Level `d`
/// contributes the right sibling of beta's ancestor whenever that ancestor is
/// a left child.
pub fn re_node_indices(beta: u64, bits: u32) -> Vec<Option<u64>> {
    (0..=bits)
        .map(|d| {
            if d == 0 {
                return None;
            }
            let ancestor = beta >> (bits - d);
            (ancestor & 1 == 0).then_some(ancestor + 1)
        })
        .collect()
}

pub fn pe_encode(alpha: u64, bits: u32, cw: CwParams) -> Result<PeVector, EncodingError> {
    check_domain(alpha, bits, cw)?;
    let labels = pe_node_indices(alpha, bits)
        .into_iter()
        .map(|idx| cw_encode(idx, cw))
        .collect::<Result<_, _>>()?;
    Ok(PeVector { labels })
}

pub fn re_encode(beta: u64, bits: u32, cw: CwParams) -> Result<ReVector, EncodingError> {
    check_domain(beta, bits, cw)?;
    let labels = re_node_indices(beta, bits)
        .into_iter()
        .map(|idx| idx.map(|i| cw_encode(i, cw)).transpose())
        .collect::<Result<_, _>>()?;
    Ok(ReVector { labels })
}
