use super::paths::{PackLayout, PathTable};
use super::quantize::QuantizedForest;
use crate::error::ForestError;
use crate::fhe::{FheParams, PlainVector};

/// Which leaf values a plaintext carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafSelector {
    /// Every leaf, signed; used when one signed total decides the class.
    Signed,
    /// Leaves of one class only.
    Class(usize),
}

/// Leaf-value plaintext for one chunk. `forward[i]` is the slot that packed
/// slot `i` occupies after shuffling; each packed slot contributes the sum of
/// its member paths' leaf values, and every other slot is 0.
pub fn leaf_plaintext(
    forest: &QuantizedForest,
    table: &PathTable,
    pack: &PackLayout,
    chunk: usize,
    forward: &[usize],
    selector: LeafSelector,
    params: &FheParams,
) -> Result<PlainVector, ForestError> {
    if let LeafSelector::Class(c) = selector {
        if c >= forest.num_classes {
            return Err(ForestError::UnknownClass(c));
        }
    }
    let mut values = vec![0i64; params.slot_count()];
    for s in pack.slots_in_chunk(chunk) {
        let target = *forward
            .get(s.slot)
            .ok_or_else(|| ForestError::Capacity(format!("no shuffled position for packed slot {}", s.slot)))?;
        if target >= values.len() {
            return Err(ForestError::Capacity(format!("shuffled slot {target} out of range")));
        }
        for &pid in &s.members {
            let p = &table.paths[pid];
            let leaf = &forest.trees[p.tree].leaves[p.leaf];
            let take = match selector {
                LeafSelector::Signed => true,
                LeafSelector::Class(c) => leaf.class_id == c,
            };
            if take {
                values[target] += leaf.value;
            }
        }
    }
    Ok(params.encode_signed(&values)?)
}
