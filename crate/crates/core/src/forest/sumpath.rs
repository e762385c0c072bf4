//! Encrypted path aggregation: every edge gets 0 when taken and a fresh
//! nonzero random otherwise, so a path's sum is 0 exactly when it is the
//! taken path.

use rand::{CryptoRng, Rng};

use super::model::Child;
use super::paths::{Direction, PackLayout, PathTable};
use super::quantize::QuantizedForest;
use crate::comparison::{ComparisonBit, NodePlan};
use crate::error::ForestError;
use crate::fhe::{CipherHandle, Evaluator};

/// Value of one edge below a node with comparison bit `c = [x > θ]`:
/// left = `r·c`, right = `r·(1 - c)`, both confined to the bit's slot.
pub fn edge_value(ev: &Evaluator, c: &ComparisonBit, side: Direction, r: u64) -> Result<CipherHandle, ForestError> {
    let t = ev.params().plaintext_modulus();
    if r.is_multiple_of(t) {
        return Err(ForestError::ZeroRandomness);
    }
    let mask = ev.params().unit(c.slot_index, r);
    let rc = ev.mult_plain(&c.ciphertext, &mask)?;
    Ok(match side {
        Direction::Left => rc,
        Direction::Right => ev.plain_sub(&mask, &rc)?,
    })
}

/// Packed SumPath ciphertexts, one per chunk of the pack layout.
#[derive(Debug, Clone)]
pub struct SumPathPack {
    pub chunks: Vec<CipherHandle>,
}

/// Depth-first SumPath over the representative tree of every group. The
/// running sum is extended one edge at a time, so a branch point's prefix is
/// computed once and reused by both subtrees. Each slot's value is rotated
/// from slot 0 to its packed position and accumulated into its chunk.
///
/// `bits[i]` must hold plan entry `i`'s result at slot 0. `anchor` is any
/// ciphertext under the session key; it seeds zero values for trees without
/// internal nodes.
#[allow(clippy::too_many_arguments)]
pub fn sum_path<R: Rng + CryptoRng>(
    ev: &Evaluator,
    forest: &QuantizedForest,
    table: &PathTable,
    pack: &PackLayout,
    plan: &NodePlan,
    bits: &[ComparisonBit],
    anchor: &CipherHandle,
    rng: &mut R,
) -> Result<SumPathPack, ForestError> {
    if let Some(b) = bits.iter().find(|b| b.slot_index != 0) {
        return Err(ForestError::Schema(format!(
            "comparison bit at slot {} must be aligned to slot 0",
            b.slot_index
        )));
    }
    let t = ev.params().plaintext_modulus();
    let zero = ev.zero_like(anchor)?;
    let mut chunks: Vec<Option<CipherHandle>> = vec![None; pack.chunk_count()];
    // slot index per representative path
    let mut slot_of_path = vec![None; table.len()];
    for s in &pack.slots {
        slot_of_path[s.representative] = Some((s.chunk, s.slot));
    }

    struct Walk<'a, R> {
        ev: &'a Evaluator,
        forest: &'a QuantizedForest,
        table: &'a PathTable,
        plan: &'a NodePlan,
        bits: &'a [ComparisonBit],
        slot_of_path: &'a [Option<(usize, usize)>],
        chunks: &'a mut Vec<Option<CipherHandle>>,
        rng: &'a mut R,
        t: u64,
    }

    impl<R: Rng> Walk<'_, R> {
        fn visit(&mut self, tree: usize, at: Child, prefix: &CipherHandle) -> Result<(), ForestError> {
            match at {
                Child::Leaf(leaf) => {
                    let pid = self.table.path_of_leaf[tree][leaf];
                    if let Some((chunk, slot)) = self.slot_of_path[pid] {
                        let placed = if slot == 0 {
                            prefix.clone()
                        } else {
                            self.ev.rotate_rows_right(prefix, slot)?
                        };
                        let acc = &mut self.chunks[chunk];
                        *acc = Some(match acc.take() {
                            None => placed,
                            Some(a) => self.ev.add(&a, &placed)?,
                        });
                    }
                    Ok(())
                }
                Child::Node(n) => {
                    let node = &self.forest.trees[tree].nodes[n];
                    let i = self
                        .plan
                        .index_of(node.feature, node.threshold)
                        .ok_or(ForestError::MissingBit(n))?;
                    let bit = self.bits.get(i).ok_or(ForestError::MissingBit(i))?;
                    for (dir, child) in [(Direction::Left, node.left), (Direction::Right, node.right)] {
                        let r = self.rng.gen_range(1..self.t);
                        let e = edge_value(self.ev, bit, dir, r)?;
                        let next = self.ev.add(prefix, &e)?;
                        self.visit(tree, child, &next)?;
                    }
                    Ok(())
                }
            }
        }
    }

    let mut walk = Walk {
        ev,
        forest,
        table,
        plan,
        bits,
        slot_of_path: &slot_of_path,
        chunks: &mut chunks,
        rng,
        t,
    };
    for group in &pack.groups {
        let tree = group.trees[0];
        walk.visit(tree, forest.trees[tree].root(), &zero)?;
    }
    Ok(SumPathPack {
        chunks: chunks
            .into_iter()
            .map(|c| c.map_or_else(|| Ok(zero.clone()), Ok))
            .collect::<Result<_, ForestError>>()?,
    })
}
