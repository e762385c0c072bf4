//! Root-to-leaf paths, condition-based path clusters, and the slot plan used
//! to pack one SumPath value per cluster.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::model::Child;
use super::quantize::{QTree, QuantizedForest};
use crate::comparison::NodePlan;
use crate::error::ForestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// `x <= θ`
    Left,
    /// `x > θ`
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathEdge {
    pub node: usize,
    pub dir: Direction,
}

/// Sorted, deduplicated `(feature, threshold, direction)` conditions.
pub type ConditionKey = Vec<(usize, u64, Direction)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestPath {
    pub tree: usize,
    pub leaf: usize,
    pub edges: Vec<PathEdge>,
    pub key: ConditionKey,
}

/// Every path of a forest in depth-first (left-first) order, grouped into
/// clusters of identical condition keys.
#[derive(Debug, Clone)]
pub struct PathTable {
    pub paths: Vec<ForestPath>,
    /// Condition cluster of every path.
    pub cluster_of: Vec<usize>,
    pub cluster_count: usize,
    /// `path_of_leaf[tree][leaf]`
    pub path_of_leaf: Vec<Vec<usize>>,
}

pub fn tree_paths(tree: &QTree) -> Vec<(usize, Vec<PathEdge>)> {
    fn go(t: &QTree, at: Child, prefix: &mut Vec<PathEdge>, out: &mut Vec<(usize, Vec<PathEdge>)>) {
        match at {
            Child::Leaf(l) => out.push((l, prefix.clone())),
            Child::Node(n) => {
                for (dir, child) in [(Direction::Left, t.nodes[n].left), (Direction::Right, t.nodes[n].right)] {
                    prefix.push(PathEdge { node: n, dir });
                    go(t, child, prefix, out);
                    prefix.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    go(tree, tree.root(), &mut Vec::new(), &mut out);
    out
}

pub fn condition_key(tree: &QTree, edges: &[PathEdge]) -> ConditionKey {
    let mut key: ConditionKey = edges
        .iter()
        .map(|e| (tree.nodes[e.node].feature, tree.nodes[e.node].threshold, e.dir))
        .collect();
    key.sort_unstable();
    key.dedup();
    key
}

/// Enumerates paths and clusters those with identical condition keys,
/// within and across trees. Thresholds and leaves are left untouched.
pub fn cluster_paths(forest: &QuantizedForest) -> PathTable {
    let mut paths = Vec::new();
    let mut path_of_leaf = Vec::with_capacity(forest.trees.len());
    for (ti, tree) in forest.trees.iter().enumerate() {
        let mut by_leaf = vec![0; tree.leaves.len()];
        for (leaf, edges) in tree_paths(tree) {
            by_leaf[leaf] = paths.len();
            let key = condition_key(tree, &edges);
            paths.push(ForestPath {
                tree: ti,
                leaf,
                edges,
                key,
            });
        }
        path_of_leaf.push(by_leaf);
    }
    let mut ids: HashMap<&ConditionKey, usize> = HashMap::new();
    let cluster_of: Vec<usize> = paths
        .iter()
        .map(|p| {
            let next = ids.len();
            *ids.entry(&p.key).or_insert(next)
        })
        .collect();
    let cluster_count = ids.len();
    PathTable {
        paths,
        cluster_of,
        cluster_count,
        path_of_leaf,
    }
}

impl PathTable {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Plaintext product of edge indicators for every path (1 on the taken path
/// of each tree, 0 elsewhere). `bits[i]` is the result of plan entry `i`.
pub fn multiply_path_oracle(
    forest: &QuantizedForest,
    table: &PathTable,
    plan: &NodePlan,
    bits: &[bool],
) -> Result<Vec<u8>, ForestError> {
    table
        .paths
        .iter()
        .map(|p| {
            let tree = &forest.trees[p.tree];
            let mut prod = 1u8;
            for e in &p.edges {
                let n = &tree.nodes[e.node];
                let i = plan
                    .index_of(n.feature, n.threshold)
                    .ok_or(ForestError::MissingBit(e.node))?;
                let c = *bits.get(i).ok_or(ForestError::MissingBit(i))?;
                prod &= u8::from(c == (e.dir == Direction::Right));
            }
            Ok(prod)
        })
        .collect()
}

/// Trees whose condition-key sets coincide; their paths share packed slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeGroup {
    pub trees: Vec<usize>,
    pub chunk: usize,
}

/// One packed SumPath value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedSlot {
    pub group: usize,
    pub chunk: usize,
    pub slot: usize,
    /// Path whose SumPath value fills the slot.
    pub representative: usize,
    /// Every path whose leaf is scored through this slot.
    pub members: Vec<usize>,
}

/// Assignment of packed slots to SumPath ciphertexts ("chunks"). Each chunk
/// holds at most `cap` true-path candidates and `cap` other slots, so a
/// balanced frequency profile fits in half a row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackLayout {
    pub groups: Vec<TreeGroup>,
    pub slots: Vec<PackedSlot>,
    /// Slots in use per chunk.
    pub chunk_used: Vec<usize>,
    /// Zero-valued (true-path) slots per chunk for any input.
    pub chunk_zeros: Vec<usize>,
    pub cap: usize,
}

impl PackLayout {
    pub fn chunk_count(&self) -> usize {
        self.chunk_used.len()
    }

    pub fn chunk_randoms(&self, chunk: usize) -> usize {
        self.chunk_used[chunk] - self.chunk_zeros[chunk]
    }

    pub fn slots_in_chunk(&self, chunk: usize) -> impl Iterator<Item = &PackedSlot> {
        self.slots.iter().filter(move |s| s.chunk == chunk)
    }
}

/// Groups trees with identical key sets, then fills chunks greedily.
///
/// Sharing is limited to whole identical trees: each group then owns exactly
/// one true slot per query, which keeps the number of zeros fixed and known
/// to the server before padding.
pub fn plan_packing(forest: &QuantizedForest, table: &PathTable, cap: usize) -> Result<PackLayout, ForestError> {
    if cap == 0 {
        return Err(ForestError::Capacity("chunk capacity is zero".into()));
    }
    let mut tree_keys: Vec<Vec<&ConditionKey>> = vec![Vec::new(); forest.trees.len()];
    for p in &table.paths {
        tree_keys[p.tree].push(&p.key);
    }
    for keys in &mut tree_keys {
        keys.sort_unstable();
    }
    let mut group_of_keys: HashMap<&[&ConditionKey], usize> = HashMap::new();
    let mut group_trees: Vec<Vec<usize>> = Vec::new();
    for (ti, keys) in tree_keys.iter().enumerate() {
        let next = group_trees.len();
        let g = *group_of_keys.entry(keys.as_slice()).or_insert(next);
        if g == next {
            group_trees.push(Vec::new());
        }
        group_trees[g].push(ti);
    }

    let mut groups = Vec::with_capacity(group_trees.len());
    let mut slots: Vec<PackedSlot> = Vec::new();
    let (mut chunk_used, mut chunk_zeros) = (vec![0usize], vec![0usize]);
    for (g, trees) in group_trees.into_iter().enumerate() {
        let rep_tree = trees[0];
        // distinct keys of the representative tree, in path order
        let mut reps: Vec<usize> = Vec::new();
        let mut seen: HashMap<&ConditionKey, usize> = HashMap::new();
        for &pid in &table.path_of_leaf_sorted(rep_tree) {
            let key = &table.paths[pid].key;
            if !seen.contains_key(key) {
                seen.insert(key, reps.len());
                reps.push(pid);
            }
        }
        let randoms = reps.len() - 1;
        if randoms > cap {
            return Err(ForestError::Capacity(format!(
                "tree {rep_tree} has {} distinct paths; a chunk holds at most {}",
                reps.len(),
                cap + 1
            )));
        }
        let mut chunk = chunk_used.len() - 1;
        let cur_randoms = chunk_used[chunk] - chunk_zeros[chunk];
        if chunk_zeros[chunk] + 1 > cap || cur_randoms + randoms > cap {
            chunk_used.push(0);
            chunk_zeros.push(0);
            chunk += 1;
        }
        let base = slots.len();
        let start = chunk_used[chunk];
        for (i, &pid) in reps.iter().enumerate() {
            slots.push(PackedSlot {
                group: g,
                chunk,
                slot: start + i,
                representative: pid,
                members: Vec::new(),
            });
        }
        for &ti in &trees {
            for &pid in &table.path_of_leaf[ti] {
                let idx = seen[&table.paths[pid].key];
                slots[base + idx].members.push(pid);
            }
        }
        chunk_used[chunk] += reps.len();
        chunk_zeros[chunk] += 1;
        groups.push(TreeGroup { trees, chunk });
    }
    Ok(PackLayout {
        groups,
        slots,
        chunk_used,
        chunk_zeros,
        cap,
    })
}

impl PathTable {
    /// Path ids of one tree in depth-first order.
    fn path_of_leaf_sorted(&self, tree: usize) -> Vec<usize> {
        let mut ids = self.path_of_leaf[tree].clone();
        ids.sort_unstable();
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{quantize, ForestModel};

    /// Two trees over age/sleep whose rightmost paths both read
    /// `age > 45 and sleep > 8`.
    fn two_trees() -> QuantizedForest {
        let doc = r#"{"model_kind": "xgboost", "num_classes": 2,
            "features": [{"name": "age", "min": 0, "max": 255}, {"name": "sleep", "min": 0, "max": 255}],
            "trees": [
              {"nodes": [
                 {"feature": "age", "threshold": 45, "left": {"leaf": 0}, "right": {"node": 1}},
                 {"feature": "sleep", "threshold": 8, "left": {"leaf": 1}, "right": {"leaf": 2}}],
               "leaves": [{"score": 1}, {"score": 2}, {"score": 3}]},
              {"nodes": [
                 {"feature": "sleep", "threshold": 8, "left": {"node": 1}, "right": {"node": 2}},
                 {"feature": "age", "threshold": 30, "left": {"leaf": 0}, "right": {"leaf": 1}},
                 {"feature": "age", "threshold": 45, "left": {"leaf": 2}, "right": {"leaf": 3}}],
               "leaves": [{"score": 1}, {"score": 2}, {"score": 3}, {"score": 4}]}
            ]}"#;
        quantize(&ForestModel::from_json(doc).unwrap(), 8).unwrap()
    }

    #[test]
    fn shared_condition_forms_one_cluster() {
        let f = two_trees();
        let table = cluster_paths(&f);
        assert_eq!(table.len(), 7);
        assert_eq!(table.cluster_count, 6);
        let a = table.path_of_leaf[0][2];
        let b = table.path_of_leaf[1][3];
        assert_eq!(table.cluster_of[a], table.cluster_of[b]);
        assert_eq!(
            table.paths[a].key,
            vec![(0, 45, Direction::Right), (1, 8, Direction::Right)]
        );
    }

    #[test]
    fn oracle_marks_one_path_per_tree() {
        let f = two_trees();
        let table = cluster_paths(&f);
        let plan = f.node_plan();
        for age in [10u64, 40, 50] {
            for sleep in [3u64, 9] {
                let x = [age, sleep];
                let bits: Vec<bool> = plan.entries().iter().map(|e| x[e.feature] > e.threshold).collect();
                let prod = multiply_path_oracle(&f, &table, &plan, &bits).unwrap();
                let truth = f.true_leaves(&x);
                for (pid, p) in table.paths.iter().enumerate() {
                    assert_eq!(prod[pid] == 1, truth[p.tree] == p.leaf);
                }
            }
        }
    }

    #[test]
    fn identical_trees_share_slots() {
        let doc = r#"{"model_kind": "xgboost", "num_classes": 2,
            "features": [{"name": "a", "min": 0, "max": 255}],
            "trees": [
              {"nodes": [{"feature": "a", "threshold": 7, "left": {"leaf": 0}, "right": {"leaf": 1}}], "leaves": [{"score": 1}, {"score": 2}]},
              {"nodes": [{"feature": "a", "threshold": 7, "left": {"leaf": 0}, "right": {"leaf": 1}}], "leaves": [{"score": 5}, {"score": 6}]},
              {"nodes": [{"feature": "a", "threshold": 9, "left": {"leaf": 0}, "right": {"leaf": 1}}], "leaves": [{"score": 1}, {"score": 1}]}
            ]}"#;
        let f = quantize(&ForestModel::from_json(doc).unwrap(), 8).unwrap();
        let table = cluster_paths(&f);
        let pack = plan_packing(&f, &table, 16).unwrap();
        assert_eq!(pack.groups.len(), 2);
        assert_eq!(pack.slots.len(), 4);
        assert_eq!(pack.slots[0].members.len(), 2);
        assert_eq!(pack.chunk_zeros, vec![2]);
        assert_eq!(pack.chunk_used, vec![4]);
    }

    #[test]
    fn chunks_respect_capacity() {
        let f = two_trees();
        let table = cluster_paths(&f);
        let pack = plan_packing(&f, &table, 3).unwrap();
        assert_eq!(pack.chunk_count(), 2);
        for c in 0..pack.chunk_count() {
            assert!(pack.chunk_zeros[c] <= 3 && pack.chunk_randoms(c) <= 3);
        }
        assert!(matches!(plan_packing(&f, &table, 2), Err(ForestError::Capacity(_))));
    }
}
