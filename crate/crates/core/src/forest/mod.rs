//! Forest models, quantization, path bookkeeping and encrypted path
//! aggregation.

pub mod leaf;
pub mod model;
pub mod paths;
pub mod quantize;
pub mod sumpath;

pub use leaf::{leaf_plaintext, LeafSelector};
pub use model::{decide, Child, FeatureSpec, ForestModel, Leaf, ModelKind, Node, ScoreMode, Tree};
pub use paths::{
    cluster_paths, condition_key, multiply_path_oracle, plan_packing, tree_paths, ConditionKey, Direction, ForestPath,
    PackLayout, PackedSlot, PathEdge, PathTable, TreeGroup,
};
pub use quantize::{
    check_bitwidth, quantize, quantize_threshold, quantize_value, QLeaf, QNode, QTree, QuantizedForest, SCORE_SCALE,
};
pub use sumpath::{edge_value, sum_path, SumPathPack};
