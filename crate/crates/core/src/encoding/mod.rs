//! Constant-weight codes, point/range encodings over a complete binary tree,
//! and the slot layout of encrypted queries.

pub mod cbt;
pub mod cw;
pub mod layout;
pub mod pack;

pub use cbt::{pe_encode, pe_node_indices, re_encode, re_node_indices, PeVector, ReVector};
pub use cw::{binomial, cw_encode, cw_rank, CwCodeword, CwParams};
pub use layout::{FeatureSlots, QueryLayout, LAYOUT_VERSION};
pub use pack::{
    compress_plaintexts, compress_query, decompress_query, pack_plaintexts, pack_query, CompressedQuery, QueryFeatures,
};
