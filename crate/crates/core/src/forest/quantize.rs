//! Integer forests: thresholds mapped to `bitwidth`-bit codes and leaf values
//! to fixed-point integers.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::model::{decide, Child, FeatureSpec, ForestModel, ModelKind, ScoreMode};
use crate::comparison::NodePlan;
use crate::error::ForestError;

/// Leaf values are multiplied by this before rounding.
pub const SCORE_SCALE: f64 = 4096.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QNode {
    pub feature: usize,
    pub threshold: u64,
    pub left: Child,
    pub right: Child,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QLeaf {
    pub value: i64,
    pub class_id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QTree {
    pub nodes: Vec<QNode>,
    pub leaves: Vec<QLeaf>,
}

impl QTree {
    pub fn root(&self) -> Child {
        if self.nodes.is_empty() {
            Child::Leaf(0)
        } else {
            Child::Node(0)
        }
    }

    pub fn walk(&self, x: &[u64]) -> usize {
        let mut at = self.root();
        loop {
            match at {
                Child::Leaf(l) => return l,
                Child::Node(n) => {
                    let node = &self.nodes[n];
                    at = if x[node.feature] > node.threshold {
                        node.right
                    } else {
                        node.left
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedForest {
    pub kind: ModelKind,
    pub num_classes: usize,
    pub bitwidth: u32,
    pub mode: ScoreMode,
    pub features: Vec<FeatureSpec>,
    pub trees: Vec<QTree>,
}

/// `floor((v - min) / (max - min) * (2^bits - 1))` without range checks.
fn affine_code(v: f64, spec: &FeatureSpec, bits: u32) -> u64 {
    let top = ((1u64 << bits) - 1) as f64;
    let code = ((v - spec.min) / (spec.max - spec.min) * top).floor();
    code.clamp(0.0, top) as u64
}

/// Code of a threshold; thresholds outside the feature range are rejected.
pub fn quantize_threshold(v: f64, spec: &FeatureSpec, bits: u32) -> Result<u64, ForestError> {
    if !(spec.min..=spec.max).contains(&v) {
        return Err(ForestError::Range {
            feature: spec.name.clone(),
            value: v,
            min: spec.min,
            max: spec.max,
        });
    }
    Ok(affine_code(v, spec, bits))
}

/// Code of a query value; values outside the range are clamped.
pub fn quantize_value(v: f64, spec: &FeatureSpec, bits: u32) -> u64 {
    affine_code(v, spec, bits)
}

pub fn check_bitwidth(bits: u32) -> Result<(), ForestError> {
    if bits == 0 || bits > 32 {
        return Err(ForestError::Schema(format!("bit width {bits} outside 1..=32")));
    }
    Ok(())
}

pub fn quantize(model: &ForestModel, bitwidth: u32) -> Result<QuantizedForest, ForestError> {
    check_bitwidth(bitwidth)?;
    model.validate()?;
    let trees = model
        .trees
        .iter()
        .enumerate()
        .map(|(ti, t)| {
            let nodes = t
                .nodes
                .iter()
                .map(|n| {
                    let f = model
                        .feature_index(&n.feature)
                        .ok_or_else(|| ForestError::UnknownFeature(n.feature.clone()))?;
                    Ok(QNode {
                        feature: f,
                        threshold: quantize_threshold(n.threshold, &model.features[f], bitwidth)?,
                        left: n.left,
                        right: n.right,
                    })
                })
                .collect::<Result<_, ForestError>>()?;
            let leaves = (0..t.leaves.len())
                .map(|li| QLeaf {
                    value: (model.leaf_value(ti, li) * SCORE_SCALE).round() as i64,
                    class_id: t.leaf_class(li),
                })
                .collect();
            Ok(QTree { nodes, leaves })
        })
        .collect::<Result<_, ForestError>>()?;
    Ok(QuantizedForest {
        kind: model.model_kind,
        num_classes: model.num_classes,
        bitwidth,
        mode: model.score_mode(),
        features: model.features.clone(),
        trees,
    })
}

impl QuantizedForest {
    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn node_count(&self) -> usize {
        self.trees.iter().map(|t| t.nodes.len()).sum()
    }

    pub fn quantize_row(&self, row: &[f64]) -> Result<Vec<u64>, ForestError> {
        if row.len() != self.features.len() {
            return Err(ForestError::Schema(format!(
                "row has {} values, model has {} features",
                row.len(),
                self.features.len()
            )));
        }
        Ok(row
            .iter()
            .zip(&self.features)
            .map(|(&v, f)| quantize_value(v, f, self.bitwidth))
            .collect())
    }

    /// Quantized query keyed by feature name, as the encoder expects.
    pub fn query_features(&self, qrow: &[u64]) -> HashMap<String, u64> {
        self.features
            .iter()
            .zip(qrow)
            .map(|(f, &v)| (f.name.clone(), v))
            .collect()
    }

    /// Number of score entries: 1 in signed mode, else `num_classes`.
    pub fn score_len(&self) -> usize {
        match self.mode {
            ScoreMode::Signed => 1,
            ScoreMode::PerClass => self.num_classes,
        }
    }

    /// The leaf reached in every tree.
    pub fn true_leaves(&self, qrow: &[u64]) -> Vec<usize> {
        self.trees.iter().map(|t| t.walk(qrow)).collect()
    }

    /// Plaintext reference evaluation in exact integer arithmetic.
    pub fn evaluate(&self, qrow: &[u64]) -> Vec<i64> {
        let mut scores = vec![0i64; self.score_len()];
        for (t, leaf) in self.trees.iter().zip(self.true_leaves(qrow)) {
            let l = &t.leaves[leaf];
            let slot = if self.mode == ScoreMode::Signed { 0 } else { l.class_id };
            scores[slot] += l.value;
        }
        scores
    }

    pub fn predict(&self, qrow: &[u64]) -> usize {
        decide(&self.evaluate(qrow))
    }

    /// Largest possible `|aggregate|` over any input, per the worst leaf of
    /// every tree.
    pub fn max_abs_aggregate(&self) -> u64 {
        let mut per_slot = vec![0u64; self.score_len()];
        for t in &self.trees {
            let mut worst = vec![0u64; self.score_len()];
            for l in &t.leaves {
                let slot = if self.mode == ScoreMode::Signed { 0 } else { l.class_id };
                worst[slot] = worst[slot].max(l.value.unsigned_abs());
            }
            for (a, w) in per_slot.iter_mut().zip(worst) {
                *a += w;
            }
        }
        per_slot.into_iter().max().unwrap_or(0)
    }

    /// Distinct `(feature, threshold)` pairs of all nodes.
    pub fn node_plan(&self) -> NodePlan {
        NodePlan::new(
            self.bitwidth,
            self.trees
                .iter()
                .flat_map(|t| t.nodes.iter().map(|n| (n.feature, n.threshold))),
        )
        .expect("thresholds are quantized to the bit width")
    }
}
