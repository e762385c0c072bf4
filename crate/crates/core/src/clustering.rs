//! Offline model optimizer: merges near-equal thresholds of the same feature
//! under a validation-accuracy gate, then reports the node and path
//! reductions the merge buys.

use serde::{Deserialize, Serialize};

use crate::comparison::NodePlan;
use crate::dataset::Dataset;
use crate::error::ClusterError;
use crate::forest::{cluster_paths, quantize, ForestModel};

pub const DEFAULT_INTENSITY: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Largest normalized threshold distance `|a - b| / (max - min)` (strict)
    /// for two nodes to share a cluster.
    pub intensity: f64,
    /// Accuracy drop a commit may cause; 0 allows none.
    pub tolerance: f64,
    /// Bit width used to count plan entries and path clusters in the report.
    pub bitwidth: u32,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            intensity: DEFAULT_INTENSITY,
            tolerance: 0.0,
            bitwidth: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub intensity: f64,
    pub node_count: usize,
    /// Distinct `(feature, threshold)` pairs before and after.
    pub distinct_nodes_before: usize,
    pub distinct_nodes_after: usize,
    pub plan_size_before: usize,
    pub plan_size_after: usize,
    pub node_clusters: usize,
    pub path_count: usize,
    pub path_clusters_before: usize,
    pub path_clusters_after: usize,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    pub committed: usize,
    pub aborted: usize,
    pub passes: usize,
}

/// Plaintext accuracy over a fixed, non-empty validation set.
#[derive(Debug, Clone)]
pub struct Validator {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl Validator {
    /// Rows must already be in the model's feature order.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self, ClusterError> {
        if rows.is_empty() {
            return Err(ClusterError::EmptyValidation);
        }
        Ok(Self { rows, labels })
    }

    pub fn from_dataset(data: &Dataset, model: &ForestModel) -> Result<Self, ClusterError> {
        Self::new(data.aligned_rows(model)?, data.labels.clone())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn accuracy(&self, model: &ForestModel) -> f64 {
        model.accuracy(&self.rows, &self.labels)
    }
}

fn distinct_pairs(model: &ForestModel) -> Vec<(usize, f64)> {
    let mut pairs: Vec<(usize, f64)> = model
        .trees
        .iter()
        .flat_map(|t| t.nodes.iter())
        .map(|n| (model.feature_index(&n.feature).expect("validated"), n.threshold))
        .collect();
    pairs.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pairs.dedup();
    pairs
}

/// Repeated validation-gated merging. Each pass walks the distinct
/// `(feature, threshold)` pairs in ascending order; for every candidate it
/// gathers the same-feature nodes within the intensity radius that have not
/// joined a cluster yet this pass, sets them to their occurrence-weighted
/// mean and keeps the change only if accuracy does not drop. Stops after a
/// pass with no commit.
pub fn cluster_nodes(
    model: &ForestModel,
    cfg: &ClusterConfig,
    validator: &Validator,
) -> Result<(ForestModel, ClusterReport), ClusterError> {
    if !(0.0..=1.0).contains(&cfg.intensity) {
        return Err(ClusterError::Intensity(cfg.intensity));
    }
    model.validate()?;
    let baseline = validator.accuracy(model);
    let mut current = model.clone();
    let mut accuracy = baseline;
    let (mut committed, mut aborted, mut passes) = (0, 0, 0);

    // node locations per feature: (tree, node)
    let mut by_feature: Vec<Vec<(usize, usize)>> = vec![Vec::new(); model.features.len()];
    for (ti, t) in model.trees.iter().enumerate() {
        for (ni, n) in t.nodes.iter().enumerate() {
            by_feature[model.feature_index(&n.feature).expect("validated")].push((ti, ni));
        }
    }

    loop {
        passes += 1;
        let mut locked: Vec<Vec<bool>> = current.trees.iter().map(|t| vec![false; t.nodes.len()]).collect();
        let mut changed = false;
        for (f, value) in distinct_pairs(&current) {
            let span = current.features[f].max - current.features[f].min;
            let members: Vec<(usize, usize)> = by_feature[f]
                .iter()
                .copied()
                .filter(|&(ti, ni)| {
                    !locked[ti][ni] && ((current.trees[ti].nodes[ni].threshold - value).abs() / span) < cfg.intensity
                })
                .collect();
            let values: Vec<f64> = members
                .iter()
                .map(|&(ti, ni)| current.trees[ti].nodes[ni].threshold)
                .collect();
            if values.iter().all(|&v| v == values[0]) {
                continue;
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let mut trial = current.clone();
            for &(ti, ni) in &members {
                trial.trees[ti].nodes[ni].threshold = mean;
            }
            let acc = validator.accuracy(&trial);
            if acc >= accuracy - cfg.tolerance && acc >= baseline - cfg.tolerance {
                current = trial;
                accuracy = acc;
                committed += 1;
                changed = true;
                for &(ti, ni) in &members {
                    locked[ti][ni] = true;
                }
                tracing::debug!(feature = f, mean, size = members.len(), acc, "cluster committed");
            } else {
                aborted += 1;
            }
        }
        if !changed {
            break;
        }
    }

    let report = ClusterReport {
        intensity: cfg.intensity,
        node_count: model.node_count(),
        distinct_nodes_before: distinct_pairs(model).len(),
        distinct_nodes_after: distinct_pairs(&current).len(),
        plan_size_before: plan_from_clusters(model, cfg.bitwidth)?.len(),
        plan_size_after: plan_from_clusters(&current, cfg.bitwidth)?.len(),
        node_clusters: committed,
        path_count: model.leaf_count(),
        path_clusters_before: cluster_paths(&quantize(model, cfg.bitwidth)?).cluster_count,
        path_clusters_after: cluster_paths(&quantize(&current, cfg.bitwidth)?).cluster_count,
        accuracy_before: baseline,
        accuracy_after: accuracy,
        committed,
        aborted,
        passes,
    };
    Ok((current, report))
}

/// Distinct quantized `(feature, threshold)` pairs of a (clustered) model.
pub fn plan_from_clusters(model: &ForestModel, bitwidth: u32) -> Result<NodePlan, ClusterError> {
    Ok(quantize(model, bitwidth)?.node_plan())
}
