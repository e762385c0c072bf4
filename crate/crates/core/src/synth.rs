//! Generators for test and benchmark inputs: random forests of a given
//! shape, labelled synthetic datasets, and a small gradient-boosting trainer
//! that produces realistic models (many trees re-using nearby thresholds).

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::Dataset;
use crate::forest::{Child, FeatureSpec, ForestModel, Leaf, ModelKind, Node, Tree};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestShape {
    pub trees: usize,
    pub max_depth: usize,
    pub features: usize,
    pub classes: usize,
    pub kind: ModelKind,
    /// Chance that a node above the depth limit splits; the root always does.
    pub split_prob: f64,
}

impl Default for ForestShape {
    fn default() -> Self {
        Self {
            trees: 10,
            max_depth: 4,
            features: 4,
            classes: 2,
            kind: ModelKind::Xgboost,
            split_prob: 0.8,
        }
    }
}

fn round_to(v: f64, places: i32) -> f64 {
    let s = 10f64.powi(places);
    (v * s).round() / s
}

/// Random forest with the given shape. Thresholds are uniform over each
/// feature's range. XGBoost models with more than two classes assign trees to
/// classes round-robin; AdaBoost models are binary with `±1` leaves and
/// positive tree weights.
pub fn random_forest<R: Rng>(shape: &ForestShape, rng: &mut R) -> ForestModel {
    let classes = match shape.kind {
        ModelKind::Adaboost => 2,
        ModelKind::Xgboost => shape.classes.max(2),
    };
    let features: Vec<FeatureSpec> = (0..shape.features.max(1))
        .map(|i| {
            let min = round_to(rng.gen_range(-100.0..0.0), 2);
            FeatureSpec {
                name: format!("f{i}"),
                min,
                max: round_to(min + rng.gen_range(10.0..200.0), 2),
            }
        })
        .collect();
    let trees = (0..shape.trees)
        .map(|i| {
            let mut tree = Tree {
                class_id: (shape.kind == ModelKind::Xgboost && classes > 2).then_some(i % classes),
                weight: (shape.kind == ModelKind::Adaboost).then(|| round_to(rng.gen_range(0.1..2.0), 3)),
                nodes: Vec::new(),
                leaves: Vec::new(),
            };
            grow_random(&mut tree, 0, shape, &features, rng);
            tree
        })
        .collect();
    ForestModel {
        model_kind: shape.kind,
        num_classes: classes,
        features,
        trees,
    }
}

fn grow_random<R: Rng>(
    tree: &mut Tree,
    depth: usize,
    shape: &ForestShape,
    features: &[FeatureSpec],
    rng: &mut R,
) -> Child {
    let split = depth < shape.max_depth && (depth == 0 || rng.gen_bool(shape.split_prob));
    if !split {
        let score = match shape.kind {
            ModelKind::Adaboost => *[-1.0, 1.0].choose(rng).expect("nonempty"),
            ModelKind::Xgboost => round_to(rng.gen_range(-1.0..1.0), 4),
        };
        tree.leaves.push(Leaf { score, class_id: None });
        return Child::Leaf(tree.leaves.len() - 1);
    }
    let f = &features[rng.gen_range(0..features.len())];
    let at = tree.nodes.len();
    tree.nodes.push(Node {
        feature: f.name.clone(),
        threshold: round_to(rng.gen_range(f.min..f.max), 3).clamp(f.min, f.max),
        left: Child::Leaf(0),
        right: Child::Leaf(0),
    });
    let left = grow_random(tree, depth + 1, shape, features, rng);
    let right = grow_random(tree, depth + 1, shape, features, rng);
    tree.nodes[at].left = left;
    tree.nodes[at].right = right;
    Child::Node(at)
}

/// Uniform query row inside each feature's range.
pub fn random_row<R: Rng>(model: &ForestModel, rng: &mut R) -> Vec<f64> {
    model.features.iter().map(|f| rng.gen_range(f.min..=f.max)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetShape {
    pub rows: usize,
    pub features: usize,
    pub classes: usize,
    /// Probability that a label is replaced by a random class.
    pub noise: f64,
}

/// Features uniform on `[0, 100]`; the label is the nearest of `classes`
/// random centroids, measured over the first three features, with label
/// noise.
pub fn synthetic_dataset<R: Rng>(shape: &DatasetShape, rng: &mut R) -> Dataset {
    let classes = shape.classes.max(2);
    let active = shape.features.clamp(1, 3);
    let centroids: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..active).map(|_| rng.gen_range(0.0..100.0)).collect())
        .collect();
    let mut rows = Vec::with_capacity(shape.rows);
    let mut labels = Vec::with_capacity(shape.rows);
    for _ in 0..shape.rows {
        let row: Vec<f64> = (0..shape.features.max(1))
            .map(|_| round_to(rng.gen_range(0.0..100.0), 3))
            .collect();
        let dist = |c: &Vec<f64>| -> f64 { c.iter().zip(&row).map(|(a, b)| (a - b) * (a - b)).sum() };
        let mut label = (0..classes)
            .min_by(|&a, &b| dist(&centroids[a]).total_cmp(&dist(&centroids[b])))
            .expect("classes >= 2");
        if rng.gen_bool(shape.noise) {
            label = rng.gen_range(0..classes);
        }
        rows.push(row);
        labels.push(label);
    }
    Dataset {
        feature_names: (0..shape.features.max(1)).map(|i| format!("x{i}")).collect(),
        rows,
        labels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostParams {
    /// Boosting rounds; multi-class models grow one tree per class per round.
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    /// Fraction of rows each tree is fit on.
    pub subsample: f64,
    /// Candidate split points per feature per tree.
    pub bins: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            rounds: 100,
            max_depth: 3,
            learning_rate: 0.3,
            lambda: 1.0,
            subsample: 0.8,
            bins: 16,
        }
    }
}

/// Second-order gradient boosting with logistic loss for two classes and
/// softmax loss otherwise. Split candidates are midpoints at quantiles of
/// each tree's row sample, so thresholds recur approximately across trees.
pub fn train_boosted<R: Rng>(data: &Dataset, params: &BoostParams, rng: &mut R) -> ForestModel {
    let classes = data.labels.iter().max().map_or(2, |&m| m + 1).max(2);
    let width = data.feature_names.len();
    let features: Vec<FeatureSpec> = (0..width)
        .map(|j| {
            let (lo, hi) = data
                .rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[j]), hi.max(r[j]))
                });
            let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
            FeatureSpec {
                name: data.feature_names[j].clone(),
                min: lo,
                max: if hi > lo { hi } else { lo + 1.0 },
            }
        })
        .collect();
    let outputs = if classes == 2 { 1 } else { classes };
    let mut margin = vec![vec![0.0; outputs]; data.len()];
    let mut trees = Vec::new();
    let all: Vec<usize> = (0..data.len()).collect();
    for _ in 0..params.rounds {
        let probs: Vec<Vec<f64>> = margin.iter().map(|m| probabilities(m)).collect();
        for k in 0..outputs {
            let (grad, hess): (Vec<f64>, Vec<f64>) = probs
                .iter()
                .zip(&data.labels)
                .map(|(p, &y)| {
                    let (pk, target) = if outputs == 1 {
                        (p[0], f64::from(u8::from(y == 1)))
                    } else {
                        (p[k], f64::from(u8::from(y == k)))
                    };
                    (pk - target, (pk * (1.0 - pk)).max(1e-6))
                })
                .unzip();
            let take = ((data.len() as f64 * params.subsample).ceil() as usize).clamp(1, data.len().max(1));
            let sample: Vec<usize> = all.choose_multiple(rng, take).copied().collect();
            let fit = Fit {
                data,
                grad: &grad,
                hess: &hess,
                params,
            };
            let mut tree = Tree {
                class_id: (outputs > 1).then_some(k),
                weight: None,
                nodes: Vec::new(),
                leaves: Vec::new(),
            };
            if data.is_empty() {
                tree.leaves.push(Leaf {
                    score: 0.0,
                    class_id: None,
                });
            } else {
                fit.grow(&mut tree, &sample, 0);
            }
            for (i, row) in data.rows.iter().enumerate() {
                let leaf = tree.walk(|n| {
                    row[data
                        .feature_names
                        .iter()
                        .position(|x| *x == n.feature)
                        .expect("own feature")]
                        > n.threshold
                });
                margin[i][k] += tree.leaves[leaf].score;
            }
            trees.push(tree);
        }
    }
    ForestModel {
        model_kind: ModelKind::Xgboost,
        num_classes: classes,
        features,
        trees,
    }
}

fn probabilities(margin: &[f64]) -> Vec<f64> {
    if margin.len() == 1 {
        return vec![1.0 / (1.0 + (-margin[0]).exp())];
    }
    let top = margin.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = margin.iter().map(|m| (m - top).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

struct Fit<'a> {
    data: &'a Dataset,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a BoostParams,
}

impl Fit<'_> {
    fn sums(&self, rows: &[usize]) -> (f64, f64) {
        rows.iter()
            .fold((0.0, 0.0), |(g, h), &i| (g + self.grad[i], h + self.hess[i]))
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.lambda)
    }

    /// Best `(feature, threshold)` by second-order gain, if any split helps.
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64)> {
        let (g, h) = self.sums(rows);
        let parent = self.score(g, h);
        let mut best: Option<(f64, usize, f64)> = None;
        for j in 0..self.data.feature_names.len() {
            let mut order: Vec<usize> = rows.to_vec();
            order.sort_by(|&a, &b| self.data.rows[a][j].total_cmp(&self.data.rows[b][j]));
            let values: Vec<f64> = order.iter().map(|&i| self.data.rows[i][j]).collect();
            let mut prefix = Vec::with_capacity(order.len() + 1);
            prefix.push((0.0, 0.0));
            for &i in &order {
                let (pg, ph) = *prefix.last().expect("seeded");
                prefix.push((pg + self.grad[i], ph + self.hess[i]));
            }
            let bins = self.params.bins.max(1);
            for b in 1..=bins {
                let mut cut = b * values.len() / (bins + 1);
                while cut + 1 < values.len() && values[cut + 1] == values[cut] {
                    cut += 1;
                }
                if cut + 1 >= values.len() {
                    continue;
                }
                let (gl, hl) = prefix[cut + 1];
                let gain = self.score(gl, hl) + self.score(g - gl, h - hl) - parent;
                if gain > 1e-9 && best.is_none_or(|(bg, _, _)| gain > bg) {
                    best = Some((gain, j, (values[cut] + values[cut + 1]) / 2.0));
                }
            }
        }
        best.map(|(_, j, th)| (j, th))
    }

    fn grow(&self, tree: &mut Tree, rows: &[usize], depth: usize) -> Child {
        let split = if depth < self.params.max_depth && rows.len() >= 2 {
            self.best_split(rows)
        } else {
            None
        };
        let Some((j, threshold)) = split else {
            let (g, h) = self.sums(rows);
            let score = -g / (h + self.params.lambda) * self.params.learning_rate;
            tree.leaves.push(Leaf { score, class_id: None });
            return Child::Leaf(tree.leaves.len() - 1);
        };
        let at = tree.nodes.len();
        tree.nodes.push(Node {
            feature: self.data.feature_names[j].clone(),
            threshold,
            left: Child::Leaf(0),
            right: Child::Leaf(0),
        });
        let (right, left): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.data.rows[i][j] > threshold);
        let l = self.grow(tree, &left, depth + 1);
        let r = self.grow(tree, &right, depth + 1);
        tree.nodes[at].left = l;
        tree.nodes[at].right = r;
        Child::Node(at)
    }
}
