//! Floating-point forest documents: the JSON model schema, validation and
//! plaintext evaluation.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ForestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Xgboost,
    Adaboost,
}

/// How leaf values aggregate into a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// One signed total; positive means class 1.
    Signed,
    /// One total per class; the largest wins.
    PerClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(with = "decimal")]
    pub min: f64,
    #[serde(with = "decimal")]
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Child {
    Node(usize),
    Leaf(usize),
}

/// Internal node; inputs with `x > threshold` go right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: String,
    #[serde(with = "decimal")]
    pub threshold: f64,
    pub left: Child,
    pub right: Child,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    #[serde(with = "decimal")]
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_id: Option<usize>,
}

/// A tree rooted at `nodes[0]`, or at `leaves[0]` when it has no nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_id: Option<usize>,
    #[serde(default, with = "decimal::option", skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default)]
    pub nodes: Vec<Node>,
    pub leaves: Vec<Leaf>,
}

impl Tree {
    pub fn root(&self) -> Child {
        if self.nodes.is_empty() {
            Child::Leaf(0)
        } else {
            Child::Node(0)
        }
    }

    pub fn leaf_class(&self, leaf: usize) -> usize {
        self.leaves[leaf].class_id.or(self.class_id).unwrap_or(0)
    }

    /// Follows `go_right` from the root to a leaf index.
    pub fn walk(&self, mut go_right: impl FnMut(&Node) -> bool) -> usize {
        let mut at = self.root();
        loop {
            match at {
                Child::Leaf(l) => return l,
                Child::Node(n) => {
                    let node = &self.nodes[n];
                    at = if go_right(node) { node.right } else { node.left };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, c: Child) -> usize {
            match c {
                Child::Leaf(_) => 0,
                Child::Node(n) => 1 + go(t, t.nodes[n].left).max(go(t, t.nodes[n].right)),
            }
        }
        go(self, self.root())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub model_kind: ModelKind,
    pub num_classes: usize,
    pub features: Vec<FeatureSpec>,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn from_json(s: &str) -> Result<Self, ForestError> {
        let model: Self = serde_json::from_str(s).map_err(|e| ForestError::Schema(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ForestError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ForestError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn node_count(&self) -> usize {
        self.trees.iter().map(|t| t.nodes.len()).sum()
    }

    pub fn leaf_count(&self) -> usize {
        self.trees.iter().map(|t| t.leaves.len()).sum()
    }

    pub fn score_mode(&self) -> ScoreMode {
        let has_class_ids = self
            .trees
            .iter()
            .any(|t| t.class_id.is_some() || t.leaves.iter().any(|l| l.class_id.is_some()));
        match self.model_kind {
            ModelKind::Adaboost => ScoreMode::Signed,
            ModelKind::Xgboost if self.num_classes <= 2 && !has_class_ids => ScoreMode::Signed,
            ModelKind::Xgboost => ScoreMode::PerClass,
        }
    }

    /// Contribution of one leaf before fixed-point scaling: the score times
    /// the tree weight for XGBoost, `±ω` for AdaBoost.
    pub fn leaf_value(&self, tree: usize, leaf: usize) -> f64 {
        let t = &self.trees[tree];
        let score = t.leaves[leaf].score;
        match self.model_kind {
            ModelKind::Xgboost => score * t.weight.unwrap_or(1.0),
            ModelKind::Adaboost => score.signum() * t.weight.unwrap_or(1.0),
        }
    }

    pub fn validate(&self) -> Result<(), ForestError> {
        let schema = |m: String| Err(ForestError::Schema(m));
        if self.num_classes < 2 {
            return schema(format!("num_classes must be at least 2, got {}", self.num_classes));
        }
        if self.model_kind == ModelKind::Adaboost && self.num_classes != 2 {
            return schema("adaboost models must be binary".into());
        }
        if self.features.is_empty() {
            return schema("no features declared".into());
        }
        let mut names = HashSet::new();
        for f in &self.features {
            if !names.insert(f.name.as_str()) {
                return schema(format!("feature `{}` declared twice", f.name));
            }
            if !(f.min.is_finite() && f.max.is_finite() && f.min < f.max) {
                return schema(format!("feature `{}` has an empty or invalid range", f.name));
            }
        }
        if self.trees.is_empty() {
            return schema("model has no trees".into());
        }
        for (ti, t) in self.trees.iter().enumerate() {
            self.validate_tree(ti, t)?;
        }
        Ok(())
    }

    fn validate_tree(&self, ti: usize, t: &Tree) -> Result<(), ForestError> {
        let schema = |m: String| Err(ForestError::Schema(format!("tree {ti}: {m}")));
        if t.leaves.is_empty() {
            return schema("no leaves".into());
        }
        if t.nodes.is_empty() && t.leaves.len() != 1 {
            return schema("a tree without nodes must have exactly one leaf".into());
        }
        if t.leaves.len() != t.nodes.len() + 1 {
            return schema(format!(
                "{} nodes need {} leaves, found {}",
                t.nodes.len(),
                t.nodes.len() + 1,
                t.leaves.len()
            ));
        }
        match (self.model_kind, t.weight) {
            (ModelKind::Adaboost, Some(w)) if w.is_finite() && w > 0.0 => {}
            (ModelKind::Adaboost, _) => return schema("adaboost trees need a positive weight".into()),
            (ModelKind::Xgboost, Some(w)) if !w.is_finite() => return schema("weight is not finite".into()),
            _ => {}
        }
        let check_class = |c: Option<usize>| match c {
            Some(c) if c >= self.num_classes => Err(ForestError::UnknownClass(c)),
            _ => Ok(()),
        };
        check_class(t.class_id)?;
        for l in &t.leaves {
            check_class(l.class_id)?;
            if !l.score.is_finite() {
                return schema("leaf score is not finite".into());
            }
            if self.model_kind == ModelKind::Adaboost && l.score == 0.0 {
                return schema("adaboost leaf scores carry a sign and cannot be 0".into());
            }
        }
        for n in &t.nodes {
            let f = self
                .feature_index(&n.feature)
                .ok_or_else(|| ForestError::UnknownFeature(n.feature.clone()))?;
            if !n.threshold.is_finite() {
                return schema(format!("non-finite threshold on `{}`", self.features[f].name));
            }
        }
        // every node and leaf reachable exactly once from the root
        let mut seen_nodes = vec![false; t.nodes.len()];
        let mut seen_leaves = vec![false; t.leaves.len()];
        let mut stack = vec![t.root()];
        while let Some(c) = stack.pop() {
            let seen = match c {
                Child::Node(i) if i < t.nodes.len() => &mut seen_nodes[i],
                Child::Leaf(i) if i < t.leaves.len() => &mut seen_leaves[i],
                other => return schema(format!("child {other:?} out of range")),
            };
            if std::mem::replace(seen, true) {
                return schema(format!("{c:?} referenced more than once"));
            }
            if let Child::Node(i) = c {
                stack.push(t.nodes[i].right);
                stack.push(t.nodes[i].left);
            }
        }
        if seen_nodes.contains(&false) || seen_leaves.contains(&false) {
            return schema("unreachable nodes or leaves".into());
        }
        Ok(())
    }

    /// Raw aggregate scores: one entry in signed mode, `num_classes` otherwise.
    pub fn predict_scores(&self, row: &[f64]) -> Vec<f64> {
        let mode = self.score_mode();
        let mut scores = vec![0.0; if mode == ScoreMode::Signed { 1 } else { self.num_classes }];
        for (ti, t) in self.trees.iter().enumerate() {
            let leaf = t.walk(|n| {
                let f = self.feature_index(&n.feature).expect("validated");
                row[f] > n.threshold
            });
            let slot = if mode == ScoreMode::Signed {
                0
            } else {
                t.leaf_class(leaf)
            };
            scores[slot] += self.leaf_value(ti, leaf);
        }
        scores
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        decide(&self.predict_scores(row))
    }

    pub fn accuracy(&self, rows: &[Vec<f64>], labels: &[usize]) -> f64 {
        if rows.is_empty() {
            return 0.0;
        }
        let correct = rows.iter().zip(labels).filter(|(r, &l)| self.predict(r) == l).count();
        correct as f64 / rows.len() as f64
    }
}

/// Class decision from aggregate scores: the sign of a single score, or the
/// arg-max with ties going to the lowest index.
pub fn decide<T: PartialOrd + Default + Copy>(scores: &[T]) -> usize {
    if scores.len() == 1 {
        return usize::from(scores[0] > T::default());
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Numbers written as exact decimal strings; JSON numbers are accepted too.
mod decimal {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    struct DecimalVisitor;

    impl<'de> Visitor<'de> for DecimalVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or a decimal string")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            let x: f64 = v.trim().parse().map_err(E::custom)?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(E::custom(format!("non-finite number `{v}`")))
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(DecimalVisitor)
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(x) => super::serialize(x, s),
                None => s.serialize_none(),
            }
        }

        #[derive(Deserialize)]
        struct Wrapped(#[serde(with = "super")] f64);

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Ok(Option::<Wrapped>::deserialize(d)?.map(|w| w.0))
        }
    }
}
