//! The learned artifact: an immutable tree of split rules with linear SVM
//! leaf models, plus routing, prediction, leaf counting, and JSON
//! persistence.
//!
//! Routing follows the training-side convention: at a splitting node a
//! point goes left iff its (possibly weighted) feature value is strictly
//! below the threshold; non-splitting branch nodes pass everything to the
//! right child.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnSpec, PreprocessParams, Task};
use crate::error::{Error, Result};
use crate::formulation::{FeatureRoles, FormulationConstants};
use crate::topology::TreeTopology;

pub const MODEL_SCHEMA: &str = "optree-model/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitRule {
    Univariate {
        feature: usize,
        threshold: f64,
    },
    Multivariate {
        /// Sparse (feature index, weight) pairs with `sum |w| <= 1`.
        weights: Vec<(usize, f64)>,
        threshold: f64,
    },
    PassRight,
}

/// Linear model(s) of one leaf: one weight vector and intercept per class
/// slot (a single slot for regression and binary classification, K slots
/// for multiclass). Weights align with the leaf-model feature list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafModel {
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
}

impl LeafModel {
    pub fn zero(slots: usize, features: usize) -> Self {
        LeafModel {
            weights: vec![vec![0.0; features]; slots],
            intercepts: vec![0.0; slots],
        }
    }
}

/// Solver state recorded with the model: consumers of a tree trained
/// under a time limit deserve to know the incumbent's gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub status: String,
    pub gap: f64,
    pub objective: f64,
    pub nodes: u64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Value(f64),
    Class(usize),
}

impl Prediction {
    pub fn value(&self) -> f64 {
        match self {
            Prediction::Value(v) => *v,
            Prediction::Class(k) => *k as f64,
        }
    }

    pub fn class(&self) -> usize {
        match self {
            Prediction::Class(k) => *k,
            Prediction::Value(_) => panic!("regression prediction has no class"),
        }
    }
}

/// Prediction from a raw (pre-encoding) row, with a flag for categorical
/// tokens unseen at training time.
#[derive(Debug, Clone)]
pub struct RawPrediction {
    pub prediction: Prediction,
    pub unknown_category: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelTree {
    pub topology: TreeTopology,
    /// One rule per branch node, heap order (empty for depth 0).
    pub splits: Vec<SplitRule>,
    /// One model per leaf, heap order.
    pub leaves: Vec<LeafModel>,
    pub task: Task,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub roles: FeatureRoles,
    pub constants: FormulationConstants,
    pub preprocess: PreprocessParams,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema: String,
    model: ModelTree,
}

impl ModelTree {
    /// Leaf position (0-based) of a heap leaf id.
    pub fn leaf_pos(&self, leaf_id: usize) -> usize {
        leaf_id - self.topology.leaves().start
    }

    fn split_at(&self, node: usize) -> &SplitRule {
        &self.splits[node - 1]
    }

    /// Routes a standardized feature vector to a leaf id.
    pub fn route(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.feature_names.len() {
            return Err(Error::dimension(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.feature_names.len()
            )));
        }
        let mut node = self.topology.root();
        while !self.topology.is_leaf(node) {
            let go_left = match self.split_at(node) {
                SplitRule::Univariate { feature, threshold } => x[*feature] < *threshold,
                SplitRule::Multivariate { weights, threshold } => {
                    let dot: f64 = weights.iter().map(|&(f, w)| w * x[f]).sum();
                    dot < *threshold
                }
                SplitRule::PassRight => false,
            };
            node = if go_left { 2 * node } else { 2 * node + 1 };
        }
        Ok(node)
    }

    /// Per-slot linear scores of the leaf model at `leaf_id`.
    pub fn leaf_scores(&self, leaf_id: usize, x: &[f64]) -> Vec<f64> {
        let model = &self.leaves[self.leaf_pos(leaf_id)];
        model
            .weights
            .iter()
            .zip(&model.intercepts)
            .map(|(w, d)| {
                w.iter()
                    .zip(&self.roles.leaf)
                    .map(|(wj, &f)| wj * x[f])
                    .sum::<f64>()
                    + d
            })
            .collect()
    }

    /// Prediction for an already encoded and standardized feature vector.
    pub fn predict_encoded(&self, x: &[f64]) -> Result<Prediction> {
        let leaf = self.route(x)?;
        let scores = self.leaf_scores(leaf, x);
        Ok(match self.task {
            Task::Regression => Prediction::Value(scores[0]),
            // Score exactly zero counts as the positive class.
            Task::Binary => Prediction::Class(if scores[0] >= 0.0 { 1 } else { 0 }),
            Task::Multiclass => {
                let mut best = 0;
                for (k, s) in scores.iter().enumerate() {
                    if *s > scores[best] {
                        best = k; // ties keep the lowest class index
                    }
                }
                Prediction::Class(best)
            }
        })
    }

    /// Encodes a raw row (values aligned with the stored source-column
    /// schema), standardizes it, and predicts. Unknown categorical tokens
    /// produce an all-zero indicator group and set the flag.
    pub fn predict_raw(&self, row: &[&str]) -> Result<RawPrediction> {
        let (x, unknown) = self.encode_raw(row)?;
        Ok(RawPrediction {
            prediction: self.predict_encoded(&x)?,
            unknown_category: unknown,
        })
    }

    fn encode_raw(&self, row: &[&str]) -> Result<(Vec<f64>, bool)> {
        let cols = &self.preprocess.columns;
        if row.len() != cols.len() {
            return Err(Error::dimension(format!(
                "raw row has {} values, schema expects {}",
                row.len(),
                cols.len()
            )));
        }
        let mut x = Vec::with_capacity(self.feature_names.len());
        let mut unknown = false;
        for (value, col) in row.iter().zip(cols) {
            match col {
                ColumnSpec::Numeric { name } => {
                    let v: f64 = value.trim().parse().map_err(|_| {
                        Error::data(format!("value '{value}' for column '{name}' is not numeric"))
                    })?;
                    x.push(v);
                }
                ColumnSpec::Categorical { categories, .. } => {
                    let hit = categories.iter().position(|c| c == value.trim());
                    if hit.is_none() {
                        unknown = true;
                    }
                    for (ci, _) in categories.iter().enumerate() {
                        x.push(if Some(ci) == hit { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        let std = &self.preprocess.standardization;
        for j in 0..x.len() {
            x[j] = (x[j] - std.means[j]) / std.stds[j];
        }
        Ok((x, unknown))
    }

    /// Original label token for a classification prediction.
    pub fn class_label(&self, class: usize) -> &str {
        &self.class_names[class]
    }

    /// Number of branch nodes that actually split.
    pub fn active_splits(&self) -> usize {
        self.splits
            .iter()
            .filter(|s| !matches!(s, SplitRule::PassRight))
            .count()
    }

    /// Leaves reachable by some input region; pass-right chains collapse,
    /// so this equals the number of active splits plus one.
    pub fn count_leaves(&self) -> usize {
        self.topology
            .reachable_leaves(|n| !matches!(self.split_at(n), SplitRule::PassRight))
            .len()
    }

    /// Training points whose split-feature value falls inside a split's
    /// `[b - mu_f, b)` band, where training constraints leave the routing
    /// side formally ambiguous.
    pub fn ambiguity_band_count(&self, features: &[Vec<f64>]) -> usize {
        let mut count = 0;
        for x in features {
            let mut node = self.topology.root();
            while !self.topology.is_leaf(node) {
                let (value, threshold, band) = match self.split_at(node) {
                    SplitRule::Univariate { feature, threshold } => {
                        (x[*feature], *threshold, self.constants.mu[*feature])
                    }
                    SplitRule::Multivariate { weights, threshold } => {
                        let dot: f64 = weights.iter().map(|&(f, w)| w * x[f]).sum();
                        (dot, *threshold, self.constants.mu_multivariate())
                    }
                    SplitRule::PassRight => {
                        node = 2 * node + 1;
                        continue;
                    }
                };
                if value >= threshold - band && value < threshold {
                    count += 1;
                    break;
                }
                node = if value < threshold { 2 * node } else { 2 * node + 1 };
            }
        }
        count
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ModelFile {
            schema: MODEL_SCHEMA.to_string(),
            model: self.clone(),
        };
        let json = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::ModelFile(format!("serialize: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ModelTree> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text)
            .map_err(|e| Error::ModelFile(format!("parse: {e}")))?;
        if file.schema != MODEL_SCHEMA {
            return Err(Error::ModelVersion {
                found: file.schema,
                expected: MODEL_SCHEMA.to_string(),
            });
        }
        file.model.validate()?;
        Ok(file.model)
    }

    pub fn validate(&self) -> Result<()> {
        let topo = &self.topology;
        if self.splits.len() != topo.branch_count() {
            return Err(Error::ModelFile(format!(
                "{} split rules for {} branch nodes",
                self.splits.len(),
                topo.branch_count()
            )));
        }
        if self.leaves.len() != topo.leaf_count() {
            return Err(Error::ModelFile(format!(
                "{} leaf models for {} leaves",
                self.leaves.len(),
                topo.leaf_count()
            )));
        }
        let nf = self.feature_names.len();
        for rule in &self.splits {
            match rule {
                SplitRule::Univariate { feature, .. } => {
                    if !self.roles.split.contains(feature) {
                        return Err(Error::ModelFile(format!(
                            "univariate split on feature {feature} outside the split-eligible set"
                        )));
                    }
                }
                SplitRule::Multivariate { weights, .. } => {
                    let total: f64 = weights.iter().map(|(_, w)| w.abs()).sum();
                    if total > 1.0 + 1e-6 {
                        return Err(Error::ModelFile(format!(
                            "multivariate split weights sum to {total} > 1"
                        )));
                    }
                    if weights.iter().any(|&(f, _)| f >= nf) {
                        return Err(Error::ModelFile("split weight on unknown feature".into()));
                    }
                }
                SplitRule::PassRight => {}
            }
        }
        let slots = match self.task {
            Task::Regression | Task::Binary => 1,
            Task::Multiclass => self.class_names.len(),
        };
        for leaf in &self.leaves {
            if leaf.weights.len() != slots || leaf.intercepts.len() != slots {
                return Err(Error::ModelFile(format!(
                    "leaf has {} model slots, task needs {slots}",
                    leaf.weights.len()
                )));
            }
            for w in &leaf.weights {
                if w.len() != self.roles.leaf.len() {
                    return Err(Error::ModelFile(format!(
                        "leaf weight vector has {} entries for {} leaf-model features",
                        w.len(),
                        self.roles.leaf.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Human-readable structure dump.
    pub fn describe(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "model tree: depth {}, {} active splits, {} reachable leaves [{}]",
            self.topology.depth(),
            self.active_splits(),
            self.count_leaves(),
            self.provenance.status
        );
        for n in self.topology.branch_nodes() {
            match self.split_at(n) {
                SplitRule::Univariate { feature, threshold } => {
                    let _ = writeln!(
                        out,
                        "  node {n}: {} < {threshold:.6} ? left : right",
                        self.feature_names[*feature]
                    );
                }
                SplitRule::Multivariate { weights, threshold } => {
                    let terms: Vec<String> = weights
                        .iter()
                        .map(|&(f, w)| format!("{w:+.4}*{}", self.feature_names[f]))
                        .collect();
                    let _ = writeln!(out, "  node {n}: {} < {threshold:.6} ?", terms.join(" "));
                }
                SplitRule::PassRight => {
                    let _ = writeln!(out, "  node {n}: pass right");
                }
            }
        }
        out
    }
}
