//! Newton boosting: training and applying an additive ensemble of trees.
//!
//! Each round evaluates the loss gradient and hessian at the current raw
//! scores, grows one tree against the second-order expansion of the loss,
//! and adds the tree's (already shrunk) leaf weights to the raw scores.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{check_finite, Dataset};
use crate::error::{Error, Result};
use crate::loss::{batch_grad_hess, sigmoid_clamped, Label, LossParams};
use crate::tree::{grow_tree, TreeNode, TreeParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub num_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub reg_lambda: f64,
    pub min_split_gain: f64,
    pub min_child_hessian: f64,
    /// Initial raw logit; `0.0` corresponds to probability 0.5.
    pub base_score: f64,
    pub loss: LossParams,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            num_rounds: 10,
            learning_rate: 0.3,
            max_depth: 6,
            reg_lambda: 1.0,
            min_split_gain: 0.0,
            min_child_hessian: 1.0,
            base_score: 0.0,
            loss: LossParams::Plain,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_loss(mut self, loss: LossParams) -> Self {
        self.loss = loss;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.num_rounds == 0 {
            return bad("num_rounds must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!(
                "learning_rate must be in (0, 1], got {}",
                self.learning_rate
            ));
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1".into());
        }
        for (name, v) in [
            ("reg_lambda", self.reg_lambda),
            ("min_split_gain", self.min_split_gain),
            ("min_child_hessian", self.min_child_hessian),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !self.base_score.is_finite() {
            return bad(format!(
                "base_score must be finite, got {}",
                self.base_score
            ));
        }
        self.loss.validate()
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            reg_lambda: self.reg_lambda,
            min_split_gain: self.min_split_gain,
            min_child_hessian: self.min_child_hessian,
            learning_rate: self.learning_rate,
        }
    }
}

/// A trained ensemble. Leaf weights are stored after shrinkage, so the raw
/// score of a row is `base_score` plus the sum of its routed leaf weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostedModel {
    pub trees: Vec<TreeNode>,
    pub base_score: f64,
    pub loss_params: LossParams,
    pub feature_count: usize,
}

/// Fits `config.num_rounds` trees to `data`.
pub fn train(data: &Dataset, config: &TrainConfig) -> Result<BoostedModel> {
    config.validate()?;
    let features = data.features();
    let labels = data.labels();
    let tree_params = config.tree_params();

    let mut raw = vec![config.base_score; data.n_instances()];
    let mut trees = Vec::with_capacity(config.num_rounds);
    for _ in 0..config.num_rounds {
        let grad_hess = batch_grad_hess(labels, &raw, &config.loss)?;
        let tree = grow_tree(features, &grad_hess, &tree_params);
        for (i, score) in raw.iter_mut().enumerate() {
            *score += tree.predict_row(features.row(i));
        }
        trees.push(tree);
    }
    Ok(BoostedModel {
        trees,
        base_score: config.base_score,
        loss_params: config.loss,
        feature_count: data.n_features(),
    })
}

impl BoostedModel {
    /// A model with no trees; every prediction is `base_score`.
    pub fn constant(base_score: f64, feature_count: usize, loss_params: LossParams) -> Self {
        BoostedModel {
            trees: Vec::new(),
            base_score,
            loss_params,
            feature_count,
        }
    }

    fn check_columns(&self, features: ArrayView2<'_, f64>) -> Result<()> {
        if features.ncols() != self.feature_count {
            return Err(Error::Dimension {
                expected: self.feature_count,
                got: features.ncols(),
            });
        }
        check_finite(features)
    }

    /// Raw logits, one per row.
    pub fn predict_raw(&self, features: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.check_columns(features)?;
        Ok((0..features.nrows())
            .into_par_iter()
            .map(|i| {
                let row = features.row(i);
                self.trees
                    .iter()
                    .fold(self.base_score, |acc, tree| acc + tree.predict_row(row))
            })
            .collect())
    }

    /// Positive-class probabilities.
    pub fn predict_sigmoid(&self, features: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        Ok(self
            .predict_raw(features)?
            .into_iter()
            .map(sigmoid_clamped)
            .collect())
    }

    /// Hard labels: positive iff the raw score is strictly above zero.
    pub fn predict_determine(&self, features: ArrayView2<'_, f64>) -> Result<Vec<Label>> {
        Ok(self
            .predict_raw(features)?
            .into_iter()
            .map(determine)
            .collect())
    }

    /// One-hot rows `[1, 0]` for label 0 and `[0, 1]` for label 1.
    pub fn predict_two_classes(&self, features: ArrayView2<'_, f64>) -> Result<Array2<u8>> {
        Ok(one_hot(&self.predict_determine(features)?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFileRef::from(self))
            .expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::ModelParse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        file.into_model()
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// The hard-label rule shared by prediction and evaluation.
#[inline]
pub fn determine(raw: f64) -> Label {
    Label::from(raw > 0.0)
}

pub fn one_hot(labels: &[Label]) -> Array2<u8> {
    let mut out = Array2::zeros((labels.len(), 2));
    for (i, y) in labels.iter().enumerate() {
        out[[i, usize::from(y.is_positive())]] = 1;
    }
    out
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    format_version: u32,
    base_score: f64,
    learning_rate_folded: bool,
    loss_params: LossParams,
    feature_count: usize,
    trees: &'a [TreeNode],
}

impl<'a> From<&'a BoostedModel> for ModelFileRef<'a> {
    fn from(m: &'a BoostedModel) -> Self {
        ModelFileRef {
            format_version: MODEL_FORMAT_VERSION,
            base_score: m.base_score,
            learning_rate_folded: true,
            loss_params: m.loss_params,
            feature_count: m.feature_count,
            trees: &m.trees,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    base_score: f64,
    learning_rate_folded: bool,
    loss_params: LossParams,
    feature_count: usize,
    trees: Vec<TreeNode>,
}

impl ModelFile {
    fn into_model(self) -> Result<BoostedModel> {
        let invalid = |message: String| Error::ModelParse {
            line: 0,
            column: 0,
            message,
        };
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(invalid(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        if !self.learning_rate_folded {
            return Err(invalid("learning_rate_folded must be true".into()));
        }
        self.loss_params
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        for (t, tree) in self.trees.iter().enumerate() {
            check_node(tree, self.feature_count).map_err(|m| invalid(format!("tree {t}: {m}")))?;
        }
        Ok(BoostedModel {
            trees: self.trees,
            base_score: self.base_score,
            loss_params: self.loss_params,
            feature_count: self.feature_count,
        })
    }
}

fn check_node(node: &TreeNode, feature_count: usize) -> std::result::Result<(), String> {
    match node {
        TreeNode::Leaf { leaf_weight } if leaf_weight.is_finite() => Ok(()),
        TreeNode::Leaf { leaf_weight } => Err(format!("non-finite leaf weight {leaf_weight}")),
        TreeNode::Split {
            feature_index,
            threshold,
            left,
            right,
        } => {
            if *feature_index >= feature_count {
                return Err(format!(
                    "feature_index {feature_index} out of range for {feature_count} features"
                ));
            }
            if !threshold.is_finite() {
                return Err(format!("non-finite threshold {threshold}"));
            }
            check_node(left, feature_count)?;
            check_node(right, feature_count)
        }
    }
}
