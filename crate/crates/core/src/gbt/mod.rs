//! Second-order gradient-boosted decision trees.
//!
//! Each boosting round fits a regression tree to the first and second
//! derivatives of the loss at the current margin. Splits maximise
//!
//! ```text
//! gain = ½ [G_L²/(H_L+λ) + G_R²/(H_R+λ) − (G_L+G_R)²/(H_L+H_R+λ)] − γ
//! ```
//!
//! and leaves take the weight `−G/(H+λ)`, shrunk by the learning rate before
//! being stored. Missing values (NaN) follow a per-node default direction
//! that is learned during split search.

mod matrix;
pub mod persist;
mod split;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use matrix::FeatureMatrix;
pub use split::{best_split, leaf_weight, split_gain, SplitCandidate};
pub use train::{fit, fit_prepared, fit_with_trace, TrainingData};

/// Loss function of a boosted model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Binary cross-entropy on `sigmoid(margin)`; labels in {0, 1}.
    Logistic,
    /// `(y − ŷ)²` with `ŷ` the raw margin.
    SquaredError,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Logistic => "logistic",
            LossKind::SquaredError => "squared_error",
        }
    }

    pub fn check_label(self, y: f64) -> Result<()> {
        let ok = match self {
            LossKind::Logistic => y == 0.0 || y == 1.0,
            LossKind::SquaredError => y.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidLabel { label: y, loss: self.name() })
        }
    }

    /// Loss value at a margin. The logistic form is evaluated with
    /// softplus so it stays accurate for large |margin|.
    pub fn loss(self, y: f64, margin: f64) -> f64 {
        match self {
            LossKind::Logistic => y * softplus(-margin) + (1.0 - y) * softplus(margin),
            LossKind::SquaredError => (y - margin) * (y - margin),
        }
    }
}

/// Gradient and hessian of the loss with respect to the margin.
pub fn grad_hess(loss: LossKind, y: f64, margin: f64) -> Result<(f64, f64)> {
    if !margin.is_finite() {
        return Err(Error::invalid(format!("non-finite margin {margin}")));
    }
    loss.check_label(y)?;
    Ok(match loss {
        LossKind::Logistic => {
            let p = sigmoid(margin);
            (p - y, p * (1.0 - p))
        }
        LossKind::SquaredError => (2.0 * (margin - y), 2.0),
    })
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Boosting hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostParams {
    /// Number of boosting rounds.
    pub n_estimators: usize,
    /// L2 penalty on leaf weights.
    pub reg_lambda: f64,
    /// Minimum gain required to keep a split.
    pub min_split_loss: f64,
    /// Fraction of rows drawn (without replacement) for each tree.
    pub subsample: f64,
    /// Shrinkage applied to every leaf weight.
    pub learning_rate: f64,
    pub max_depth: usize,
    /// Minimum hessian sum in each child of a split.
    pub min_child_weight: f64,
    pub rng_seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            reg_lambda: 1.0,
            min_split_loss: 0.0,
            subsample: 1.0,
            learning_rate: 0.15,
            max_depth: 6,
            min_child_weight: 1.0,
            rng_seed: 0,
        }
    }
}

pub const MAX_DEPTH_LIMIT: usize = 16;

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("boost params: {what}")));
        if self.n_estimators == 0 {
            return bad("n_estimators must be positive");
        }
        if !(self.reg_lambda >= 0.0 && self.reg_lambda.is_finite()) {
            return bad("reg_lambda must be a non-negative real");
        }
        if !(self.min_split_loss >= 0.0 && self.min_split_loss.is_finite()) {
            return bad("min_split_loss must be a non-negative real");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if self.max_depth == 0 || self.max_depth > MAX_DEPTH_LIMIT {
            return bad("max_depth must lie in 1..=16");
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return bad("min_child_weight must be a non-negative real");
        }
        Ok(())
    }
}

/// One node of a regression tree, stored in a flat arena.
///
/// Rows with `x[feature] < threshold` go left; NaN follows `default_left`.
#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        default_left: bool,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

/// A regression tree; node 0 is the root and children always have larger
/// indices than their parent.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(weight: f64) -> Self {
        Tree { nodes: vec![TreeNode::Leaf { weight }] }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split { feature, threshold, default_left, left, right } => {
                    idx = if goes_left(x[*feature], *threshold, *default_left) {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }

    /// Features referenced by any split of this tree.
    pub fn used_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Split { feature, .. } => Some(*feature),
            TreeNode::Leaf { .. } => None,
        })
    }

    pub(crate) fn validate(&self, n_features: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::invalid("tree without nodes"));
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                TreeNode::Leaf { weight } => {
                    if !weight.is_finite() {
                        return Err(Error::invalid(format!("non-finite leaf weight at node {i}")));
                    }
                }
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    if *feature >= n_features {
                        return Err(Error::invalid(format!(
                            "node {i} splits on feature {feature} but the model has {n_features}"
                        )));
                    }
                    if threshold.is_nan() {
                        return Err(Error::invalid(format!("NaN threshold at node {i}")));
                    }
                    for &c in [left, right] {
                        if c <= i || c >= self.nodes.len() {
                            return Err(Error::invalid(format!("node {i} has invalid child {c}")));
                        }
                        parents[c] += 1;
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err(Error::invalid("tree nodes do not form a single binary tree"));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn goes_left(value: f64, threshold: f64, default_left: bool) -> bool {
    if value.is_nan() {
        default_left
    } else {
        value < threshold
    }
}

/// An additive tree model. Learning-rate shrinkage is already folded into
/// the leaf weights, so `margin = base_score + Σ tree(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeEnsemble {
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub loss: LossKind,
    pub feature_names: Vec<String>,
}

impl TreeEnsemble {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn predict_margin(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_features());
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        match self.loss {
            LossKind::Logistic => Ok(sigmoid(self.predict_margin(x))),
            LossKind::SquaredError => Err(Error::Usage(
                "predict_proba is only defined for logistic ensembles".into(),
            )),
        }
    }

    pub fn check_row(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::invalid(format!(
                "expected {} features, got {}",
                self.n_features(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Margins for every row of a matrix.
    pub fn predict_matrix(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows()).map(|i| self.predict_margin(x.row(i))).collect()
    }

    /// Prediction on the response scale: probability for logistic models,
    /// the margin itself for squared error.
    pub fn predict_response(&self, x: &[f64]) -> f64 {
        match self.loss {
            LossKind::Logistic => sigmoid(self.predict_margin(x)),
            LossKind::SquaredError => self.predict_margin(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grad_hess_examples() {
        let (g, h) = grad_hess(LossKind::Logistic, 1.0, 0.0).unwrap();
        assert_eq!((g, h), (-0.5, 0.25));
        let (g, h) = grad_hess(LossKind::SquaredError, 3.0, 3.0).unwrap();
        assert_eq!((g, h), (0.0, 2.0));
        let (g, h) = grad_hess(LossKind::Logistic, 0.0, 2.0).unwrap();
        assert!((g - 0.880797).abs() < 1e-6);
        assert!((h - 0.104994).abs() < 1e-6);
    }

    #[test]
    fn grad_hess_rejects_bad_labels() {
        assert!(matches!(
            grad_hess(LossKind::Logistic, 0.5, 0.0),
            Err(Error::InvalidLabel { .. })
        ));
        assert!(grad_hess(LossKind::SquaredError, f64::NAN, 0.0).is_err());
        assert!(grad_hess(LossKind::SquaredError, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn sigmoid_is_symmetric_and_saturates_cleanly() {
        assert_eq!(sigmoid(0.0), 0.5);
        for x in [0.3, 2.0, 15.0, 40.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
        assert!(sigmoid(-800.0) >= 0.0);
    }

    #[test]
    fn empty_ensemble_predicts_base_score() {
        let e = TreeEnsemble {
            base_score: 0.7,
            trees: vec![],
            loss: LossKind::SquaredError,
            feature_names: vec!["a".into()],
        };
        assert_eq!(e.predict_margin(&[1.0]), 0.7);
        assert!(matches!(e.predict_proba(&[1.0]), Err(Error::Usage(_))));
        let l = TreeEnsemble { loss: LossKind::Logistic, base_score: 0.0, ..e };
        assert_eq!(l.predict_proba(&[1.0]).unwrap(), 0.5);
    }

    #[test]
    fn missing_values_follow_default_directions() {
        // depth-2 tree: root on f0 (default right), right child on f1 (default left)
        let tree = Tree {
            nodes: vec![
                TreeNode::Split { feature: 0, threshold: 0.5, default_left: false, left: 1, right: 2 },
                TreeNode::Leaf { weight: -1.0 },
                TreeNode::Split { feature: 1, threshold: 2.0, default_left: true, left: 3, right: 4 },
                TreeNode::Leaf { weight: 3.0 },
                TreeNode::Leaf { weight: 5.0 },
            ],
        };
        tree.validate(2).unwrap();
        // hand trace: NaN at root → right (node 2); NaN at node 2 → left (node 3) → 3.0
        assert_eq!(tree.predict(&[f64::NAN, f64::NAN]), 3.0);
        assert_eq!(tree.predict(&[0.0, f64::NAN]), -1.0);
        assert_eq!(tree.predict(&[f64::NAN, 2.0]), 5.0);
        assert_eq!(tree.depth(), 2);
        assert_eq!(tree.n_leaves(), 3);
    }

    #[test]
    fn params_validation() {
        assert!(BoostParams::default().validate().is_ok());
        let bad = [
            BoostParams { n_estimators: 0, ..Default::default() },
            BoostParams { subsample: 0.0, ..Default::default() },
            BoostParams { learning_rate: 1.5, ..Default::default() },
            BoostParams { max_depth: 17, ..Default::default() },
            BoostParams { reg_lambda: -1.0, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }
}
