//! Interventional SHAP values for tree ensembles.
//!
//! For a reference row `r` the coalition game is `v(S) = f(x_S, r_S̄)`: the
//! model evaluated with features in `S` taken from the explicand and the
//! rest from the reference. Averaging the exact Shapley values of that game
//! over a background set gives attributions for `E[f(X) | do(X_S = x_S)]`.
//!
//! Within one tree each leaf is reached exactly when a fixed set `A` of
//! features is in the coalition and a disjoint set `B` is out of it, so its
//! game is `w·1[A ⊆ S, B ∩ S = ∅]`. That game has the closed-form Shapley
//! values `w·(|A|-1)!|B|!/(|A|+|B|)!` for members of `A` and
//! `−w·|A|!(|B|-1)!/(|A|+|B|)!` for members of `B`, which lets us walk the
//! tree once per (explicand, reference) pair instead of enumerating subsets.
//! [`brute_force_shap`] enumerates subsets directly and serves as the oracle.

use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbt::{goes_left, FeatureMatrix, Tree, TreeEnsemble, TreeNode};

/// Additive attribution of one prediction on the margin scale:
/// `base_value + Σ phis = margin`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub base_value: f64,
    pub phis: Vec<f64>,
    /// Feature values of the explained row.
    pub values: Vec<f64>,
    pub margin: f64,
    pub feature_names: Vec<String>,
}

/// One entry of an exported explanation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub feature: String,
    /// `null` when the feature was missing.
    pub value: Option<f64>,
    pub phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationExport {
    pub base_value: f64,
    pub margin: f64,
    pub contributions: Vec<Contribution>,
}

impl Explanation {
    /// Contributions ordered by |phi| descending, ties by feature index.
    pub fn ranked(&self) -> Vec<Contribution> {
        let mut idx: Vec<usize> = (0..self.phis.len()).collect();
        idx.sort_by(|&a, &b| by_abs_desc(self.phis[a], self.phis[b]).then(a.cmp(&b)));
        idx.into_iter().map(|i| self.contribution(i)).collect()
    }

    pub fn export(&self) -> ExplanationExport {
        ExplanationExport { base_value: self.base_value, margin: self.margin, contributions: self.ranked() }
    }

    fn contribution(&self, i: usize) -> Contribution {
        let v = self.values[i];
        Contribution {
            feature: self.feature_names[i].clone(),
            value: if v.is_nan() { None } else { Some(v) },
            phi: self.phis[i],
        }
    }

    pub fn local_accuracy_gap(&self) -> f64 {
        (self.base_value + self.phis.iter().sum::<f64>() - self.margin).abs()
    }
}

fn by_abs_desc(a: f64, b: f64) -> Ordering {
    b.abs().partial_cmp(&a.abs()).unwrap_or(Ordering::Equal)
}

/// Reference rows standing in for "absent" features.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundSet {
    rows: FeatureMatrix,
}

pub const DEFAULT_BACKGROUND_ROWS: usize = 256;

impl BackgroundSet {
    pub fn new(rows: FeatureMatrix) -> Result<Self> {
        if rows.n_rows() == 0 {
            return Err(Error::invalid("background set is empty"));
        }
        Ok(Self { rows })
    }

    /// Uniform sample of at most `max_rows` rows, drawn without replacement
    /// and kept in their original order.
    pub fn sample_from(data: &FeatureMatrix, max_rows: usize, seed: u64) -> Result<Self> {
        if data.n_rows() <= max_rows {
            return Self::new(data.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, data.n_rows(), max_rows).into_vec();
        idx.sort_unstable();
        Self::new(data.select_rows(&idx))
    }

    pub fn rows(&self) -> &FeatureMatrix {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.n_rows() == 0
    }
}

fn check_schema(ensemble: &TreeEnsemble, x: &[f64], background: &BackgroundSet) -> Result<()> {
    ensemble.check_row(x)?;
    if background.rows.n_cols() != ensemble.n_features() {
        return Err(Error::invalid(format!(
            "background has {} columns, model has {}",
            background.rows.n_cols(),
            ensemble.n_features()
        )));
    }
    if background.is_empty() {
        return Err(Error::invalid("background set is empty"));
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Free,
    In,
    Out,
}

/// Shapley weights for leaf games, indexed by (|A|, |B|).
struct LeafWeights {
    max: usize,
    on: Vec<f64>,
    off: Vec<f64>,
}

impl LeafWeights {
    fn new(max: usize) -> Self {
        let n = max + 1;
        let mut on = vec![0.0; n * n];
        let mut off = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                if a + b == 0 || a + b > max {
                    continue;
                }
                let c = binomial(a + b, a);
                if a > 0 {
                    on[a * n + b] = 1.0 / (a as f64 * c);
                }
                if b > 0 {
                    off[a * n + b] = 1.0 / (b as f64 * c);
                }
            }
        }
        Self { max, on, off }
    }

    #[inline]
    fn on(&self, a: usize, b: usize) -> f64 {
        self.on[a * (self.max + 1) + b]
    }

    #[inline]
    fn off(&self, a: usize, b: usize) -> f64 {
        self.off[a * (self.max + 1) + b]
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

struct PairWalk<'a> {
    tree: &'a Tree,
    x: &'a [f64],
    r: &'a [f64],
    weights: &'a LeafWeights,
    side: Vec<Side>,
    path: Vec<usize>,
    n_in: usize,
    n_out: usize,
}

impl PairWalk<'_> {
    fn walk(&mut self, node: usize, phi: &mut [f64]) {
        match &self.tree.nodes[node] {
            TreeNode::Leaf { weight } => {
                if self.n_in + self.n_out == 0 {
                    return;
                }
                let on = weight * self.weights.on(self.n_in, self.n_out);
                let off = weight * self.weights.off(self.n_in, self.n_out);
                for &f in &self.path {
                    match self.side[f] {
                        Side::In => phi[f] += on,
                        Side::Out => phi[f] -= off,
                        Side::Free => unreachable!("path holds constrained features only"),
                    }
                }
            }
            &TreeNode::Split { feature, threshold, default_left, left, right } => {
                let child = |go_left: bool| if go_left { left } else { right };
                let dx = goes_left(self.x[feature], threshold, default_left);
                let dr = goes_left(self.r[feature], threshold, default_left);
                if dx == dr {
                    return self.walk(child(dx), phi);
                }
                match self.side[feature] {
                    Side::In => self.walk(child(dx), phi),
                    Side::Out => self.walk(child(dr), phi),
                    Side::Free => {
                        self.path.push(feature);
                        self.side[feature] = Side::In;
                        self.n_in += 1;
                        self.walk(child(dx), phi);
                        self.n_in -= 1;
                        self.side[feature] = Side::Out;
                        self.n_out += 1;
                        self.walk(child(dr), phi);
                        self.n_out -= 1;
                        self.side[feature] = Side::Free;
                        self.path.pop();
                    }
                }
            }
        }
    }
}

fn max_depth(ensemble: &TreeEnsemble) -> usize {
    ensemble.trees.iter().map(Tree::depth).max().unwrap_or(0)
}

/// Exact interventional SHAP values of the margin, averaged uniformly over
/// the background rows. `base_value` is the mean background margin.
pub fn shap_values(ensemble: &TreeEnsemble, x: &[f64], background: &BackgroundSet) -> Result<Explanation> {
    check_schema(ensemble, x, background)?;
    let weights = LeafWeights::new(max_depth(ensemble).max(1));
    Ok(shap_with_weights(ensemble, x, background, &weights))
}

fn shap_with_weights(
    ensemble: &TreeEnsemble,
    x: &[f64],
    background: &BackgroundSet,
    weights: &LeafWeights,
) -> Explanation {
    let m = ensemble.n_features();
    let mut phi = vec![0.0; m];
    let mut base = 0.0;
    let mut side = vec![Side::Free; m];
    let mut path = Vec::with_capacity(weights.max);
    for r in background.rows.rows() {
        base += ensemble.predict_margin(r);
        for tree in &ensemble.trees {
            let mut walk = PairWalk {
                tree,
                x,
                r,
                weights,
                side: std::mem::take(&mut side),
                path: std::mem::take(&mut path),
                n_in: 0,
                n_out: 0,
            };
            walk.walk(0, &mut phi);
            side = walk.side;
            path = walk.path;
        }
    }
    let n = background.len() as f64;
    for p in &mut phi {
        *p /= n;
    }
    Explanation {
        base_value: base / n,
        phis: phi,
        values: x.to_vec(),
        margin: ensemble.predict_margin(x),
        feature_names: ensemble.feature_names.clone(),
    }
}

/// Explains every row of `data`. Rows are processed in parallel; each
/// explanation is computed independently, so results do not depend on
/// scheduling.
pub fn shap_batch(
    ensemble: &TreeEnsemble,
    data: &FeatureMatrix,
    background: &BackgroundSet,
) -> Result<Vec<Explanation>> {
    if data.n_rows() > 0 {
        check_schema(ensemble, data.row(0), background)?;
    }
    let weights = LeafWeights::new(max_depth(ensemble).max(1));
    Ok((0..data.n_rows())
        .into_par_iter()
        .map(|i| shap_with_weights(ensemble, data.row(i), background, &weights))
        .collect())
}

pub const BRUTE_FORCE_MAX_FEATURES: usize = 20;

/// Shapley values by direct enumeration of all feature subsets.
///
/// Exponential in the feature count; refuses more than
/// [`BRUTE_FORCE_MAX_FEATURES`] features.
pub fn brute_force_shap(ensemble: &TreeEnsemble, x: &[f64], background: &BackgroundSet) -> Result<Explanation> {
    check_schema(ensemble, x, background)?;
    let m = ensemble.n_features();
    if m > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::TooManyFeatures { features: m, limit: BRUTE_FORCE_MAX_FEATURES });
    }
    let n_bg = background.len() as f64;
    let mut hybrid = vec![0.0; m];
    let value: Vec<f64> = (0..1usize << m)
        .map(|mask| {
            let mut total = 0.0;
            for r in background.rows.rows() {
                for j in 0..m {
                    hybrid[j] = if mask >> j & 1 == 1 { x[j] } else { r[j] };
                }
                total += ensemble.predict_margin(&hybrid);
            }
            total / n_bg
        })
        .collect();

    // |S|!(m-|S|-1)!/m!
    let weight: Vec<f64> = (0..m).map(|s| 1.0 / (m as f64 * binomial(m - 1, s))).collect();
    let mut phis = vec![0.0; m];
    for (j, phi) in phis.iter_mut().enumerate() {
        let bit = 1usize << j;
        for mask in (0..1usize << m).filter(|mask| mask & bit == 0) {
            *phi += weight[mask.count_ones() as usize] * (value[mask | bit] - value[mask]);
        }
    }
    Ok(Explanation {
        base_value: value[0],
        phis,
        values: x.to_vec(),
        margin: ensemble.predict_margin(x),
        feature_names: ensemble.feature_names.clone(),
    })
}

/// Sum of absolute attributions per feature over many explanations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    pub importance: Vec<f64>,
    pub feature_names: Vec<String>,
    /// Feature names by descending importance, ties by index.
    pub order: Vec<String>,
}

pub fn global_importance(explanations: &[Explanation]) -> Result<GlobalImportance> {
    let first = explanations.first().ok_or_else(|| Error::invalid("no explanations given"))?;
    let names = &first.feature_names;
    let mut importance = vec![0.0; names.len()];
    for (i, e) in explanations.iter().enumerate() {
        if &e.feature_names != names || e.phis.len() != names.len() {
            return Err(Error::invalid(format!("explanation {i} has a different feature schema")));
        }
        for (acc, p) in importance.iter_mut().zip(&e.phis) {
            *acc += p.abs();
        }
    }
    let mut idx: Vec<usize> = (0..names.len()).collect();
    idx.sort_by(|&a, &b| importance[b].partial_cmp(&importance[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    Ok(GlobalImportance {
        order: idx.iter().map(|&i| names[i].clone()).collect(),
        importance,
        feature_names: names.clone(),
    })
}

/// A feature cited for or against a prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Argument {
    pub index: usize,
    pub feature: String,
    pub value: Option<f64>,
    pub phi: f64,
}

/// The `k_pos` most positive and `k_neg` most negative attributions, each
/// list ordered by |phi| descending with ties broken by feature index.
/// Zero attributions are never cited.
pub fn top_arguments(e: &Explanation, k_pos: usize, k_neg: usize) -> (Vec<Argument>, Vec<Argument>) {
    let pick = |positive: bool, k: usize| {
        let mut idx: Vec<usize> = (0..e.phis.len())
            .filter(|&i| if positive { e.phis[i] > 0.0 } else { e.phis[i] < 0.0 })
            .collect();
        idx.sort_by(|&a, &b| by_abs_desc(e.phis[a], e.phis[b]).then(a.cmp(&b)));
        idx.truncate(k);
        idx.into_iter()
            .map(|i| {
                let c = e.contribution(i);
                Argument { index: i, feature: c.feature, value: c.value, phi: c.phi }
            })
            .collect::<Vec<_>>()
    };
    (pick(true, k_pos), pick(false, k_neg))
}
