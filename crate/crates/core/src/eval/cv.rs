use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{
    classification_metrics, positive_rate, regression_metrics, roc_auc, threshold_classify, ConfusionMatrix,
};
use crate::error::{Error, Result};
use crate::gbt::{fit_prepared, BoostParams, FeatureMatrix, LossKind, TrainingData, TreeEnsemble};

/// Sampling ranges of the searched hyperparameters. Integer ranges are
/// inclusive; real ranges are uniform on `[lo, hi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamDistribution {
    pub n_estimators: (usize, usize),
    pub reg_lambda: (f64, f64),
    pub min_split_loss: (f64, f64),
    pub subsample: (f64, f64),
    pub learning_rate: (f64, f64),
    /// Source of every setting that is not searched.
    pub fixed: BoostParams,
}

impl Default for ParamDistribution {
    fn default() -> Self {
        Self {
            n_estimators: (50, 250),
            reg_lambda: (0.0, 10.0),
            min_split_loss: (0.0, 0.4),
            subsample: (0.3, 1.0),
            learning_rate: (0.1, 0.21),
            fixed: BoostParams::default(),
        }
    }
}

impl ParamDistribution {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.n_estimators;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("bad n_estimators range {lo}..={hi}")));
        }
        for (name, (lo, hi)) in [
            ("reg_lambda", self.reg_lambda),
            ("min_split_loss", self.min_split_loss),
            ("subsample", self.subsample),
            ("learning_rate", self.learning_rate),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("bad {name} range [{lo}, {hi})")));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> BoostParams {
        BoostParams {
            n_estimators: rng.gen_range(self.n_estimators.0..=self.n_estimators.1),
            reg_lambda: rng.gen_range(self.reg_lambda.0..self.reg_lambda.1),
            min_split_loss: rng.gen_range(self.min_split_loss.0..self.min_split_loss.1),
            subsample: rng.gen_range(self.subsample.0..self.subsample.1),
            learning_rate: rng.gen_range(self.learning_rate.0..self.learning_rate.1),
            rng_seed: rng.gen(),
            ..self.fixed.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub outer_folds: usize,
    pub inner_folds: usize,
    /// Parameter sets drawn per outer fold.
    pub n_candidates: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { outer_folds: 10, inner_folds: 3, n_candidates: 20, seed: 0 }
    }
}

/// Generator for one numbered stream of a seed. Stream 0 deals the outer
/// folds; stream `k + 1` drives outer fold `k`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Splits row indices into `k` folds that each receive the same share of
/// both classes (to within one row).
///
/// Each class is shuffled and dealt round-robin, and dealing continues
/// across classes. The returned folds hold ascending indices into `strata`.
pub fn stratified_folds(strata: &[bool], k: usize, rng: &mut impl Rng) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid("need at least two folds"));
    }
    let mut pos: Vec<usize> = (0..strata.len()).filter(|&i| strata[i]).collect();
    let mut neg: Vec<usize> = (0..strata.len()).filter(|&i| !strata[i]).collect();
    if pos.len() < k || neg.len() < k {
        return Err(Error::Stratification(format!(
            "{} positive and {} negative rows cannot fill {k} folds with both classes",
            pos.len(),
            neg.len()
        )));
    }
    pos.shuffle(rng);
    neg.shuffle(rng);
    let mut folds = vec![Vec::new(); k];
    for (j, &i) in pos.iter().chain(&neg).enumerate() {
        folds[j % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Rows of `0..n` outside `test`, which must be ascending.
fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - test.len());
    let mut t = test.iter().peekable();
    for i in 0..n {
        if t.peek() == Some(&&i) {
            t.next();
        } else {
            out.push(i);
        }
    }
    out
}

/// Held-out predictions on the response scale.
fn predict(model: &TreeEnsemble, x: &FeatureMatrix) -> Vec<f64> {
    x.rows().map(|r| model.predict_response(r)).collect()
}

/// Score used to pick parameters; larger is better.
fn selection_score(loss: LossKind, preds: &[f64], y: &[f64]) -> Result<f64> {
    match loss {
        LossKind::Logistic => {
            let labels: Vec<bool> = y.iter().map(|&v| v == 1.0).collect();
            roc_auc(preds, &labels)
        }
        LossKind::SquaredError => {
            let mae = preds.iter().zip(y).map(|(p, t)| (p - t).abs()).sum::<f64>() / y.len() as f64;
            Ok(-mae)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    /// Held-out rows, ascending.
    pub test_rows: Vec<usize>,
    /// Mean inner score of every candidate: AUC, or minus MAE for regression.
    pub candidate_scores: Vec<f64>,
    pub chosen: usize,
    pub params: BoostParams,
    /// Decision threshold (training positive rate) for classification.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    pub metrics: BTreeMap<String, f64>,
}

/// Outcome of [`nested_cv`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub seed: u64,
    pub loss: LossKind,
    pub config: CvConfig,
    pub distribution: ParamDistribution,
    pub n_rows: usize,
    pub folds: Vec<FoldReport>,
    /// Mean of each per-fold metric.
    pub mean: BTreeMap<String, f64>,
    /// Sample standard deviation of each per-fold metric.
    pub std: BTreeMap<String, f64>,
    /// Out-of-fold predictions on the response scale, by row.
    pub predictions: Vec<f64>,
    /// Confusion counts summed over the held-out folds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
}

impl CvReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Per-fold metrics followed by mean and standard deviation.
    pub fn render_text(&self) -> String {
        let keys: Vec<&String> = self.mean.keys().collect();
        let mut out = format!("nested cross-validation, {} loss, seed {}\n", self.loss.name(), self.seed);
        out.push_str(&format!("{:<6}", "fold"));
        for k in &keys {
            out.push_str(&format!("{:>16}", k));
        }
        out.push('\n');
        for f in &self.folds {
            out.push_str(&format!("{:<6}", f.fold));
            for k in &keys {
                out.push_str(&format!("{:>16.4}", f.metrics.get(*k).copied().unwrap_or(f64::NAN)));
            }
            out.push('\n');
        }
        for (label, map) in [("mean", &self.mean), ("std", &self.std)] {
            out.push_str(&format!("{label:<6}"));
            for k in &keys {
                out.push_str(&format!("{:>16.4}", map[*k]));
            }
            out.push('\n');
        }
        out
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Held-out metrics of one outer fold.
fn fold_metrics(
    loss: LossKind,
    preds: &[f64],
    y: &[f64],
    threshold: Option<f64>,
) -> Result<(BTreeMap<String, f64>, Option<ConfusionMatrix>)> {
    let mut m = BTreeMap::new();
    match loss {
        LossKind::Logistic => {
            let labels: Vec<bool> = y.iter().map(|&v| v == 1.0).collect();
            let thr = threshold.expect("classification folds carry a threshold");
            let cm = ConfusionMatrix::from_predictions(&threshold_classify(preds, thr)?, &labels)?;
            let c = classification_metrics(&cm)?;
            m.insert("auc".into(), roc_auc(preds, &labels)?);
            m.insert("sensitivity".into(), c.sensitivity);
            m.insert("specificity".into(), c.specificity);
            m.insert("g_mean".into(), c.g_mean);
            Ok((m, Some(cm)))
        }
        LossKind::SquaredError => {
            let r = regression_metrics(preds, y)?;
            m.insert("rmse".into(), r.rmse);
            m.insert("mae".into(), r.mae);
            m.insert("ba_error".into(), r.ba_error);
            m.insert("within_one_pct".into(), r.within_one_pct);
            Ok((m, None))
        }
    }
}

/// Outcome of a randomized search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub candidates: Vec<BoostParams>,
    /// Mean inner score per candidate; larger is better.
    pub scores: Vec<f64>,
    pub chosen: usize,
}

/// Draws `config.n_candidates` parameter sets and scores each by stratified
/// `config.inner_folds`-fold cross-validation: mean AUC for logistic loss,
/// negated mean absolute error for squared error. The first best candidate
/// wins ties.
pub fn randomized_search(
    x: &FeatureMatrix,
    y: &[f64],
    strata: &[bool],
    loss: LossKind,
    dist: &ParamDistribution,
    config: &CvConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SearchResult> {
    let candidates: Vec<BoostParams> = (0..config.n_candidates).map(|_| dist.sample(rng)).collect();
    let inner = stratified_folds(strata, config.inner_folds, rng)?;

    // Matrices of each inner split, rank-encoded once for all candidates.
    let splits: Vec<(FeatureMatrix, Vec<f64>, FeatureMatrix, Vec<f64>)> = inner
        .iter()
        .map(|test| {
            let train = complement(x.n_rows(), test);
            let ys = |idx: &[usize]| idx.iter().map(|&j| y[j]).collect::<Vec<_>>();
            (x.select_rows(&train), ys(&train), x.select_rows(test), ys(test))
        })
        .collect();
    let prepared: Vec<TrainingData> = splits.iter().map(|s| TrainingData::new(&s.0)).collect();

    let jobs: Vec<(usize, usize)> = (0..candidates.len()).flat_map(|c| (0..splits.len()).map(move |s| (c, s))).collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let model = fit_prepared(&prepared[s], &splits[s].1, &candidates[c], loss)?;
            selection_score(loss, &predict(&model, &splits[s].2), &splits[s].3)
        })
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = scores.chunks(splits.len()).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let chosen = scores.iter().enumerate().fold(0, |best, (i, &s)| if s > scores[best] { i } else { best });
    Ok(SearchResult { candidates, scores, chosen })
}

/// Nested cross-validation with randomized search.
///
/// The rows are split into stratified outer folds. For each outer fold,
/// `n_candidates` parameter sets are drawn and scored by stratified inner
/// cross-validation on the remaining rows: mean AUC for logistic loss, mean
/// absolute error for squared error. The best set (first on ties) is refit on
/// all remaining rows and evaluated on the held-out fold. Classification
/// thresholds are the positive rate of the refit data.
///
/// `strata` drives stratification; for classification it should equal the
/// labels. Candidates are trained in parallel but every random choice comes
/// from a per-fold stream, so the report depends only on the inputs.
pub fn nested_cv(
    x: &FeatureMatrix,
    y: &[f64],
    strata: &[bool],
    loss: LossKind,
    dist: &ParamDistribution,
    config: &CvConfig,
) -> Result<CvReport> {
    let n = x.n_rows();
    if y.len() != n || strata.len() != n {
        return Err(Error::invalid(format!("{n} rows, {} targets, {} strata", y.len(), strata.len())));
    }
    if n < 30 {
        return Err(Error::invalid(format!("nested cross-validation needs at least 30 rows, got {n}")));
    }
    if config.n_candidates == 0 || config.inner_folds < 2 {
        return Err(Error::Config("need at least one candidate and two inner folds".into()));
    }
    dist.validate()?;
    for &v in y {
        loss.check_label(v)?;
    }
    if loss == LossKind::Logistic && strata.iter().zip(y).any(|(&s, &v)| s != (v == 1.0)) {
        return Err(Error::invalid("classification strata must equal the labels"));
    }

    let outer = stratified_folds(strata, config.outer_folds, &mut stream_rng(config.seed, 0))?;
    let mut predictions = vec![f64::NAN; n];
    let mut folds = Vec::with_capacity(outer.len());
    for (k, test) in outer.iter().enumerate() {
        let mut rng = stream_rng(config.seed, k as u64 + 1);
        let train = complement(n, test);
        let train_strata: Vec<bool> = train.iter().map(|&i| strata[i]).collect();
        let x_train = x.select_rows(&train);
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let search = randomized_search(&x_train, &y_train, &train_strata, loss, dist, config, &mut rng)
            .map_err(|e| match e {
                Error::Stratification(m) => Error::Stratification(format!("outer fold {k}: {m}")),
                e => e,
            })?;
        let chosen = search.chosen;
        let candidate_scores = search.scores;
        let candidates = search.candidates;

        let model = fit_prepared(&TrainingData::new(&x_train), &y_train, &candidates[chosen], loss)?;
        let preds = predict(&model, &x.select_rows(test));
        let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let threshold = match loss {
            LossKind::Logistic => Some(positive_rate(&train_strata)?),
            LossKind::SquaredError => None,
        };
        let (metrics, confusion) = fold_metrics(loss, &preds, &y_test, threshold)?;
        for (&i, &p) in test.iter().zip(&preds) {
            predictions[i] = p;
        }
        folds.push(FoldReport {
            fold: k,
            n_train: train.len(),
            test_rows: test.clone(),
            candidate_scores,
            chosen,
            params: candidates[chosen].clone(),
            threshold,
            confusion,
            metrics,
        });
    }

    let mut mean = BTreeMap::new();
    let mut std = BTreeMap::new();
    for key in folds[0].metrics.keys() {
        let values: Vec<f64> = folds.iter().map(|f| f.metrics[key]).collect();
        let (m, s) = mean_std(&values);
        mean.insert(key.clone(), m);
        std.insert(key.clone(), s);
    }
    let confusion = folds.iter().filter_map(|f| f.confusion).reduce(|a, b| a.merge(&b));
    Ok(CvReport {
        seed: config.seed,
        loss,
        config: config.clone(),
        distribution: dist.clone(),
        n_rows: n,
        folds,
        mean,
        std,
        predictions,
        confusion,
    })
}
