//! Boosted models against the rule-based models on one labeled dataset.

use serde::{Deserialize, Serialize};

use super::cv::{nested_cv, CvConfig, CvReport, ParamDistribution};
use super::metrics::{
    classification_metrics, roc_curve, ClassificationMetrics, ConfusionMatrix, RocPoint,
};
use super::report::ComparisonTable;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::friction::{to_braking_action, SLIPPERY_MU};
use crate::gbt::{LossKind, TreeEnsemble};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub cv: CvConfig,
    pub classifier: ParamDistribution,
    pub regressor: ParamDistribution,
    /// Blank out the runway-report columns.
    pub met_only: bool,
}

/// Verdicts of one rule-based model over the whole dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub name: String,
    pub confusion: ConfusionMatrix,
    pub metrics: Option<ClassificationMetrics>,
    /// Mean braking-action gap on friction-limited landings, when the model
    /// reports a braking action.
    pub ba_error: Option<f64>,
    /// Landings the model could not assess; counted as non-slippery.
    pub unavailable: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub n_landings: usize,
    pub n_slippery: usize,
    pub n_limited: usize,
    pub met_only: bool,
    pub classification: CvReport,
    pub regression: CvReport,
    /// Curve of the pooled out-of-fold probabilities.
    pub roc: Vec<RocPoint>,
    pub baselines: Vec<BaselineResult>,
}

fn braking_action_error(pairs: impl Iterator<Item = (Option<u8>, f64)>) -> Result<Option<f64>> {
    let (mut sum, mut n) = (0u64, 0u64);
    for (grade, mu) in pairs {
        if let Some(g) = grade {
            sum += u64::from(g.abs_diff(to_braking_action(mu)?.level()));
            n += 1;
        }
    }
    Ok((n > 0).then(|| sum as f64 / n as f64))
}

fn baseline(name: &str, data: &Dataset, verdict: impl Fn(usize) -> Option<bool>, grade: Option<&dyn Fn(usize) -> Option<u8>>) -> Result<BaselineResult> {
    let verdicts: Vec<Option<bool>> = (0..data.len()).map(verdict).collect();
    let predicted: Vec<bool> = verdicts.iter().map(|v| v.unwrap_or(false)).collect();
    let confusion = ConfusionMatrix::from_predictions(&predicted, &data.labels())?;
    let ba_error = match grade {
        Some(g) => braking_action_error(data.limited_rows().into_iter().map(|i| (g(i), data.rows[i].mu_b)))?,
        None => None,
    };
    Ok(BaselineResult {
        name: name.into(),
        confusion,
        metrics: classification_metrics(&confusion).ok(),
        ba_error,
        unavailable: verdicts.iter().filter(|v| v.is_none()).count(),
    })
}

/// Runway model, scenario warnings and inspector reports, each calling a
/// landing slippery at braking action 3 or worse (any warning for the
/// scenario model).
pub fn baseline_results(data: &Dataset) -> Result<Vec<BaselineResult>> {
    let runway = |i: usize| data.rows[i].runway_grade;
    let inspector = |i: usize| data.rows[i].inspector_ba;
    Ok(vec![
        baseline("Runway", data, |i| runway(i).map(|g| g <= 3), Some(&runway))?,
        baseline("Scenario", data, |i| Some(!data.rows[i].scenario_warnings.is_empty()), None)?,
        baseline("Snowtam", data, |i| inspector(i).map(|g| g <= 3), Some(&inspector))?,
    ])
}

/// Nested cross-validation of the classifier on all landings and of the
/// regressor on the friction-limited ones, plus the rule-based models.
pub fn run_benchmark(data: &Dataset, config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let x = data.matrix(config.met_only)?;
    let labels = data.labels();
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l))).collect();
    let classification = nested_cv(&x, &y, &labels, LossKind::Logistic, &config.classifier, &config.cv)?;

    let limited = data.limited_rows();
    if limited.is_empty() {
        return Err(Error::invalid("no friction-limited landings to regress on"));
    }
    let xr = x.select_rows(&limited);
    let mu: Vec<f64> = limited.iter().map(|&i| data.rows[i].mu_b).collect();
    let strata: Vec<bool> = mu.iter().map(|&m| m <= SLIPPERY_MU).collect();
    let regression = nested_cv(&xr, &mu, &strata, LossKind::SquaredError, &config.regressor, &config.cv)?;

    Ok(BenchmarkReport {
        n_landings: data.len(),
        n_slippery: labels.iter().filter(|&&l| l).count(),
        n_limited: limited.len(),
        met_only: config.met_only,
        roc: roc_curve(&classification.predictions, &labels)?,
        classification,
        regression,
        baselines: baseline_results(data)?,
    })
}

impl BenchmarkReport {
    pub fn classifier_confusion(&self) -> ConfusionMatrix {
        self.classification.confusion.unwrap_or_default()
    }

    /// Rates of the pooled out-of-fold confusion counts.
    pub fn classifier_metrics(&self) -> Result<ClassificationMetrics> {
        classification_metrics(&self.classifier_confusion())
    }

    pub fn mean_auc(&self) -> f64 {
        self.classification.mean.get("auc").copied().unwrap_or(f64::NAN)
    }

    pub fn baseline(&self, name: &str) -> Option<&BaselineResult> {
        self.baselines.iter().find(|b| b.name == name)
    }

    fn columns(&self) -> Vec<&str> {
        std::iter::once("XGBoost").chain(self.baselines.iter().map(|b| b.name.as_str())).collect()
    }

    /// Confusion counts per method.
    pub fn confusion_table(&self) -> ComparisonTable {
        let cms: Vec<ConfusionMatrix> =
            std::iter::once(self.classifier_confusion()).chain(self.baselines.iter().map(|b| b.confusion)).collect();
        let mut t = ComparisonTable::new("Confusion counts (slippery is positive)", &self.columns());
        t.precision = 0;
        for (name, f) in [
            ("TP", (|c: &ConfusionMatrix| c.tp) as fn(&ConfusionMatrix) -> u64),
            ("FN", |c| c.fn_),
            ("FP", |c| c.fp),
            ("TN", |c| c.tn),
        ] {
            let row: Vec<Option<f64>> = cms.iter().map(|c| Some(f(c) as f64)).collect();
            t = t.row(name, &row);
        }
        t
    }

    pub fn classification_table(&self) -> ComparisonTable {
        let xgb = self.classifier_metrics().ok();
        let all: Vec<Option<ClassificationMetrics>> =
            std::iter::once(xgb).chain(self.baselines.iter().map(|b| b.metrics)).collect();
        let pick = |f: fn(&ClassificationMetrics) -> f64| all.iter().map(|m| m.as_ref().map(f)).collect::<Vec<_>>();
        ComparisonTable::new("Classification", &self.columns())
            .row("Sensitivity", &pick(|m| m.sensitivity))
            .row("Specificity", &pick(|m| m.specificity))
            .row("G-Mean", &pick(|m| m.g_mean))
    }

    pub fn regression_table(&self) -> ComparisonTable {
        let cols: Vec<&str> = std::iter::once("XGBoost")
            .chain(self.baselines.iter().filter(|b| b.ba_error.is_some()).map(|b| b.name.as_str()))
            .collect();
        let others = self.baselines.iter().filter(|b| b.ba_error.is_some());
        let m = &self.regression.mean;
        let mut t = ComparisonTable::new("Regression", &cols);
        t.precision = 4;
        let blanks = vec![None; cols.len() - 1];
        let with = |first: Option<f64>, rest: &[Option<f64>]| std::iter::once(first).chain(rest.iter().copied()).collect::<Vec<_>>();
        t = t.row("RMSE", &with(m.get("rmse").copied(), &blanks));
        t = t.row("MAE", &with(m.get("mae").copied(), &blanks));
        let ba: Vec<Option<f64>> = others.map(|b| b.ba_error).collect();
        t = t.row("BA Error", &with(m.get("ba_error").copied(), &ba));
        t.row("Within ±1 (%)", &with(m.get("within_one_pct").copied(), &blanks))
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{} landings, {} slippery ({:.2}%), {} friction limited{}\n\n",
            self.n_landings,
            self.n_slippery,
            100.0 * self.n_slippery as f64 / self.n_landings.max(1) as f64,
            self.n_limited,
            if self.met_only { ", weather columns only" } else { "" }
        );
        out.push_str(&format!("ROC AUC (mean over folds): {:.4}\n\n", self.mean_auc()));
        for t in [self.confusion_table(), self.classification_table(), self.regression_table()] {
            out.push_str(&t.render());
            out.push('\n');
        }
        out
    }
}

/// Full feature set against weather columns only, one column each.
pub fn ablation_table(full: &BenchmarkReport, met: &BenchmarkReport) -> Result<ComparisonTable> {
    let metrics = |r: &BenchmarkReport| -> Result<[f64; 8]> {
        let c = r.classifier_metrics()?;
        let m = &r.regression.mean;
        let get = |k: &str| m.get(k).copied().unwrap_or(f64::NAN);
        Ok([c.sensitivity, c.specificity, c.g_mean, r.mean_auc(), get("rmse"), get("mae"), get("ba_error"), get("within_one_pct")])
    };
    let (a, b) = (metrics(full)?, metrics(met)?);
    let mut t = ComparisonTable::new("Full feature set against weather only", &["X_tot", "X_met"]);
    t.precision = 4;
    let names = ["Sensitivity", "Specificity", "G-Mean", "ROC AUC", "RMSE", "MAE", "BA Error", "Within ±1 (%)"];
    for (k, name) in names.iter().enumerate() {
        if k == 0 {
            t = t.section(Some("Classification"));
        } else if k == 4 {
            t = t.section(Some("Regression"));
        }
        t = t.row(name, &[Some(a[k]), Some(b[k])]);
    }
    Ok(t)
}

/// Refits on every row with a fixed parameter set; used to ship a model
/// after evaluation.
pub fn fit_final(data: &Dataset, met_only: bool, loss: LossKind, params: &crate::gbt::BoostParams) -> Result<TreeEnsemble> {
    let x = data.matrix(met_only)?;
    match loss {
        LossKind::Logistic => {
            let y: Vec<f64> = data.labels().iter().map(|&l| f64::from(u8::from(l))).collect();
            crate::gbt::fit(&x, &y, params, loss)
        }
        LossKind::SquaredError => {
            let rows = data.limited_rows();
            if rows.is_empty() {
                return Err(Error::invalid("no friction-limited landings to regress on"));
            }
            let y: Vec<f64> = rows.iter().map(|&i| data.rows[i].mu_b).collect();
            crate::gbt::fit(&x.select_rows(&rows), &y, params, loss)
        }
    }
}
