use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::fit_final;
use crate::explain::{BackgroundSet, DEFAULT_BACKGROUND_ROWS};
use crate::features::{feature_names, schema_checksum, SCHEMA_VERSION};
use crate::gbt::{BoostParams, FeatureMatrix, LossKind, TreeEnsemble};

/// Provenance of a trained bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    /// Hex SHA-256 of the training data as supplied by the caller.
    pub data_hash: String,
    pub seed: u64,
    pub n_rows: usize,
    pub n_limited: usize,
    pub met_only: bool,
    pub classifier_params: BoostParams,
    pub regressor_params: BoostParams,
    /// Runway names in the order used for the runway feature.
    pub runways: Vec<String>,
    pub schema_checksum: String,
}

/// Identifiers returned with every response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelVersions {
    pub classifier: String,
    pub regressor: String,
    pub schema_version: u32,
}

/// Everything needed to assess a runway.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub classifier: TreeEnsemble,
    pub regressor: TreeEnsemble,
    pub schema_version: u32,
    /// Probability mapped to 50% on the scaled gauge; also the default
    /// decision threshold.
    pub expected_positive_rate: f64,
    pub manifest: TrainingManifest,
    pub classifier_background: BackgroundSet,
    pub regressor_background: BackgroundSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub classifier: BoostParams,
    pub regressor: BoostParams,
    pub met_only: bool,
    pub seed: u64,
    pub background_rows: usize,
    /// Defaults to the share of slippery landings in the training data.
    pub expected_positive_rate: Option<f64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            classifier: BoostParams::default(),
            regressor: BoostParams::default(),
            met_only: false,
            seed: 0,
            background_rows: DEFAULT_BACKGROUND_ROWS,
            expected_positive_rate: None,
        }
    }
}

fn short_hash(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

impl ModelBundle {
    /// Fits both models on every row of `data`.
    pub fn train(data: &Dataset, runways: Vec<String>, data_hash: String, opts: &TrainOptions) -> Result<Self> {
        let classifier = fit_final(data, opts.met_only, LossKind::Logistic, &opts.classifier)?;
        let regressor = fit_final(data, opts.met_only, LossKind::SquaredError, &opts.regressor)?;
        let x = data.matrix(opts.met_only)?;
        let limited = data.limited_rows();
        let rate = data.labels().iter().filter(|&&l| l).count() as f64 / data.len().max(1) as f64;
        let bundle = Self {
            classifier,
            regressor,
            schema_version: SCHEMA_VERSION,
            expected_positive_rate: opts.expected_positive_rate.unwrap_or(rate),
            manifest: TrainingManifest {
                data_hash,
                seed: opts.seed,
                n_rows: data.len(),
                n_limited: limited.len(),
                met_only: opts.met_only,
                classifier_params: opts.classifier.clone(),
                regressor_params: opts.regressor.clone(),
                runways,
                schema_checksum: schema_checksum(),
            },
            classifier_background: BackgroundSet::sample_from(&x, opts.background_rows, opts.seed)?,
            regressor_background: BackgroundSet::sample_from(&x.select_rows(&limited), opts.background_rows, opts.seed ^ 1)?,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.expected_positive_rate > 0.0 && self.expected_positive_rate < 1.0) {
            return Err(Error::invalid(format!("expected positive rate {} outside (0, 1)", self.expected_positive_rate)));
        }
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!("bundle schema version {} (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        if self.classifier.loss != LossKind::Logistic || self.regressor.loss != LossKind::SquaredError {
            return Err(Error::invalid("bundle needs a logistic classifier and a squared-error regressor"));
        }
        let names = feature_names();
        for (what, e) in [("classifier", &self.classifier), ("regressor", &self.regressor)] {
            if e.feature_names.as_slice() != names {
                return Err(Error::invalid(format!("{what} was trained on a different feature schema")));
            }
        }
        for (what, b) in [("classifier", &self.classifier_background), ("regressor", &self.regressor_background)] {
            if b.rows().names() != names {
                return Err(Error::invalid(format!("{what} background has a different feature schema")));
            }
        }
        if self.manifest.runways.is_empty() {
            return Err(Error::invalid("bundle lists no runways"));
        }
        Ok(())
    }

    pub fn versions(&self) -> ModelVersions {
        let json = |e: &TreeEnsemble| serde_json::to_vec(e).unwrap_or_default();
        ModelVersions {
            classifier: short_hash(&json(&self.classifier)),
            regressor: short_hash(&json(&self.regressor)),
            schema_version: self.schema_version,
        }
    }

    pub fn runway_index(&self, runway: &str) -> Result<usize> {
        self.manifest
            .runways
            .iter()
            .position(|r| r == runway)
            .ok_or_else(|| Error::NotFound(format!("runway `{runway}` is not covered by the model")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&BundleDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: BundleDoc = serde_json::from_str(s)?;
        let bundle = Self::try_from(doc)?;
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Background rows on disk; missing values are `null`.
type Rows = Vec<Vec<Option<f64>>>;

#[derive(Serialize, Deserialize)]
struct BundleDoc {
    schema_version: u32,
    expected_positive_rate: f64,
    manifest: TrainingManifest,
    classifier: TreeEnsemble,
    regressor: TreeEnsemble,
    classifier_background: Rows,
    regressor_background: Rows,
}

fn rows_out(b: &BackgroundSet) -> Rows {
    b.rows().rows().map(|r| r.iter().map(|&v| (!v.is_nan()).then_some(v)).collect()).collect()
}

fn rows_in(rows: Rows) -> Result<BackgroundSet> {
    let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect()).collect();
    BackgroundSet::new(FeatureMatrix::from_rows(feature_names().to_vec(), &rows)?)
}

impl From<&ModelBundle> for BundleDoc {
    fn from(b: &ModelBundle) -> Self {
        Self {
            schema_version: b.schema_version,
            expected_positive_rate: b.expected_positive_rate,
            manifest: b.manifest.clone(),
            classifier: b.classifier.clone(),
            regressor: b.regressor.clone(),
            classifier_background: rows_out(&b.classifier_background),
            regressor_background: rows_out(&b.regressor_background),
        }
    }
}

impl TryFrom<BundleDoc> for ModelBundle {
    type Error = Error;

    fn try_from(d: BundleDoc) -> Result<Self> {
        Ok(Self {
            classifier: d.classifier,
            regressor: d.regressor,
            schema_version: d.schema_version,
            expected_positive_rate: d.expected_positive_rate,
            manifest: d.manifest,
            classifier_background: rows_in(d.classifier_background)?,
            regressor_background: rows_in(d.regressor_background)?,
        })
    }
}
