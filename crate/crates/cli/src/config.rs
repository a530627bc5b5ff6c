use std::path::Path;

use serde::{Deserialize, Serialize};
use slipway_core::dataset::AssemblyOptions;
use slipway_core::eval::{BenchmarkConfig, CvConfig, ParamDistribution};
use slipway_core::synthgen::GeneratorConfig;
use slipway_core::{Error, Result};

/// Settings read from `--config`. Every section is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub simulate: GeneratorConfig,
    pub assembly: AssemblyOptions,
    pub evaluate: BenchmarkConfig,
    pub train: TrainConfig,
    pub serve: ServeConfig,
}

/// Hyperparameter search used by `train` before the final fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Only `inner_folds`, `n_candidates` and `seed` are used.
    pub search: CvConfig,
    pub classifier: ParamDistribution,
    pub regressor: ParamDistribution,
    pub background_rows: usize,
    pub expected_positive_rate: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            search: CvConfig::default(),
            classifier: ParamDistribution::default(),
            regressor: ParamDistribution::default(),
            background_rows: slipway_core::explain::DEFAULT_BACKGROUND_ROWS,
            expected_positive_rate: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub addr: String,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self { addr: "127.0.0.1:8080".into() }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.simulate.validate()?;
        c.evaluate.classifier.validate()?;
        c.evaluate.regressor.validate()?;
        c.train.classifier.validate()?;
        c.train.regressor.validate()?;
        Ok(c)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::invalid(format!("cannot read {}: {e}", p.display())))?;
                Self::from_toml(&text)
            }
        }
    }

    /// Applies `--seed` to every seeded step.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.simulate.seed = s;
            self.evaluate.cv.seed = s;
            self.train.search.seed = s;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_keep_defaults() {
        let c = Config::from_toml("[simulate]\nn_days = 3\n[train.search]\nn_candidates = 2\n").unwrap();
        assert_eq!(c.simulate.n_days, 3);
        assert_eq!(c.simulate.landings_per_day, GeneratorConfig::default().landings_per_day);
        assert_eq!(c.train.search.n_candidates, 2);
        assert_eq!(c.train.search.inner_folds, 3);
        let seeded = c.with_seed(Some(9));
        assert_eq!((seeded.simulate.seed, seeded.evaluate.cv.seed, seeded.train.search.seed), (9, 9, 9));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(Config::from_toml("[simulate]\nn_dayz = 3\n"), Err(Error::Config(_))));
        assert!(matches!(Config::from_toml("[bogus]\n"), Err(Error::Config(_))));
    }
}
