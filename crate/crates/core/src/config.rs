//! Tunable constants shared by the pipeline, loadable from a JSON file.
//! Every field has a default so partial files are accepted.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indexes::ThresholdSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub indexes: IndexConfig,
    pub vote: VoteConfig,
    pub classifier: ClassifierConfig,
    pub weak: WeakConfig,
    pub baselines: BaselineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexConfig {
    /// RED at which the edit index reaches 0.
    pub edit_scale: f64,
    /// Number of common fragments at which the cf index reaches 1.
    pub cf_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoteConfig {
    pub percentile: f64,
    /// Preset thresholds; when present, calibration is skipped.
    pub thresholds: Option<ThresholdSet>,
    /// Vote SEGMENT only when the index is strictly below its threshold.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub folds: usize,
    pub lambda_draws: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub epochs: usize,
    pub max_learning_rate: f64,
    pub smote_k: usize,
    pub oversample: bool,
    pub kmm_bound: f64,
    /// Defaults to 1/sqrt(n) when absent.
    pub kmm_epsilon: Option<f64>,
    /// Defaults to the median pairwise distance when absent.
    pub kmm_bandwidth: Option<f64>,
    pub kmm_max_iter: usize,
    pub train_fraction: f64,
    /// Fixed feature list; when absent, features are selected by correlation.
    pub features: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakConfig {
    pub max_iter: usize,
    pub tolerance: f64,
    /// Fixed labeling-function subset; when absent, the subset is searched.
    pub lfs: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub gap_minutes: i64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 42,
            indexes: IndexConfig::default(),
            vote: VoteConfig::default(),
            classifier: ClassifierConfig::default(),
            weak: WeakConfig::default(),
            baselines: BaselineConfig::default(),
        }
    }
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            edit_scale: 10.0,
            cf_scale: 10.0,
        }
    }
}

impl Default for VoteConfig {
    fn default() -> Self {
        VoteConfig {
            percentile: 30.0,
            thresholds: None,
            strict: false,
        }
    }
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            folds: 10,
            lambda_draws: 20,
            lambda_min: 1e-3,
            lambda_max: 1e3,
            epochs: 50,
            max_learning_rate: 1.0,
            smote_k: 5,
            oversample: true,
            kmm_bound: 1000.0,
            kmm_epsilon: None,
            kmm_bandwidth: None,
            kmm_max_iter: 1000,
            train_fraction: 0.95,
            features: None,
        }
    }
}

impl Default for WeakConfig {
    fn default() -> Self {
        WeakConfig {
            max_iter: 500,
            tolerance: 1e-6,
            lfs: None,
        }
    }
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { gap_minutes: 30 }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
