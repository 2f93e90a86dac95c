//! Run configuration and train/test splits.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::annotate::RegressionKind;
use crate::distort::{self, AdapterConfig};
use crate::frmetrics::MetricId;
use crate::sparsenn::{ModelConfig, ResidualVariant, TrainConfig};

pub const ADAPTERS_ENV: &str = "PCQA_ADAPTERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    pub depths: Vec<usize>,
    pub variants: Vec<ResidualVariant>,
    /// Depth used while sweeping the residual variants.
    pub variant_depth: usize,
    pub train: TrainConfig,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            depths: (1..=5).collect(),
            variants: ResidualVariant::ALL.to_vec(),
            variant_depth: 4,
            train: TrainConfig {
                epochs: 4,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub dataset_seed: u64,
    /// Distortion ids to build; all native ids when absent.
    pub distortions: Option<Vec<u8>>,
    pub levels: Vec<u8>,
    /// Metric names to score; the six native metrics when absent.
    pub metrics: Option<Vec<String>>,
    /// Adapter map path; falls back to `PCQA_ADAPTERS`.
    pub adapters: Option<PathBuf>,
    pub label_scale: (f64, f64),
    pub regression: RegressionKind,
    /// Every `holdout_stride`-th labeled sample of a type is kept out of the
    /// fit and used for validation; 0 or 1 disables the holdout.
    pub holdout_stride: usize,
    pub min_subject_scores: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub model_seed: u64,
    pub ablation: AblationConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            dataset_seed: 0,
            distortions: None,
            levels: (1..=7).collect(),
            metrics: None,
            adapters: None,
            label_scale: (1.0, 5.0),
            regression: RegressionKind::Logistic5,
            holdout_stride: 2,
            min_subject_scores: crate::annotate::DEFAULT_MIN_SCORES,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            model_seed: 0,
            ablation: AblationConfig::default(),
        }
    }
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::MissingFile(path.to_path_buf(), e))?;
        let c: Config = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let v = |m: String| Err(PipelineError::Validation(m));
        let (lo, hi) = self.label_scale;
        if !(lo < hi) {
            return v(format!("label scale [{lo}, {hi}] is empty"));
        }
        for &l in &self.levels {
            if !(1..=7).contains(&l) {
                return v(format!("level {l} outside 1..=7"));
            }
        }
        for id in self.distortion_ids() {
            if distort::descriptor(id).is_none() {
                return v(format!("unknown distortion id {id}"));
            }
        }
        self.metric_ids()?;
        self.model.validate().map_err(|e| PipelineError::Validation(e.to_string()))?;
        self.train.validate().map_err(|e| PipelineError::Validation(e.to_string()))?;
        Ok(())
    }

    pub fn distortion_ids(&self) -> Vec<u8> {
        self.distortions.clone().unwrap_or_else(distort::native_ids)
    }

    pub fn metric_ids(&self) -> Result<Vec<MetricId>> {
        match &self.metrics {
            None => Ok(MetricId::NATIVE.to_vec()),
            Some(names) => names
                .iter()
                .map(|n| n.parse().map_err(|e: crate::frmetrics::MetricError| PipelineError::Validation(e.to_string())))
                .collect(),
        }
    }

    /// Adapters from the config path, else from `PCQA_ADAPTERS`, else none.
    /// Requesting an external distortion without an adapter is an error.
    pub fn adapter_config(&self) -> Result<AdapterConfig> {
        let path = self
            .adapters
            .clone()
            .or_else(|| std::env::var_os(ADAPTERS_ENV).map(PathBuf::from));
        let adapters = match path {
            Some(p) => AdapterConfig::load(&p).map_err(|e| PipelineError::Validation(format!("{}: {e}", p.display())))?,
            None => AdapterConfig::default(),
        };
        for id in self.distortion_ids() {
            let native = distort::descriptor(id).is_some_and(|d| d.is_native());
            if !native && adapters.get(id).is_none() {
                return Err(PipelineError::Validation(format!("distortion {id} needs an adapter")));
            }
        }
        Ok(adapters)
    }
}

/// Partition of reference ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

impl SplitSpec {
    /// Test references given explicitly; the rest train.
    pub fn holding_out(all: &BTreeSet<String>, test: &[&str]) -> Result<Self> {
        let test: BTreeSet<String> = test.iter().map(|s| s.to_string()).collect();
        let train = all.difference(&test).cloned().collect();
        let s = Self { train, test };
        s.validate(all)?;
        Ok(s)
    }

    /// A JSON file `{"train": [...], "test": [...]}`, or inline
    /// `test=a,b` (remaining references train).
    pub fn parse(arg: &str, all: &BTreeSet<String>) -> Result<Self> {
        if let Some(list) = arg.strip_prefix("test=") {
            let ids: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            return Self::holding_out(all, &ids);
        }
        let text = std::fs::read_to_string(arg).map_err(|e| PipelineError::MissingFile(arg.into(), e))?;
        let s: SplitSpec =
            serde_json::from_str(&text).map_err(|e| PipelineError::Validation(format!("{arg}: {e}")))?;
        s.validate(all)?;
        Ok(s)
    }

    pub fn validate(&self, all: &BTreeSet<String>) -> Result<()> {
        let v = |m: String| Err(PipelineError::Validation(m));
        if let Some(x) = self.train.intersection(&self.test).next() {
            return v(format!("reference {x} is in both train and test"));
        }
        for id in self.train.iter().chain(&self.test) {
            if !all.contains(id) {
                return v(format!("split names unknown reference {id}"));
            }
        }
        if self.train.is_empty() || self.test.is_empty() {
            return v("train and test splits must both be non-empty".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs() -> BTreeSet<String> {
        ["a", "b", "c"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn default_config_is_valid() {
        let c = Config::default();
        c.validate().unwrap();
        assert_eq!(c.distortion_ids().len(), 23);
        assert_eq!(c.metric_ids().unwrap().len(), 6);
        let json = serde_json::to_string(&c).unwrap();
        let back: Config = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        let partial: Config = serde_json::from_str(r#"{"dataset_seed": 5, "levels": [1, 2]}"#).unwrap();
        assert_eq!(partial.levels, vec![1, 2]);
        assert_eq!(partial.model, ModelConfig::default());
    }

    #[test]
    fn invalid_configs() {
        let c = Config { label_scale: (5.0, 1.0), ..Config::default() };
        assert!(c.validate().is_err());
        let c = Config { levels: vec![8], ..Config::default() };
        assert!(c.validate().is_err());
        let c = Config { distortions: Some(vec![25]), adapters: None, ..Config::default() };
        if std::env::var_os(ADAPTERS_ENV).is_none() {
            assert!(c.adapter_config().is_err());
        }
    }

    #[test]
    fn splits() {
        let s = SplitSpec::parse("test=c", &refs()).unwrap();
        assert_eq!(s.train.len(), 2);
        assert!(s.train.is_disjoint(&s.test));
        assert!(SplitSpec::parse("test=a,b,c", &refs()).is_err());
        assert!(SplitSpec::parse("test=zzz", &refs()).is_err());
        let bad = SplitSpec { train: refs(), test: ["a".to_string()].into() };
        assert!(bad.validate(&refs()).is_err());
    }
}
