//! Run configuration. Values resolve as command-line flag, then config file
//! (or manifest), then built-in default.

use std::fs;
use std::path::{Path, PathBuf};

use dualpath_core::pipeline::{PipelineParams, Variant};
use dualpath_core::SyntheticConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::DataPaths;

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset files; when absent the synthetic generator is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataPaths>,
    pub synthetic: SyntheticConfig,
    pub pipeline: PipelineParams,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Run seeds on separate threads. Each seed is still computed on one
    /// thread, so results match the sequential path.
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            synthetic: SyntheticConfig::default(),
            pipeline: PipelineParams::default(),
            seeds: DEFAULT_SEEDS.to_vec(),
            output_dir: PathBuf::from("out"),
            parallel: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        let p = &self.pipeline;
        dualpath_core::KernelBank::new(p.filter_order)?;
        p.knn.validate(usize::MAX)?;
        p.train.validate()?;
        p.gbdt.validate()?;
        if self.data.is_none() {
            self.synthetic.validate()?;
        }
        if !p.f1_threshold.is_finite() {
            return Err(Error::Config("f1_threshold must be finite".into()));
        }
        if p.rec_k == Some(0) {
            return Err(Error::Config("rec_k must be positive".into()));
        }
        Ok(())
    }

    pub fn variant(&self) -> Variant {
        self.pipeline.variant
    }
}

/// Parses `0,1,2`, `0..5` (exclusive) or `0..=4`.
pub fn parse_seeds(s: &str) -> std::result::Result<Vec<u64>, String> {
    let s = s.trim();
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| format!("invalid seed `{t}`"));
    if let Some((a, b)) = s.split_once("..=") {
        return Ok((num(a)?..=num(b)?).collect());
    }
    if let Some((a, b)) = s.split_once("..") {
        return Ok((num(a)?..num(b)?).collect());
    }
    s.split(',').map(num).collect()
}

/// Flat `key = value` synthetic generator settings, as written by `synth`.
pub fn read_synthetic_toml(path: &Path) -> Result<SyntheticConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use dualpath_core::knn::Metric;

    #[test]
    fn toml_round_trip_and_defaults() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml_str("").unwrap(), cfg);
    }

    #[test]
    fn partial_tables_keep_defaults() {
        let cfg = RunConfig::from_toml_str(
            "seeds = [3]\n[pipeline]\nfilter_order = 4\nvariant = \"no_knn\"\n[pipeline.knn]\nmetric = \"cosine\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seeds, vec![3]);
        assert_eq!(cfg.pipeline.filter_order, 4);
        assert_eq!(cfg.pipeline.variant, Variant::NoKnn);
        assert_eq!(cfg.pipeline.knn.metric, Metric::Cosine);
        assert_eq!(cfg.pipeline.knn.k, 20);
        assert_eq!(cfg.pipeline.train.epochs, 200);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_toml_str("sedes = [1]").is_err());
        let cfg = RunConfig {
            seeds: vec![],
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.pipeline.filter_order = 9;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..5").unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(parse_seeds("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_seeds("7, 1").unwrap(), vec![7, 1]);
        assert!(parse_seeds("a").is_err());
    }
}
