//! Shared pipeline configuration, read from JSON with defaults for omitted keys.

use serde::{Deserialize, Serialize};

use crate::filter::FilterSpec;
use crate::metrics::JaccardMode;
use crate::preproc::{BackgroundConfig, BinarizeConfig, PreprocConfig};
use crate::splitter::SplitterConfig;

pub const CONFIG_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TilingConfig {
    pub tile_size: usize,
    pub overlap: usize,
    /// Worker threads for tile processing; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Choose the binarization threshold once over the whole slide instead of
    /// per tile.
    pub shared_threshold: bool,
}

impl Default for TilingConfig {
    fn default() -> Self {
        Self { tile_size: 1024, overlap: 128, workers: None, shared_threshold: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub iou_min: f64,
    pub jaccard: JaccardMode,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { iou_min: 0.5, jaccard: JaccardMode::Pixel }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: String,
    pub binarize: BinarizeConfig,
    pub background: BackgroundConfig,
    /// Regions with solidity above this pass through unsplit.
    pub solidity_threshold: f64,
    /// Regions smaller than this are noise.
    pub min_region_px: usize,
    pub splitter: SplitterConfig,
    pub filter: FilterSpec,
    pub tiling: TilingConfig,
    pub metrics: MetricsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let pre = PreprocConfig::default();
        Self {
            version: CONFIG_VERSION.into(),
            binarize: pre.binarize,
            background: pre.background,
            solidity_threshold: pre.solidity_threshold,
            min_region_px: pre.min_region_px,
            splitter: SplitterConfig::default(),
            filter: FilterSpec::default(),
            tiling: TilingConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config: {0}")]
    Invalid(String),
}

impl PipelineConfig {
    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.splitter.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.filter.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.tiling.tile_size == 0 || self.tiling.overlap >= self.tiling.tile_size {
            return Err(ConfigError::Invalid("tiling needs tile_size > overlap".into()));
        }
        if !(self.metrics.iou_min > 0.0 && self.metrics.iou_min <= 1.0) {
            return Err(ConfigError::Invalid("metrics.iou_min must be in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.solidity_threshold) {
            return Err(ConfigError::Invalid("solidity_threshold must be in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn preproc(&self) -> PreprocConfig {
        PreprocConfig {
            binarize: self.binarize.clone(),
            background: self.background.clone(),
            min_region_px: self.min_region_px,
            solidity_threshold: self.solidity_threshold,
        }
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
