use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use seqlayout::augment::AugmentConfig;
use seqlayout::bacs::{ArQuantizer, CodecConfig, PositionMode};
use seqlayout::graph::FilterConfig;
use seqlayout::SleuConfig;

/// Every knob of the pipeline in one flat namespace; read from JSON or
/// `key = value` text, then overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub grid_max: u32,
    pub ar_interval: f64,
    pub ar_min: f64,
    pub ar_bins: u32,
    pub mode: PositionMode,
    pub include_imgar: bool,

    pub min_object_class_count: u64,
    pub min_relationship_class_count: u64,
    pub min_box_side: f64,
    pub min_objects: usize,
    pub max_objects: usize,
    pub max_relationships: usize,

    pub max_variants: usize,
    pub seed: u64,

    pub t_iou: Vec<f64>,
    pub max_order: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let codec = CodecConfig::default();
        let filter = FilterConfig::default();
        let augment = AugmentConfig::default();
        Self {
            grid_max: codec.grid_max,
            ar_interval: codec.ar.interval,
            ar_min: codec.ar.minimum,
            ar_bins: codec.ar.bins,
            mode: codec.mode,
            include_imgar: codec.include_imgar,
            min_object_class_count: filter.min_object_class_count,
            min_relationship_class_count: filter.min_relationship_class_count,
            min_box_side: filter.min_box_side,
            min_objects: filter.min_objects,
            max_objects: filter.max_objects,
            max_relationships: filter.max_relationships,
            max_variants: augment.max_variants,
            seed: augment.seed,
            t_iou: vec![0.0, 0.25, 0.5, 0.75],
            max_order: 3,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("config {}", path.display()))
    }

    /// JSON object if the text starts with `{`, otherwise `key = value` lines
    /// (`#` starts a comment).
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            return Ok(serde_json::from_str(text)?);
        }
        let mut map = Map::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`", i + 1);
            };
            let value = value.trim();
            let parsed = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.into()));
            map.insert(key.trim().to_owned(), parsed);
        }
        Ok(serde_json::from_value(Value::Object(map))?)
    }

    pub fn validate(&self) -> Result<()> {
        self.codec().validate()?;
        self.filter().validate().map_err(anyhow::Error::msg)?;
        self.augment().validate().map_err(anyhow::Error::msg)?;
        if self.t_iou.is_empty() {
            bail!("at least one t_iou threshold is required");
        }
        for cfg in self.sleu() {
            cfg.validate()?;
        }
        Ok(())
    }

    pub fn codec(&self) -> CodecConfig {
        CodecConfig {
            grid_max: self.grid_max,
            ar: ArQuantizer {
                interval: self.ar_interval,
                minimum: self.ar_min,
                bins: self.ar_bins,
            },
            mode: self.mode,
            include_imgar: self.include_imgar,
        }
    }

    pub fn filter(&self) -> FilterConfig {
        FilterConfig {
            min_object_class_count: self.min_object_class_count,
            min_relationship_class_count: self.min_relationship_class_count,
            min_box_side: self.min_box_side,
            min_objects: self.min_objects,
            max_objects: self.max_objects,
            max_relationships: self.max_relationships,
        }
    }

    pub fn augment(&self) -> AugmentConfig {
        AugmentConfig {
            max_variants: self.max_variants,
            max_relationships: self.max_relationships,
            seed: self.seed,
        }
    }

    pub fn sleu(&self) -> Vec<SleuConfig<f64>> {
        self.t_iou
            .iter()
            .map(|&t| SleuConfig::uniform(t, self.max_order))
            .collect()
    }
}
