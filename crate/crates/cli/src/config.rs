//! TOML run configuration. Every section is optional; missing keys take the
//! library defaults and unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use outfitfuse_core::compatibility::LossWeights;
use outfitfuse_core::dataset::SyntheticSpec;
use outfitfuse_core::model::{FusionKind, ModelConfig};
use outfitfuse_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Dataset manifest.
    pub data: Option<PathBuf>,
    /// Output file or directory, depending on the command.
    pub out: Option<PathBuf>,
    pub model: ModelSection,
    pub loss: LossSection,
    pub train: TrainSection,
    pub synthetic: SyntheticSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub fusion: String,
    pub common_dim: usize,
    pub compat_dim: usize,
    pub hidden_dim: usize,
    pub hops: usize,
    pub factor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub lambda_vsim: f64,
    pub lambda_tsim: f64,
    pub lambda_vse: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub types: usize,
    pub styles: usize,
    pub train_outfits: usize,
    pub valid_outfits: usize,
    pub test_outfits: usize,
    pub min_outfit_size: usize,
    pub max_outfit_size: usize,
    pub regions: usize,
    pub words: usize,
    pub region_dim: usize,
    pub word_dim: usize,
    pub signal_rows: usize,
    pub amplitude: f64,
    pub noise: f64,
    pub style_jitter: f64,
    pub undescribed_fraction: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            fusion: m.fusion.as_str().into(),
            common_dim: m.common_dim,
            compat_dim: m.compat_dim,
            hidden_dim: m.hidden_dim,
            hops: m.hops,
            factor: m.factor,
        }
    }
}

impl Default for LossSection {
    fn default() -> Self {
        let w = LossWeights::default();
        Self {
            lambda_vsim: w.vsim,
            lambda_tsim: w.tsim,
            lambda_vse: w.vse,
            margin: w.margin,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            runs: t.runs,
        }
    }
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        Self {
            types: s.types,
            styles: s.styles,
            train_outfits: s.train_outfits,
            valid_outfits: s.valid_outfits,
            test_outfits: s.test_outfits,
            min_outfit_size: s.min_outfit_size,
            max_outfit_size: s.max_outfit_size,
            regions: s.regions,
            words: s.words,
            region_dim: s.region_dim,
            word_dim: s.word_dim,
            signal_rows: s.signal_rows,
            amplitude: s.amplitude,
            noise: s.noise,
            style_jitter: s.style_jitter,
            undescribed_fraction: s.undescribed_fraction,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn fusion(&self) -> Result<FusionKind> {
        match FusionKind::parse(&self.model.fusion) {
            Some(k) => Ok(k),
            None => bail!(
                "unknown fusion '{}', expected one of {}",
                self.model.fusion,
                FusionKind::ALL.map(|k| k.as_str()).join(", ")
            ),
        }
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let m = &self.model;
        let config = ModelConfig {
            fusion: self.fusion()?,
            common_dim: m.common_dim,
            compat_dim: m.compat_dim,
            hidden_dim: m.hidden_dim,
            hops: m.hops,
            factor: m.factor,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            vsim: self.loss.lambda_vsim,
            tsim: self.loss.lambda_tsim,
            vse: self.loss.lambda_vse,
            margin: self.loss.margin,
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let config = TrainConfig {
            model: self.model_config()?,
            weights: self.loss_weights(),
            epochs: self.train.epochs,
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            seed: self.seed,
            runs: self.train.runs,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        let s = &self.synthetic;
        SyntheticSpec {
            types: s.types,
            styles: s.styles,
            train_outfits: s.train_outfits,
            valid_outfits: s.valid_outfits,
            test_outfits: s.test_outfits,
            min_outfit_size: s.min_outfit_size,
            max_outfit_size: s.max_outfit_size,
            regions: s.regions,
            words: s.words,
            region_dim: s.region_dim,
            word_dim: s.word_dim,
            signal_rows: s.signal_rows,
            amplitude: s.amplitude,
            noise: s.noise,
            style_jitter: s.style_jitter,
            undescribed_fraction: s.undescribed_fraction,
        }
    }
}
