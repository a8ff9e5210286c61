//! JSON pipeline configuration. Every key is optional and defaults to the
//! reference training setup or the library default.

use mimd_core::data::DEFAULT_SLICE_COUNT;
use mimd_core::model::{FusionMode, ImageDims, ModelConfig, Tubelet};
use mimd_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    // training setup
    pub slice_number: usize,
    pub image_size: [usize; 2],
    pub channels: usize,
    pub initial_learning_rate: f64,
    pub decay_steps: u64,
    pub decay_rate: f64,
    pub optimizer: String,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    // optimizer details
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    // architecture
    pub tubelet: [usize; 3],
    pub embed_dim: usize,
    pub depth: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    pub tabular_hidden: Vec<usize>,
    pub layer_norm_eps: f64,
    // data
    pub split: [f64; 3],
    pub inner_val_ratio: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        Self {
            slice_number: DEFAULT_SLICE_COUNT,
            image_size: [m.image.height, m.image.width],
            channels: m.image.channels,
            initial_learning_rate: t.initial_lr,
            decay_steps: t.decay_steps,
            decay_rate: t.decay_rate,
            optimizer: "Adam".into(),
            dropout: t.dropout,
            batch_size: t.batch_size,
            epochs: t.epochs,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
            tubelet: [m.tubelet.t, m.tubelet.h, m.tubelet.w],
            embed_dim: m.embed_dim,
            depth: m.depth,
            heads: m.heads,
            mlp_ratio: m.mlp_ratio,
            tabular_hidden: m.tabular_hidden,
            layer_norm_eps: m.layer_norm_eps,
            split: [0.70, 0.15, 0.15],
            inner_val_ratio: 0.15,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&std::path::Path>) -> Result<Self> {
        let cfg: Self = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(crate::error::Error::io(p))?;
                serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.optimizer != "Adam" {
            return Err(usage(format!("optimizer {:?} is not supported (only Adam)", self.optimizer)));
        }
        self.train_config(0).validate()?;
        self.model_config(FusionMode::Mixed, 1).validate()?;
        if !(0.0..1.0).contains(&self.inner_val_ratio) {
            return Err(usage("inner_val_ratio must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn model_config(&self, mode: FusionMode, branches: usize) -> ModelConfig {
        ModelConfig {
            image: ImageDims {
                slices: self.slice_number,
                height: self.image_size[0],
                width: self.image_size[1],
                channels: self.channels,
            },
            tubelet: Tubelet {
                t: self.tubelet[0],
                h: self.tubelet[1],
                w: self.tubelet[2],
            },
            embed_dim: self.embed_dim,
            depth: self.depth,
            heads: self.heads,
            mlp_ratio: self.mlp_ratio,
            dropout_rate: self.dropout,
            tabular_hidden: self.tabular_hidden.clone(),
            num_branches: branches,
            mode,
            layer_norm_eps: self.layer_norm_eps,
            ..ModelConfig::default()
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            initial_lr: self.initial_learning_rate,
            decay_steps: self.decay_steps,
            decay_rate: self.decay_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            dropout: self.dropout,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            seed,
        }
    }

    pub fn crop(&self) -> (usize, usize) {
        (self.image_size[0], self.image_size[1])
    }

    /// Applies a tuner assignment by key name.
    pub fn apply_override(&mut self, key: &str, value: f64) -> Result<()> {
        let whole = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(usage(format!("{key} needs a positive integer, got {v}")))
            }
        };
        match key {
            "initial_lr" | "initial_learning_rate" => self.initial_learning_rate = value,
            "dropout" => self.dropout = value,
            "batch_size" => self.batch_size = whole(value)?,
            "tubelet_t" => self.tubelet[0] = whole(value)?,
            "tubelet_h" => self.tubelet[1] = whole(value)?,
            "tubelet_w" => self.tubelet[2] = whole(value)?,
            "embed_dim" => self.embed_dim = whole(value)?,
            "depth" => self.depth = whole(value)?,
            "heads" => self.heads = whole(value)?,
            "mlp_ratio" => self.mlp_ratio = whole(value)?,
            "decay_rate" => self.decay_rate = value,
            other => return Err(usage(format!("unknown tunable parameter {other:?}"))),
        }
        Ok(())
    }
}

pub fn parse_mode(s: &str) -> Result<FusionMode> {
    match s {
        "mixed" => Ok(FusionMode::Mixed),
        "image-only" => Ok(FusionMode::ImageOnly),
        other => Err(usage(format!("unknown mode {other:?} (mixed or image-only)"))),
    }
}

pub fn mode_name(mode: FusionMode) -> &'static str {
    match mode {
        FusionMode::Mixed => "mixed",
        FusionMode::ImageOnly => "image-only",
    }
}
