//! The multiple-input, mixed-data classifier.
//!
//! Each ROI volume goes through its own 3D vision transformer branch
//! (tubelet embedding, class token, positional table, pre-norm encoder
//! blocks). In mixed mode the tabular features go through a small MLP. All
//! branch embeddings are concatenated and a dense head produces two class
//! probabilities (CN, AD).

mod layers;
mod params;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use layers::{
    add_cls_and_pos, attention_block, encode_image_branch, encode_tokens, extract_tubelets,
    forward, forward_on_tape, fuse_classify, mlp_branch_forward, multi_head_attention,
    tubelet_embed, ModelInput,
};
pub use params::{
    bind_flat, expected_shapes, init_params, register_constants, register_params, shape_audit,
    Dense, EncoderBlock, ImageBranch, ModelParams, ModelWeights, Norm,
};

use crate::error::{config_err, Result};

/// Input volume geometry: slices × height × width × channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageDims {
    pub slices: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageDims {
    pub fn shape(&self) -> [usize; 4] {
        [self.slices, self.height, self.width, self.channels]
    }
}

/// Tubelet extent along (slice, height, width).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tubelet {
    pub t: usize,
    pub h: usize,
    pub w: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    /// Tabular MLP branch plus image branches.
    Mixed,
    /// Image branches only.
    ImageOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub image: ImageDims,
    pub tubelet: Tubelet,
    pub embed_dim: usize,
    pub depth: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    pub dropout_rate: f64,
    pub tabular_dim: usize,
    pub tabular_hidden: Vec<usize>,
    pub num_branches: usize,
    pub num_classes: usize,
    pub mode: FusionMode,
    pub layer_norm_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            image: ImageDims {
                slices: 25,
                height: 32,
                width: 32,
                channels: 3,
            },
            tubelet: Tubelet { t: 5, h: 8, w: 8 },
            embed_dim: 64,
            depth: 4,
            heads: 4,
            mlp_ratio: 4,
            dropout_rate: 0.2,
            tabular_dim: 4,
            tabular_hidden: vec![16, 8],
            num_branches: 1,
            num_classes: 2,
            mode: FusionMode::Mixed,
            layer_norm_eps: 1e-6,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        count_tokens(self.image, self.tubelet)?;
        if self.image.channels == 0 {
            return Err(config_err("channel count must be positive"));
        }
        if self.embed_dim == 0 || self.heads == 0 || !self.embed_dim.is_multiple_of(self.heads) {
            return Err(config_err(format!(
                "embed_dim {} must be a positive multiple of heads {}",
                self.embed_dim, self.heads
            )));
        }
        if self.mlp_ratio == 0 {
            return Err(config_err("mlp_ratio must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(config_err(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if self.num_classes != 2 {
            return Err(config_err("only two classes (CN, AD) are supported"));
        }
        if self.num_branches == 0 {
            return Err(config_err("at least one image branch is required"));
        }
        if self.mode == FusionMode::Mixed {
            if self.tabular_dim == 0 || self.tabular_hidden.is_empty() {
                return Err(config_err("mixed mode needs tabular_dim and tabular_hidden"));
            }
            if self.tabular_hidden.contains(&0) {
                return Err(config_err("tabular hidden widths must be positive"));
            }
        }
        if self.layer_norm_eps < 0.0 {
            return Err(config_err("layer_norm_eps must be non-negative"));
        }
        Ok(())
    }

    pub fn tokens(&self) -> usize {
        count_tokens(self.image, self.tubelet).unwrap_or(0)
    }

    /// Flattened tubelet length t·h·w·C.
    pub fn patch_dim(&self) -> usize {
        self.tubelet.t * self.tubelet.h * self.tubelet.w * self.image.channels
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.heads
    }

    pub fn mlp_hidden(&self) -> usize {
        self.embed_dim * self.mlp_ratio
    }

    pub fn tabular_width(&self) -> usize {
        match self.mode {
            FusionMode::Mixed => self.tabular_hidden.last().copied().unwrap_or(0),
            FusionMode::ImageOnly => 0,
        }
    }

    /// Width of the concatenated branch embeddings.
    pub fn fusion_width(&self) -> usize {
        self.tabular_width() + self.num_branches * self.embed_dim
    }
}

/// Token count `(T/t)·(H/h)·(W/w)`; every extent must divide exactly.
pub fn count_tokens(image: ImageDims, tubelet: Tubelet) -> Result<usize> {
    let pairs = [
        ("slices", image.slices, tubelet.t),
        ("height", image.height, tubelet.h),
        ("width", image.width, tubelet.w),
    ];
    let mut n = 1;
    for (axis, dim, size) in pairs {
        if dim == 0 || size == 0 || dim % size != 0 {
            return Err(config_err(format!(
                "tubelet {size} does not divide {axis} {dim}"
            )));
        }
        n *= dim / size;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(t: usize, h: usize, w: usize) -> ImageDims {
        ImageDims {
            slices: t,
            height: h,
            width: w,
            channels: 3,
        }
    }

    #[test]
    fn token_count_examples() {
        assert_eq!(
            count_tokens(dims(25, 32, 32), Tubelet { t: 5, h: 8, w: 8 }).unwrap(),
            80
        );
        assert_eq!(
            count_tokens(dims(25, 32, 32), Tubelet { t: 25, h: 32, w: 32 }).unwrap(),
            1
        );
        assert!(count_tokens(dims(25, 32, 32), Tubelet { t: 4, h: 8, w: 8 }).is_err());
    }

    #[test]
    fn config_validation() {
        let cfg = ModelConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.tokens(), 80);
        assert_eq!(cfg.fusion_width(), 8 + 64);

        let mut bad = cfg.clone();
        bad.heads = 3;
        assert!(bad.validate().is_err());
        let mut bad = cfg.clone();
        bad.num_classes = 3;
        assert!(bad.validate().is_err());
        let mut bad = cfg.clone();
        bad.dropout_rate = 1.0;
        assert!(bad.validate().is_err());
        let mut img = cfg;
        img.mode = FusionMode::ImageOnly;
        img.tabular_hidden.clear();
        img.validate().unwrap();
        assert_eq!(img.fusion_width(), 64);
    }
}
