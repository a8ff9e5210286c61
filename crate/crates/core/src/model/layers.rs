use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::params::{register_constants, Dense, EncoderBlock, ImageBranch, ModelParams, ModelWeights, Norm};
use super::{FusionMode, ModelConfig};
use crate::autodiff::{Tape, Var};
use crate::error::{config_err, invalid, Error, Result};
use crate::math;
use crate::tensor::Tensor;

/// One model input: the tabular feature vector (mixed mode) and one
/// `T×H×W×C` volume per image branch.
#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a> {
    pub tabular: Option<&'a [f64]>,
    pub images: &'a [Tensor],
}

fn dense(tape: &mut Tape, x: Var, layer: &Dense<Var>) -> Result<Var> {
    let y = tape.matmul(x, layer.weight)?;
    tape.add(y, layer.bias)
}

fn norm(tape: &mut Tape, x: Var, layer: &Norm<Var>, eps: f64) -> Result<Var> {
    tape.layer_norm(x, layer.scale, layer.offset, eps)
}

/// Rearranges a `T×H×W×C` volume into an `N × (t·h·w·C)` matrix of
/// non-overlapping tubelets.
///
/// Rows follow (slice block, row block, column block) in row-major order.
/// Within a row the tubelet is flattened slice-major, then row, column and
/// channel.
pub fn extract_tubelets(volume: &Tensor, cfg: &ModelConfig) -> Result<Tensor> {
    let dims = cfg.image.shape();
    if volume.shape() != dims {
        return Err(Error::ShapeMismatch {
            op: "tubelet_embed",
            lhs: volume.shape().to_vec(),
            rhs: dims.to_vec(),
        });
    }
    let [depth, height, width, channels] = dims;
    let (t, h, w) = (cfg.tubelet.t, cfg.tubelet.h, cfg.tubelet.w);
    let (nt, nh, nw) = (depth / t, height / h, width / w);
    let patch = cfg.patch_dim();
    let src = volume.data();
    let mut out = Vec::with_capacity(nt * nh * nw * patch);
    for bt in 0..nt {
        for bh in 0..nh {
            for bw in 0..nw {
                for dt in 0..t {
                    for dy in 0..h {
                        let z = bt * t + dt;
                        let y = bh * h + dy;
                        let start = ((z * height + y) * width + bw * w) * channels;
                        out.extend_from_slice(&src[start..start + w * channels]);
                    }
                }
            }
        }
    }
    Tensor::new(alloc::vec![nt * nh * nw, patch], out)
}

/// Tubelet tokens `P·E + b`, shape `N × d`.
pub fn tubelet_embed(
    tape: &mut Tape,
    volume: &Tensor,
    projection: &Dense<Var>,
    cfg: &ModelConfig,
) -> Result<Var> {
    let patches = tape.constant(extract_tubelets(volume, cfg)?);
    dense(tape, patches, projection)
}

/// Prepends the class token and adds the positional table: `(N+1) × d`.
pub fn add_cls_and_pos(tape: &mut Tape, tokens: Var, branch: &ImageBranch<Var>) -> Result<Var> {
    let with_cls = tape.concat(&[branch.class_token, tokens], 0)?;
    if tape.shape(with_cls) != tape.shape(branch.positions) {
        return Err(Error::ShapeMismatch {
            op: "add_cls_and_pos",
            lhs: tape.shape(with_cls).to_vec(),
            rhs: tape.shape(branch.positions).to_vec(),
        });
    }
    tape.add(with_cls, branch.positions)
}

/// Multi-head scaled dot-product self-attention over all `M` tokens.
/// Returns the output projection and the per-head attention matrices
/// (before dropout).
pub fn multi_head_attention<R: Rng + ?Sized>(
    tape: &mut Tape,
    x: Var,
    block: &EncoderBlock<Var>,
    cfg: &ModelConfig,
    training: bool,
    rng: &mut R,
) -> Result<(Var, Vec<Var>)> {
    let dh = cfg.head_dim();
    let scale = 1.0 / math::sqrt(dh as f64);
    let q = dense(tape, x, &block.query)?;
    let k = dense(tape, x, &block.key)?;
    let v = dense(tape, x, &block.value)?;
    let mut heads = Vec::with_capacity(cfg.heads);
    let mut weights = Vec::with_capacity(cfg.heads);
    for h in 0..cfg.heads {
        let qh = tape.narrow(q, 1, h * dh, dh)?;
        let kh = tape.narrow(k, 1, h * dh, dh)?;
        let vh = tape.narrow(v, 1, h * dh, dh)?;
        let kt = tape.transpose(kh)?;
        let scores = tape.matmul(qh, kt)?;
        let scores = tape.scale(scores, scale);
        let attn = tape.softmax(scores, 1)?;
        weights.push(attn);
        let attn = tape.dropout(attn, cfg.dropout_rate, training, rng)?;
        heads.push(tape.matmul(attn, vh)?);
    }
    let merged = tape.concat(&heads, 1)?;
    Ok((dense(tape, merged, &block.output)?, weights))
}

/// Pre-norm encoder block: `x + MHSA(LN(x))`, then `x + MLP(LN(x))`.
pub fn attention_block<R: Rng + ?Sized>(
    tape: &mut Tape,
    x: Var,
    block: &EncoderBlock<Var>,
    cfg: &ModelConfig,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    let eps = cfg.layer_norm_eps;
    let h = norm(tape, x, &block.attn_norm, eps)?;
    let (attn, _) = multi_head_attention(tape, h, block, cfg, training, rng)?;
    let x = tape.add(x, attn)?;
    let h = norm(tape, x, &block.mlp_norm, eps)?;
    let h = dense(tape, h, &block.mlp_hidden)?;
    let h = tape.gelu(h);
    let h = dense(tape, h, &block.mlp_out)?;
    let h = tape.dropout(h, cfg.dropout_rate, training, rng)?;
    tape.add(x, h)
}

/// Runs an `N × d` token matrix through the class token, positional table,
/// encoder blocks and final norm, and reads out the class-token row (`1 × d`).
pub fn encode_tokens<R: Rng + ?Sized>(
    tape: &mut Tape,
    tokens: Var,
    branch: &ImageBranch<Var>,
    cfg: &ModelConfig,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    let mut x = add_cls_and_pos(tape, tokens, branch)?;
    for block in &branch.blocks {
        x = attention_block(tape, x, block, cfg, training, rng)?;
    }
    let x = norm(tape, x, &branch.final_norm, cfg.layer_norm_eps)?;
    tape.narrow(x, 0, 0, 1)
}

/// Embeds one ROI volume into a `1 × d` vector.
pub fn encode_image_branch<R: Rng + ?Sized>(
    tape: &mut Tape,
    volume: &Tensor,
    branch: &ImageBranch<Var>,
    cfg: &ModelConfig,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    let tokens = tubelet_embed(tape, volume, &branch.projection, cfg)?;
    encode_tokens(tape, tokens, branch, cfg, training, rng)
}

/// Dense layers with GELU between them; returns the last layer's output
/// (`1 × width`).
pub fn mlp_branch_forward(
    tape: &mut Tape,
    features: &[f64],
    layers: &[Dense<Var>],
    cfg: &ModelConfig,
) -> Result<Var> {
    if features.len() != cfg.tabular_dim {
        return Err(Error::ShapeMismatch {
            op: "mlp_branch",
            lhs: alloc::vec![features.len()],
            rhs: alloc::vec![cfg.tabular_dim],
        });
    }
    if layers.is_empty() {
        return Err(config_err("tabular branch has no layers"));
    }
    let mut x = tape.constant(Tensor::new(alloc::vec![1, features.len()], features.to_vec())?);
    for (i, layer) in layers.iter().enumerate() {
        if i > 0 {
            x = tape.gelu(x);
        }
        x = dense(tape, x, layer)?;
    }
    Ok(x)
}

/// Concatenation, dropout, dense head and softmax: a length-2 probability
/// vector (CN, AD).
pub fn fuse_classify<R: Rng + ?Sized>(
    tape: &mut Tape,
    embeddings: &[Var],
    head: &Dense<Var>,
    cfg: &ModelConfig,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    if embeddings.is_empty() {
        return Err(Error::Empty("branch embeddings"));
    }
    let fused = tape.concat(embeddings, 1)?;
    let fused = tape.dropout(fused, cfg.dropout_rate, training, rng)?;
    let logits = dense(tape, fused, head)?;
    let probs = tape.softmax(logits, 1)?;
    tape.reshape(probs, &[cfg.num_classes])
}

/// The whole model on a tape; returns the probability vector.
pub fn forward_on_tape<R: Rng + ?Sized>(
    tape: &mut Tape,
    input: ModelInput<'_>,
    weights: &ModelWeights<Var>,
    cfg: &ModelConfig,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    if input.images.len() != cfg.num_branches || weights.branches.len() != cfg.num_branches {
        return Err(invalid(format!(
            "model expects {} ROI volumes, got {}",
            cfg.num_branches,
            input.images.len()
        )));
    }
    let mut embeddings = Vec::with_capacity(cfg.num_branches + 1);
    if cfg.mode == FusionMode::Mixed {
        let features = input
            .tabular
            .ok_or_else(|| invalid("mixed mode requires tabular features"))?;
        embeddings.push(mlp_branch_forward(tape, features, &weights.tabular, cfg)?);
    }
    for (volume, branch) in input.images.iter().zip(&weights.branches) {
        embeddings.push(encode_image_branch(tape, volume, branch, cfg, training, rng)?);
    }
    fuse_classify(tape, &embeddings, &weights.head, cfg, training, rng)
}

/// Class probabilities `[p_CN, p_AD]` for one input.
pub fn forward<R: Rng + ?Sized>(
    input: ModelInput<'_>,
    params: &ModelParams,
    cfg: &ModelConfig,
    training: bool,
    rng: &mut R,
) -> Result<[f64; 2]> {
    let mut tape = Tape::new();
    let weights = register_constants(&mut tape, params);
    let probs = forward_on_tape(&mut tape, input, &weights, cfg, training, rng)?;
    let p = tape.value(probs).data();
    Ok([p[0], p[1]])
}
