use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::convert::Infallible;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{FusionMode, ModelConfig};
use crate::autodiff::{Tape, Var};
use crate::error::{config_err, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Affine map `x·weight + bias`, weight stored (in × out).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: T,
    pub bias: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Norm<T> {
    pub scale: T,
    pub offset: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBlock<T> {
    pub attn_norm: Norm<T>,
    pub query: Dense<T>,
    pub key: Dense<T>,
    pub value: Dense<T>,
    pub output: Dense<T>,
    pub mlp_norm: Norm<T>,
    pub mlp_hidden: Dense<T>,
    pub mlp_out: Dense<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageBranch<T> {
    /// Tubelet projection, (t·h·w·C) × d.
    pub projection: Dense<T>,
    /// 1 × d.
    pub class_token: T,
    /// (N+1) × d.
    pub positions: T,
    pub blocks: Vec<EncoderBlock<T>>,
    pub final_norm: Norm<T>,
}

/// All learnable weights of the model. `T` is [`Tensor`] for stored
/// parameters and [`Var`] once they are registered on a tape.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights<T> {
    pub branches: Vec<ImageBranch<T>>,
    /// Empty in image-only mode.
    pub tabular: Vec<Dense<T>>,
    pub head: Dense<T>,
}

pub type ModelParams = ModelWeights<Tensor>;

impl<T> Dense<T> {
    fn try_map<U, E>(&self, f: &mut impl FnMut(&T) -> Result<U, E>) -> Result<Dense<U>, E> {
        Ok(Dense {
            weight: f(&self.weight)?,
            bias: f(&self.bias)?,
        })
    }

    fn visit<'a>(&'a self, path: &str, f: &mut impl FnMut(&str, &'a T)) {
        f(&format!("{path}.weight"), &self.weight);
        f(&format!("{path}.bias"), &self.bias);
    }

    fn visit_mut(&mut self, path: &str, f: &mut impl FnMut(&str, &mut T)) {
        f(&format!("{path}.weight"), &mut self.weight);
        f(&format!("{path}.bias"), &mut self.bias);
    }
}

impl<T> Norm<T> {
    fn try_map<U, E>(&self, f: &mut impl FnMut(&T) -> Result<U, E>) -> Result<Norm<U>, E> {
        Ok(Norm {
            scale: f(&self.scale)?,
            offset: f(&self.offset)?,
        })
    }

    fn visit<'a>(&'a self, path: &str, f: &mut impl FnMut(&str, &'a T)) {
        f(&format!("{path}.scale"), &self.scale);
        f(&format!("{path}.offset"), &self.offset);
    }

    fn visit_mut(&mut self, path: &str, f: &mut impl FnMut(&str, &mut T)) {
        f(&format!("{path}.scale"), &mut self.scale);
        f(&format!("{path}.offset"), &mut self.offset);
    }
}

impl<T> EncoderBlock<T> {
    fn try_map<U, E>(
        &self,
        f: &mut impl FnMut(&T) -> Result<U, E>,
    ) -> Result<EncoderBlock<U>, E> {
        Ok(EncoderBlock {
            attn_norm: self.attn_norm.try_map(f)?,
            query: self.query.try_map(f)?,
            key: self.key.try_map(f)?,
            value: self.value.try_map(f)?,
            output: self.output.try_map(f)?,
            mlp_norm: self.mlp_norm.try_map(f)?,
            mlp_hidden: self.mlp_hidden.try_map(f)?,
            mlp_out: self.mlp_out.try_map(f)?,
        })
    }

    fn visit<'a>(&'a self, path: &str, f: &mut impl FnMut(&str, &'a T)) {
        self.attn_norm.visit(&format!("{path}.attn_norm"), f);
        self.query.visit(&format!("{path}.query"), f);
        self.key.visit(&format!("{path}.key"), f);
        self.value.visit(&format!("{path}.value"), f);
        self.output.visit(&format!("{path}.output"), f);
        self.mlp_norm.visit(&format!("{path}.mlp_norm"), f);
        self.mlp_hidden.visit(&format!("{path}.mlp_hidden"), f);
        self.mlp_out.visit(&format!("{path}.mlp_out"), f);
    }

    fn visit_mut(&mut self, path: &str, f: &mut impl FnMut(&str, &mut T)) {
        self.attn_norm.visit_mut(&format!("{path}.attn_norm"), f);
        self.query.visit_mut(&format!("{path}.query"), f);
        self.key.visit_mut(&format!("{path}.key"), f);
        self.value.visit_mut(&format!("{path}.value"), f);
        self.output.visit_mut(&format!("{path}.output"), f);
        self.mlp_norm.visit_mut(&format!("{path}.mlp_norm"), f);
        self.mlp_hidden.visit_mut(&format!("{path}.mlp_hidden"), f);
        self.mlp_out.visit_mut(&format!("{path}.mlp_out"), f);
    }
}

impl<T> ImageBranch<T> {
    fn try_map<U, E>(
        &self,
        f: &mut impl FnMut(&T) -> Result<U, E>,
    ) -> Result<ImageBranch<U>, E> {
        Ok(ImageBranch {
            projection: self.projection.try_map(f)?,
            class_token: f(&self.class_token)?,
            positions: f(&self.positions)?,
            blocks: self
                .blocks
                .iter()
                .map(|b| b.try_map(f))
                .collect::<Result<_, E>>()?,
            final_norm: self.final_norm.try_map(f)?,
        })
    }

    fn visit<'a>(&'a self, path: &str, f: &mut impl FnMut(&str, &'a T)) {
        self.projection.visit(&format!("{path}.projection"), f);
        f(&format!("{path}.class_token"), &self.class_token);
        f(&format!("{path}.positions"), &self.positions);
        for (i, b) in self.blocks.iter().enumerate() {
            b.visit(&format!("{path}.block{i}"), f);
        }
        self.final_norm.visit(&format!("{path}.final_norm"), f);
    }

    fn visit_mut(&mut self, path: &str, f: &mut impl FnMut(&str, &mut T)) {
        self.projection.visit_mut(&format!("{path}.projection"), f);
        f(&format!("{path}.class_token"), &mut self.class_token);
        f(&format!("{path}.positions"), &mut self.positions);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_mut(&format!("{path}.block{i}"), f);
        }
        self.final_norm.visit_mut(&format!("{path}.final_norm"), f);
    }
}

impl<T> ModelWeights<T> {
    pub fn try_map<U, E>(
        &self,
        f: &mut impl FnMut(&T) -> Result<U, E>,
    ) -> Result<ModelWeights<U>, E> {
        Ok(ModelWeights {
            branches: self
                .branches
                .iter()
                .map(|b| b.try_map(f))
                .collect::<Result<_, E>>()?,
            tabular: self
                .tabular
                .iter()
                .map(|d| d.try_map(f))
                .collect::<Result<_, E>>()?,
            head: self.head.try_map(f)?,
        })
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> ModelWeights<U> {
        let r: Result<_, Infallible> = self.try_map(&mut |t| Ok(f(t)));
        match r {
            Ok(w) => w,
            Err(never) => match never {},
        }
    }

    /// Visits every weight with its dotted name, in a fixed order shared by
    /// [`ModelWeights::visit_mut`] and [`ModelWeights::try_map`].
    pub fn visit<'a>(&'a self, mut f: impl FnMut(&str, &'a T)) {
        for (i, b) in self.branches.iter().enumerate() {
            b.visit(&format!("branch{i}"), &mut f);
        }
        for (i, d) in self.tabular.iter().enumerate() {
            d.visit(&format!("tabular.layer{i}"), &mut f);
        }
        self.head.visit("head", &mut f);
    }

    pub fn visit_mut(&mut self, mut f: impl FnMut(&str, &mut T)) {
        for (i, b) in self.branches.iter_mut().enumerate() {
            b.visit_mut(&format!("branch{i}"), &mut f);
        }
        for (i, d) in self.tabular.iter_mut().enumerate() {
            d.visit_mut(&format!("tabular.layer{i}"), &mut f);
        }
        self.head.visit_mut("head", &mut f);
    }

    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(|name, _| out.push(String::from(name)));
        out
    }

    pub fn values(&self) -> Vec<&T> {
        let mut out = Vec::new();
        self.visit(|_, v| out.push(v));
        out
    }
}

impl ModelParams {
    /// Zero-filled parameters with every shape derived from `cfg`.
    pub fn zeros(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.embed_dim;
        let dense = |i: usize, o: usize| Dense {
            weight: Tensor::zeros(&[i, o]),
            bias: Tensor::zeros(&[o]),
        };
        let norm = || Norm {
            scale: Tensor::full(&[d], 1.0),
            offset: Tensor::zeros(&[d]),
        };
        let block = || EncoderBlock {
            attn_norm: norm(),
            query: dense(d, d),
            key: dense(d, d),
            value: dense(d, d),
            output: dense(d, d),
            mlp_norm: norm(),
            mlp_hidden: dense(d, cfg.mlp_hidden()),
            mlp_out: dense(cfg.mlp_hidden(), d),
        };
        let branch = || ImageBranch {
            projection: dense(cfg.patch_dim(), d),
            class_token: Tensor::zeros(&[1, d]),
            positions: Tensor::zeros(&[cfg.tokens() + 1, d]),
            blocks: (0..cfg.depth).map(|_| block()).collect(),
            final_norm: norm(),
        };
        let tabular = match cfg.mode {
            FusionMode::Mixed => {
                let mut widths = vec![cfg.tabular_dim];
                widths.extend_from_slice(&cfg.tabular_hidden);
                widths.windows(2).map(|w| dense(w[0], w[1])).collect()
            }
            FusionMode::ImageOnly => Vec::new(),
        };
        Ok(Self {
            branches: (0..cfg.num_branches).map(|_| branch()).collect(),
            tabular,
            head: dense(cfg.fusion_width(), cfg.num_classes),
        })
    }

    pub fn num_params(&self) -> usize {
        self.values().iter().map(|t| t.len()).sum()
    }

    /// All parameters concatenated in visit order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(|_, t| out.extend_from_slice(t.data()));
        out
    }

    /// Overwrites every parameter from a flat vector in visit order.
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(config_err(format!(
                "flat vector has {} values, model has {}",
                flat.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        self.visit_mut(|_, t| {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        });
        Ok(())
    }
}

/// Parameter names and shapes implied by `cfg`, computed independently of
/// [`ModelParams::zeros`].
pub fn expected_shapes(cfg: &ModelConfig) -> Result<Vec<(String, Vec<usize>)>> {
    cfg.validate()?;
    let d = cfg.embed_dim;
    let n = (cfg.image.slices / cfg.tubelet.t)
        * (cfg.image.height / cfg.tubelet.h)
        * (cfg.image.width / cfg.tubelet.w);
    let patch = cfg.tubelet.t * cfg.tubelet.h * cfg.tubelet.w * cfg.image.channels;
    let hidden = d * cfg.mlp_ratio;
    let mut out: Vec<(String, Vec<usize>)> = Vec::new();
    let mut push = |name: String, shape: &[usize]| out.push((name, shape.to_vec()));
    for b in 0..cfg.num_branches {
        let p = format!("branch{b}");
        push(format!("{p}.projection.weight"), &[patch, d]);
        push(format!("{p}.projection.bias"), &[d]);
        push(format!("{p}.class_token"), &[1, d]);
        push(format!("{p}.positions"), &[n + 1, d]);
        for l in 0..cfg.depth {
            let q = format!("{p}.block{l}");
            push(format!("{q}.attn_norm.scale"), &[d]);
            push(format!("{q}.attn_norm.offset"), &[d]);
            for proj in ["query", "key", "value", "output"] {
                push(format!("{q}.{proj}.weight"), &[d, d]);
                push(format!("{q}.{proj}.bias"), &[d]);
            }
            push(format!("{q}.mlp_norm.scale"), &[d]);
            push(format!("{q}.mlp_norm.offset"), &[d]);
            push(format!("{q}.mlp_hidden.weight"), &[d, hidden]);
            push(format!("{q}.mlp_hidden.bias"), &[hidden]);
            push(format!("{q}.mlp_out.weight"), &[hidden, d]);
            push(format!("{q}.mlp_out.bias"), &[d]);
        }
        push(format!("{p}.final_norm.scale"), &[d]);
        push(format!("{p}.final_norm.offset"), &[d]);
    }
    let mut fused = cfg.num_branches * d;
    if cfg.mode == FusionMode::Mixed {
        let mut prev = cfg.tabular_dim;
        for (i, &w) in cfg.tabular_hidden.iter().enumerate() {
            push(format!("tabular.layer{i}.weight"), &[prev, w]);
            push(format!("tabular.layer{i}.bias"), &[w]);
            prev = w;
        }
        fused += prev;
    }
    push(String::from("head.weight"), &[fused, cfg.num_classes]);
    push(String::from("head.bias"), &[cfg.num_classes]);
    Ok(out)
}

/// Checks that `params` carries exactly the names and shapes implied by
/// `cfg`, in order.
pub fn shape_audit(cfg: &ModelConfig, params: &ModelParams) -> Result<()> {
    let expected = expected_shapes(cfg)?;
    let mut actual: Vec<(String, Vec<usize>)> = Vec::new();
    params.visit(|name, t| actual.push((String::from(name), t.shape().to_vec())));
    if actual.len() != expected.len() {
        return Err(config_err(format!(
            "parameter count {} differs from expected {}",
            actual.len(),
            expected.len()
        )));
    }
    for ((an, ashape), (en, eshape)) in actual.iter().zip(&expected) {
        if an != en || ashape != eshape {
            return Err(config_err(format!(
                "parameter {an} {ashape:?} does not match expected {en} {eshape:?}"
            )));
        }
    }
    Ok(())
}

const INIT_STD: f64 = 0.02;

fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, std: f64) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if (-2.0..=2.0).contains(&z) {
            return z * std;
        }
    }
}

/// Dense and projection weights ~ N(0, 0.02²) truncated at two standard
/// deviations; positional tables ~ N(0, 0.02²); biases, offsets and class
/// tokens zero; layer-norm scales one.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(cfg)?;
    let mut rng = rng::seeded(seed);
    params.visit_mut(|name, t| {
        if name.ends_with(".weight") {
            t.data_mut()
                .iter_mut()
                .for_each(|v| *v = truncated_normal(&mut rng, INIT_STD));
        } else if name.ends_with(".positions") {
            t.data_mut().iter_mut().for_each(|v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = z * INIT_STD;
            });
        }
    });
    Ok(params)
}

/// Records every parameter as a gradient-tracking leaf.
pub fn register_params(tape: &mut Tape, params: &ModelParams) -> ModelWeights<Var> {
    params.map(|t| tape.param(t.clone()))
}

/// Records every parameter as a constant (inference).
pub fn register_constants(tape: &mut Tape, params: &ModelParams) -> ModelWeights<Var> {
    params.map(|t| tape.constant(t.clone()))
}

/// Carves a flat parameter leaf into model-shaped views using `template`
/// for the layout. Used by gradient checks over the whole parameter vector.
pub fn bind_flat(tape: &mut Tape, flat: Var, template: &ModelParams) -> Result<ModelWeights<Var>> {
    let mut offset = 0;
    template.try_map(&mut |t: &Tensor| {
        let part = tape.narrow(flat, 0, offset, t.len())?;
        offset += t.len();
        tape.reshape(part, t.shape())
    })
}
