//! Independent oracles and shared fixtures for the integration tests.
//!
//! Nothing here calls the code it checks except through the public entry
//! point under test.
#![allow(dead_code)]

use mimd_core::autodiff::{grad_check, BinaryKind, Tape, Var};
use mimd_core::data::Class;
use mimd_core::model::{
    attention_block, bind_flat, forward_on_tape, fuse_classify, init_params, mlp_branch_forward,
    multi_head_attention, tubelet_embed, FusionMode, ImageDims, ModelConfig, ModelInput, ModelParams, Tubelet,
};
use mimd_core::{Result, Tensor};

/// splitmix64; test inputs only.
#[derive(Debug, Clone)]
pub struct Mix(pub u64);

impl Mix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u = self.unit().max(1e-300);
        let v = self.unit();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }

    pub fn vec(&mut self, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| scale * self.normal()).collect()
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            xs.swap(i, self.below(i + 1));
        }
    }

    pub fn labels(&mut self, n: usize) -> Vec<Class> {
        (0..n)
            .map(|_| if self.unit() < 0.5 { Class::Cn } else { Class::Ad })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// tubelet embedding

/// Stride-equals-kernel 3D convolution of a `T×H×W×C` volume with kernel
/// `weight[((dt·h + dy)·w + dx)·C + c][o]` plus bias; tokens in
/// (slice block, row block, column block) order.
pub fn conv3d_oracle(volume: &Tensor, weight: &Tensor, bias: &[f64], kernel: (usize, usize, usize)) -> Vec<Vec<f64>> {
    let s = volume.shape();
    let (depth, height, width, channels) = (s[0], s[1], s[2], s[3]);
    let (t, h, w) = kernel;
    let d = bias.len();
    let mut tokens = Vec::new();
    for oz in 0..depth / t {
        for oy in 0..height / h {
            for ox in 0..width / w {
                let mut out = bias.to_vec();
                for dt in 0..t {
                    for dy in 0..h {
                        for dx in 0..w {
                            for c in 0..channels {
                                let x = volume.at(&[oz * t + dt, oy * h + dy, ox * w + dx, c]);
                                let row = ((dt * h + dy) * w + dx) * channels + c;
                                for (o, acc) in out.iter_mut().enumerate() {
                                    *acc += x * weight.at(&[row, o]);
                                }
                            }
                        }
                    }
                }
                debug_assert_eq!(out.len(), d);
                tokens.push(out);
            }
        }
    }
    tokens
}

/// Worst absolute difference between `tubelet_embed` and the convolution
/// oracle on one random input.
pub fn tubelet_case(cfg: &ModelConfig, mix: &mut Mix) -> Result<(f64, usize)> {
    let [t, h, w, c] = cfg.image.shape();
    let volume = Tensor::new(vec![t, h, w, c], mix.vec(t * h * w * c, 1.0))?;
    let patch = cfg.patch_dim();
    let weight = Tensor::new(vec![patch, cfg.embed_dim], mix.vec(patch * cfg.embed_dim, 1.0))?;
    let bias = mix.vec(cfg.embed_dim, 1.0);

    let mut tape = Tape::new();
    let projection = mimd_core::model::Dense {
        weight: tape.constant(weight.clone()),
        bias: tape.constant(Tensor::new(vec![cfg.embed_dim], bias.clone())?),
    };
    let tokens = tubelet_embed(&mut tape, &volume, &projection, cfg)?;
    let got = tape.value(tokens);
    let want = conv3d_oracle(&volume, &weight, &bias, (cfg.tubelet.t, cfg.tubelet.h, cfg.tubelet.w));
    let mut worst: f64 = 0.0;
    for (i, row) in want.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((got.at(&[i, j]) - v).abs());
        }
    }
    Ok((worst, got.shape()[0]))
}

// ---------------------------------------------------------------------------
// gradients

pub const GRAD_TOL: f64 = 1e-5;
pub const GRAD_EPS: f64 = 1e-5;

/// The tiny mixed model used by the whole-model gradient check.
pub fn tiny_config(mode: FusionMode) -> ModelConfig {
    ModelConfig {
        image: ImageDims {
            slices: 2,
            height: 4,
            width: 4,
            channels: 1,
        },
        tubelet: Tubelet { t: 1, h: 2, w: 2 },
        embed_dim: 8,
        depth: 1,
        heads: 2,
        mlp_ratio: 2,
        dropout_rate: 0.0,
        tabular_hidden: vec![4, 3],
        mode,
        ..ModelConfig::default()
    }
}

/// Parameters with O(1) entries so no gradient is vanishingly small.
pub fn spread_params(cfg: &ModelConfig, seed: u64) -> ModelParams {
    let mut p = init_params(cfg, seed).expect("valid config");
    let mut mix = Mix(seed ^ 0xabcd);
    p.visit_mut(|_, t| t.data_mut().iter_mut().for_each(|v| *v = 0.5 * mix.normal()));
    p
}

/// Fixed pseudo-random weighting that turns any tensor into a scalar.
fn weigh(tape: &mut Tape, x: Var, seed: u64) -> Result<Var> {
    let shape = tape.shape(x).to_vec();
    let n: usize = shape.iter().product();
    let mut mix = Mix(seed);
    let w = tape.constant(Tensor::new(shape, mix.vec(n, 1.0))?);
    let y = tape.mul(x, w)?;
    Ok(tape.sum(y))
}

fn slice(tape: &mut Tape, theta: Var, start: usize, shape: &[usize]) -> Result<Var> {
    let n = shape.iter().product();
    let part = tape.narrow(theta, 0, start, n)?;
    tape.reshape(part, shape)
}

type CaseFn = Box<dyn Fn(&mut Tape, Var) -> Result<Var>>;
type Case = (&'static str, Vec<f64>, CaseFn);

fn layer_cases() -> Vec<Case> {
    let mut mix = Mix(17);
    let mut cases: Vec<Case> = Vec::new();
    let mut add = |name: &'static str, n: usize, f: CaseFn| {
        cases.push((name, mix.vec(n, 1.0), f));
    };
    add("add (broadcast)", 16, Box::new(|t, x| {
        let a = slice(t, x, 0, &[3, 4])?;
        let b = slice(t, x, 12, &[4])?;
        let y = t.add(a, b)?;
        weigh(t, y, 1)
    }));
    add("sub", 12, Box::new(|t, x| {
        let a = slice(t, x, 0, &[2, 3])?;
        let b = slice(t, x, 6, &[2, 3])?;
        let y = t.sub(a, b)?;
        weigh(t, y, 2)
    }));
    add("mul", 12, Box::new(|t, x| {
        let a = slice(t, x, 0, &[2, 3])?;
        let b = slice(t, x, 6, &[2, 3])?;
        let y = t.elementwise(BinaryKind::Mul, a, b)?;
        weigh(t, y, 3)
    }));
    add("scale", 6, Box::new(|t, x| {
        let y = t.scale(x, -1.7);
        weigh(t, y, 4)
    }));
    add("matmul", 20, Box::new(|t, x| {
        let a = slice(t, x, 0, &[3, 4])?;
        let b = slice(t, x, 12, &[4, 2])?;
        let y = t.matmul(a, b)?;
        weigh(t, y, 5)
    }));
    add("transpose", 12, Box::new(|t, x| {
        let a = slice(t, x, 0, &[3, 4])?;
        let y = t.transpose(a)?;
        weigh(t, y, 6)
    }));
    add("softmax (rows)", 12, Box::new(|t, x| {
        let a = slice(t, x, 0, &[3, 4])?;
        let y = t.softmax(a, 1)?;
        weigh(t, y, 7)
    }));
    add("softmax (columns)", 12, Box::new(|t, x| {
        let a = slice(t, x, 0, &[3, 4])?;
        let y = t.softmax(a, 0)?;
        weigh(t, y, 8)
    }));
    add("layer norm", 20, Box::new(|t, x| {
        let a = slice(t, x, 0, &[3, 4])?;
        let g = slice(t, x, 12, &[4])?;
        let b = slice(t, x, 16, &[4])?;
        let y = t.layer_norm(a, g, b, 1e-6)?;
        weigh(t, y, 9)
    }));
    add("gelu", 10, Box::new(|t, x| {
        let y = t.gelu(x);
        weigh(t, y, 10)
    }));
    add("dropout (fixed mask)", 12, Box::new(|t, x| {
        let mut rng = mimd_core::rng::seeded(11);
        let y = t.dropout(x, 0.3, true, &mut rng)?;
        weigh(t, y, 11)
    }));
    add("concat", 14, Box::new(|t, x| {
        let a = slice(t, x, 0, &[2, 3])?;
        let b = slice(t, x, 6, &[2, 4])?;
        let y = t.concat(&[a, b], 1)?;
        weigh(t, y, 12)
    }));
    add("narrow", 12, Box::new(|t, x| {
        let a = slice(t, x, 0, &[3, 4])?;
        let y = t.narrow(a, 1, 1, 2)?;
        weigh(t, y, 13)
    }));
    add("mean", 7, Box::new(|t, x| {
        let y = t.mul(x, x)?;
        Ok(t.mean(y))
    }));
    add("cross entropy", 2, Box::new(|t, x| {
        let p = t.softmax(x, 0)?;
        t.cross_entropy(p, 1)
    }));
    cases
}

/// Scalar loss of the tiny model for one fixed input, parameters carved
/// from `theta`.
fn model_loss(cfg: &ModelConfig, template: &ModelParams, tape: &mut Tape, theta: Var) -> Result<Var> {
    let weights = bind_flat(tape, theta, template)?;
    let mut mix = Mix(99);
    let [t, h, w, c] = cfg.image.shape();
    let image = Tensor::new(vec![t, h, w, c], mix.vec(t * h * w * c, 1.0))?;
    let tabular = mix.vec(cfg.tabular_dim, 1.0);
    let input = ModelInput {
        tabular: (cfg.mode == FusionMode::Mixed).then_some(tabular.as_slice()),
        images: std::slice::from_ref(&image),
    };
    let mut rng = mimd_core::rng::seeded(0);
    let probs = forward_on_tape(tape, input, &weights, cfg, false, &mut rng)?;
    tape.cross_entropy(probs, 1)
}

fn model_cases() -> Vec<Case> {
    let mut cases: Vec<Case> = Vec::new();
    let cfg = tiny_config(FusionMode::Mixed);
    let params = spread_params(&cfg, 5);
    let theta = params.flatten();

    let (c, p) = (cfg.clone(), params.clone());
    cases.push(("tubelet embedding", theta.clone(), Box::new(move |t, x| {
        let w = bind_flat(t, x, &p)?;
        let mut mix = Mix(21);
        let [d, h, wd, ch] = c.image.shape();
        let image = Tensor::new(vec![d, h, wd, ch], mix.vec(d * h * wd * ch, 1.0))?;
        let y = tubelet_embed(t, &image, &w.branches[0].projection, &c)?;
        weigh(t, y, 22)
    })));
    let (c, p) = (cfg.clone(), params.clone());
    cases.push(("multi-head attention", theta.clone(), Box::new(move |t, x| {
        let w = bind_flat(t, x, &p)?;
        let mut mix = Mix(23);
        let tokens = t.constant(Tensor::new(vec![c.tokens() + 1, c.embed_dim], mix.vec((c.tokens() + 1) * c.embed_dim, 1.0))?);
        let mut rng = mimd_core::rng::seeded(0);
        let (y, _) = multi_head_attention(t, tokens, &w.branches[0].blocks[0], &c, false, &mut rng)?;
        weigh(t, y, 24)
    })));
    let (c, p) = (cfg.clone(), params.clone());
    cases.push(("encoder block", theta.clone(), Box::new(move |t, x| {
        let w = bind_flat(t, x, &p)?;
        let mut mix = Mix(25);
        let tokens = t.constant(Tensor::new(vec![c.tokens() + 1, c.embed_dim], mix.vec((c.tokens() + 1) * c.embed_dim, 1.0))?);
        let mut rng = mimd_core::rng::seeded(0);
        let y = attention_block(t, tokens, &w.branches[0].blocks[0], &c, false, &mut rng)?;
        weigh(t, y, 26)
    })));
    let (c, p) = (cfg.clone(), params.clone());
    cases.push(("tabular MLP", theta.clone(), Box::new(move |t, x| {
        let w = bind_flat(t, x, &p)?;
        let features = Mix(27).vec(c.tabular_dim, 1.0);
        let y = mlp_branch_forward(t, &features, &w.tabular, &c)?;
        weigh(t, y, 28)
    })));
    let (c, p) = (cfg.clone(), params.clone());
    cases.push(("fusion head", theta.clone(), Box::new(move |t, x| {
        let w = bind_flat(t, x, &p)?;
        let mut mix = Mix(29);
        let a = t.constant(Tensor::new(vec![1, c.tabular_width()], mix.vec(c.tabular_width(), 1.0))?);
        let b = t.constant(Tensor::new(vec![1, c.embed_dim], mix.vec(c.embed_dim, 1.0))?);
        let mut rng = mimd_core::rng::seeded(0);
        let y = fuse_classify(t, &[a, b], &w.head, &c, false, &mut rng)?;
        t.cross_entropy(y, 0)
    })));
    let (c, p) = (cfg.clone(), params.clone());
    cases.push(("full mixed model", theta, Box::new(move |t, x| model_loss(&c, &p, t, x))));

    let cfg = tiny_config(FusionMode::ImageOnly);
    let params = spread_params(&cfg, 6);
    let theta = params.flatten();
    cases.push(("full image-only model", theta, Box::new(move |t, x| model_loss(&cfg, &params, t, x))));
    cases
}

/// Worst relative gradient error per case.
pub fn gradient_suite() -> Result<Vec<(&'static str, f64)>> {
    layer_cases()
        .into_iter()
        .chain(model_cases())
        .map(|(name, theta, f)| Ok((name, grad_check(&theta, GRAD_EPS, |t, x| f(t, x))?)))
        .collect()
}

// ---------------------------------------------------------------------------
// statistics

/// AUC as the fraction of (AD, CN) pairs ranked correctly, ties half.
pub fn pairwise_auc(scores: &[f64], labels: &[Class]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, li) in labels.iter().enumerate() {
        for (j, lj) in labels.iter().enumerate() {
            if *li == Class::Ad && *lj == Class::Cn {
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

/// Γ(ν/2) for a positive integer ν, by the half-integer recursion.
fn gamma_half(nu: u32) -> f64 {
    let mut g = if nu.is_multiple_of(2) { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut x = if nu.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < nu as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Two-sided Student-t p-value by composite Simpson integration of the
/// density over [0, |t|].
pub fn t_two_sided_quadrature(t: f64, nu: u32) -> f64 {
    let v = nu as f64;
    let c = gamma_half(nu + 1) / ((v * std::f64::consts::PI).sqrt() * gamma_half(nu));
    let density = |x: f64| c * (1.0 + x * x / v).powf(-(v + 1.0) / 2.0);
    let n = 200_000;
    let h = t.abs() / n as f64;
    let mut s = density(0.0) + density(t.abs());
    for i in 1..n {
        s += density(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * s * h / 3.0
}

// ---------------------------------------------------------------------------
// hyperband

/// `(s, n, r, rounds)` with rounds as `(configs, resource)`.
pub type BracketRow = (u32, usize, u64, Vec<(usize, u64)>);

/// Bracket table from the closed-form formulas.
pub fn hyperband_table(r_max: u64, eta: u64) -> Vec<BracketRow> {
    let mut s_max = 0u32;
    while eta.pow(s_max + 1) <= r_max {
        s_max += 1;
    }
    (0..=s_max)
        .rev()
        .map(|s| {
            let b = (s_max as u64 + 1) * r_max;
            let denom = r_max * (s as u64 + 1);
            let num = b * eta.pow(s);
            let n = num.div_ceil(denom) as usize;
            let r = r_max / eta.pow(s);
            let mut rounds = Vec::new();
            let mut ni = n;
            for i in 0..=s {
                rounds.push((ni, r * eta.pow(i)));
                ni = (ni / eta as usize).max(1);
            }
            (s, n, r, rounds)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// pipeline laws; each returns a description of the first violation

use mimd_core::data::{clamp_window, crop_roi, modal_centroid, stratified_split, InstanceRecord, MinMax, RoiMask, SplitRatios, Volume};
use mimd_core::metrics::{cv_plan, CvOptions};
use std::collections::BTreeSet;

fn per_class(idx: &[usize], labels: &[Class], c: Class) -> usize {
    idx.iter().filter(|&&i| labels[i] == c).count()
}

/// Train/validation/test are disjoint, cover every subject and hold each
/// class within one subject of its exact proportional share.
pub fn split_law(labels: &[Class], seed: u64) -> std::result::Result<(), String> {
    let ratios = SplitRatios::default();
    let s = stratified_split(labels, ratios, &mut mimd_core::rng::seeded(seed)).map_err(|e| e.to_string())?;
    let all: BTreeSet<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
    if all.len() != labels.len() || s.train.len() + s.val.len() + s.test.len() != labels.len() {
        return Err("split does not partition the subjects".into());
    }
    let n = labels.len() as f64;
    for (part, ratio) in [(&s.val, ratios.val), (&s.test, ratios.test)] {
        let total = (n * ratio).round();
        for c in Class::ALL {
            let nc = per_class(&(0..labels.len()).collect::<Vec<_>>(), labels, c) as f64;
            let share = total * nc / n;
            let got = per_class(part, labels, c) as f64;
            if (got - share).abs() >= 1.0 {
                return Err(format!("{c} count {got} vs share {share:.2}"));
            }
        }
    }
    Ok(())
}

/// Folds and the held-out test set partition the subjects, no fold's
/// training set touches its held-out fold, and per-class fold counts differ
/// by at most one.
pub fn cv_law(labels: &[Class], k: usize, holdout_test: bool, seed: u64) -> std::result::Result<(), String> {
    let opts = CvOptions {
        folds: k,
        holdout_test,
        ..CvOptions::default()
    };
    let plan = cv_plan(labels, &opts, seed).map_err(|e| e.to_string())?;
    let mut seen = BTreeSet::new();
    for i in plan.folds.iter().flatten().chain(&plan.test) {
        if !seen.insert(*i) {
            return Err(format!("subject {i} appears twice"));
        }
    }
    if seen.len() != labels.len() {
        return Err("plan does not cover every subject".into());
    }
    for (f, fold) in plan.folds.iter().enumerate() {
        let held: BTreeSet<usize> = fold.iter().copied().collect();
        let train = plan.training(f);
        if train.iter().any(|i| held.contains(i) || plan.test.contains(i)) {
            return Err(format!("fold {f} training set leaks"));
        }
        if train.len() + fold.len() + plan.test.len() != labels.len() {
            return Err(format!("fold {f} loses subjects"));
        }
    }
    for c in Class::ALL {
        let counts: Vec<usize> = plan.folds.iter().map(|f| per_class(f, labels, c)).collect();
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        if hi - lo > 1 {
            return Err(format!("{c} fold counts {counts:?}"));
        }
    }
    Ok(())
}

/// Fitted on `train`, scaling maps train extremes to 0 and 1, keeps every
/// value (seen or not) in [0, 1] and preserves order inside the range.
pub fn minmax_law(train: &[f64], other: &[f64]) -> std::result::Result<(), String> {
    let mm = MinMax::fit(train.iter().copied()).map_err(|e| e.to_string())?;
    let lo = train.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = train.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mm.apply(lo).abs() > 1e-12 || (mm.apply(hi) - 1.0).abs() > 1e-12 {
        return Err("train extremes do not map to 0 and 1".into());
    }
    for &v in train.iter().chain(other) {
        let s = mm.apply(v);
        if !(0.0..=1.0).contains(&s) {
            return Err(format!("{v} scaled to {s}"));
        }
    }
    for w in train.windows(2) {
        if (w[0] < w[1]) && mm.apply(w[0]) > mm.apply(w[1]) {
            return Err("scaling is not monotone".into());
        }
    }
    Ok(())
}

/// A crop lies inside the volume, contains the centroid whenever the crop
/// is large enough to, and copies voxels verbatim.
pub fn crop_law(mix: &mut Mix) -> std::result::Result<(), String> {
    let dims = [3 + mix.below(6), 4 + mix.below(20), 4 + mix.below(20)];
    let crop = (1 + mix.below(dims[1]), 1 + mix.below(dims[2]));
    let voxels: Vec<f32> = (0..dims.iter().product::<usize>()).map(|_| mix.unit() as f32).collect();
    let volume = Volume::new(dims, voxels).map_err(|e| e.to_string())?;
    let slice_count = 1 + mix.below(dims[0]);
    let inst = InstanceRecord {
        subject_id: "s".into(),
        class: Class::Cn,
        roi: "r".into(),
        slice_start: mix.below(dims[0] - slice_count + 1),
        slice_count,
        centroid: (mix.below(dims[1]), mix.below(dims[2])),
    };
    let channels = 1 + mix.below(3);
    let out = crop_roi(&volume, &inst, crop, channels).map_err(|e| e.to_string())?;
    if out.shape() != [slice_count, crop.0, crop.1, channels] {
        return Err(format!("crop shape {:?}", out.shape()));
    }
    let start = |c: usize, size: usize, extent: usize| -> usize {
        let s = c.saturating_sub(size / 2);
        s.min(extent - size)
    };
    let (r0, c0) = (start(inst.centroid.0, crop.0, dims[1]), start(inst.centroid.1, crop.1, dims[2]));
    if r0 != clamp_window(inst.centroid.0, crop.0, dims[1]) || c0 != clamp_window(inst.centroid.1, crop.1, dims[2]) {
        return Err("window origin differs from the oracle".into());
    }
    if r0 + crop.0 > dims[1] || c0 + crop.1 > dims[2] {
        return Err("window leaves the plane".into());
    }
    if !(r0..r0 + crop.0).contains(&inst.centroid.0) || !(c0..c0 + crop.1).contains(&inst.centroid.1) {
        return Err("window misses the centroid".into());
    }
    for z in 0..slice_count {
        for y in 0..crop.0 {
            for x in 0..crop.1 {
                let want = f64::from(volume.get(inst.slice_start + z, r0 + y, c0 + x));
                for c in 0..channels {
                    if out.at(&[z, y, x, c]) != want {
                        return Err(format!("voxel ({z},{y},{x},{c}) differs"));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Reordering the slices of a mask does not move its modal centroid.
pub fn modal_centroid_law(mix: &mut Mix) -> std::result::Result<(), String> {
    let dims = [2 + mix.below(10), 3 + mix.below(12), 3 + mix.below(12)];
    let mut slices: Vec<Vec<u8>> = (0..dims[0])
        .map(|_| {
            // a blob at a few recurring positions so modes have ties and repeats
            let (cy, cx) = (mix.below(3) * dims[1] / 3, mix.below(3) * dims[2] / 3);
            let r = 1 + mix.below(2);
            (0..dims[1] * dims[2])
                .map(|i| {
                    let (y, x) = (i / dims[2], i % dims[2]);
                    u8::from(y.abs_diff(cy) <= r && x.abs_diff(cx) <= r)
                })
                .collect()
        })
        .collect();
    let mask = |s: &[Vec<u8>]| RoiMask::new("r", dims, s.concat()).map_err(|e| e.to_string());
    let base = modal_centroid(&mask(&slices)?, 0, dims[0]).map_err(|e| e.to_string())?;
    mix.shuffle(&mut slices);
    let permuted = modal_centroid(&mask(&slices)?, 0, dims[0]).map_err(|e| e.to_string())?;
    if base != permuted {
        return Err(format!("{base:?} became {permuted:?}"));
    }
    Ok(())
}
