//! Adam with continuous exponential learning-rate decay, the epoch loop and
//! prediction.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::autodiff::Tape;
use crate::data::{batch_order, Class, MixedSample};
use crate::error::{config_err, Error, Result};
use crate::math;
use crate::model::{forward, forward_on_tape, register_params, ModelConfig, ModelParams};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub decay_steps: u64,
    pub decay_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            initial_lr: 1e-4,
            decay_steps: 100_000,
            decay_rate: 0.9,
            batch_size: 6,
            epochs: 250,
            dropout: 0.2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.validate_rates()?;
        if self.epochs == 0 {
            return Err(config_err("epochs must be at least 1"));
        }
        Ok(())
    }

    /// Everything except the epoch count, which [`train`] also accepts as 0.
    fn validate_rates(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(config_err(format!("{name} {v} outside (0, 1]")))
            }
        };
        unit("initial_lr", self.initial_lr)?;
        unit("decay_rate", self.decay_rate)?;
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidRate(self.dropout));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(config_err(format!("{name} {b} outside [0, 1)")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(config_err("adam_eps must be positive"));
        }
        if self.decay_steps == 0 {
            return Err(config_err("decay_steps must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(config_err("batch_size must be at least 1"));
        }
        Ok(())
    }
}

/// `initial_lr · decay_rate^(step / decay_steps)`, not staircased.
pub fn lr_at_step(cfg: &TrainConfig, step: u64) -> f64 {
    cfg.initial_lr * math::powf(cfg.decay_rate, step as f64 / cfg.decay_steps as f64)
}

/// Adam moments, laid out like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        let zero = params.map(|t| crate::Tensor::zeros(t.shape()));
        Self {
            m: zero.clone(),
            v: zero,
            step: 0,
        }
    }
}

/// One bias-corrected Adam step.
pub fn adam_update(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut OptimizerState,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    let mut p = params.flatten();
    let g = grads.flatten();
    let mut m = state.m.flatten();
    let mut v = state.v.flatten();
    if g.len() != p.len() || m.len() != p.len() || v.len() != p.len() {
        return Err(Error::ShapeMismatch {
            op: "adam_update",
            lhs: alloc::vec![p.len()],
            rhs: alloc::vec![g.len()],
        });
    }
    let t = state.step + 1;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - math::powf(b1, t as f64);
    let c2 = 1.0 - math::powf(b2, t as f64);
    for i in 0..p.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        p[i] -= lr * m_hat / (math::sqrt(v_hat) + cfg.adam_eps);
    }
    params.assign_flat(&p)?;
    state.m.assign_flat(&m)?;
    state.v.assign_flat(&v)?;
    state.step = t;
    Ok(())
}

/// `-ln(max(p_label, 1e-12))`.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs
        .get(label)
        .ok_or_else(|| crate::error::invalid(format!("label {label} outside {} classes", probs.len())))?;
    Ok(-math::ln(p.max(crate::autodiff::PROB_FLOOR)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// NaN when there is no validation data.
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Learning rate at the end of the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch (or the last epoch without
    /// validation data).
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    /// 1-based; 0 when no epoch ran.
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub subject_id: String,
    pub prob_ad: f64,
    pub predicted: Class,
    pub label: Class,
}

/// Argmax with ties resolved to CN.
pub fn decide(probs: [f64; 2]) -> Class {
    if probs[1] > probs[0] {
        Class::Ad
    } else {
        Class::Cn
    }
}

/// Deterministic inference with dropout off.
pub fn predict(
    params: &ModelParams,
    cfg: &ModelConfig,
    samples: &[MixedSample],
) -> Result<Vec<Prediction>> {
    // dropout is off, so the generator is never drawn from
    let mut unused = rng::seeded(0);
    samples
        .iter()
        .map(|s| {
            let probs = forward(s.input(cfg.mode), params, cfg, false, &mut unused)?;
            Ok(Prediction {
                subject_id: s.subject_id.clone(),
                prob_ad: probs[1],
                predicted: decide(probs),
                label: s.label,
            })
        })
        .collect()
}

/// Mean cross-entropy and accuracy of `params` on `samples`.
pub fn evaluate(
    params: &ModelParams,
    cfg: &ModelConfig,
    samples: &[MixedSample],
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let preds = predict(params, cfg, samples)?;
    let mut loss = 0.0;
    let mut correct = 0usize;
    for p in &preds {
        loss += cross_entropy(&[1.0 - p.prob_ad, p.prob_ad], p.label.index())?;
        correct += usize::from(p.predicted == p.label);
    }
    let n = preds.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Mean batch loss and its gradient with respect to every parameter.
pub fn batch_gradients<R: rand::Rng + ?Sized>(
    params: &ModelParams,
    cfg: &ModelConfig,
    batch: &[&MixedSample],
    rng: &mut R,
) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut tape = Tape::new();
    let weights = register_params(&mut tape, params);
    let mut losses = Vec::with_capacity(batch.len());
    for s in batch {
        let probs = forward_on_tape(&mut tape, s.input(cfg.mode), &weights, cfg, true, rng)?;
        losses.push(tape.cross_entropy(probs, s.label.index())?);
    }
    let stacked = tape.concat(&losses, 0)?;
    let loss = tape.mean(stacked);
    let grads = tape.backward(loss)?;
    let loss_value = tape.value(loss).data()[0];
    Ok((loss_value, weights.map(|&v| grads.get_or_zeros(&tape, v))))
}

/// [`train_with`] without a progress callback.
pub fn train(
    model: &ModelConfig,
    init: &ModelParams,
    train_set: &[MixedSample],
    val_set: &[MixedSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(model, init, train_set, val_set, cfg, |_| {})
}

/// Runs `cfg.epochs` epochs of shuffled mini-batch Adam. The training
/// dropout rate comes from `cfg.dropout`. Returns the parameters of the
/// epoch with the best validation accuracy; ties go to the lower validation
/// loss, then to the earlier epoch.
pub fn train_with(
    model: &ModelConfig,
    init: &ModelParams,
    train_set: &[MixedSample],
    val_set: &[MixedSample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate_rates()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training data"));
    }
    let mut model = model.clone();
    model.dropout_rate = cfg.dropout;
    model.validate()?;

    let mut params = init.clone();
    let mut state = OptimizerState::new(&params);
    let mut dropout_rng = rng::derive(cfg.seed, &[1]);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<((f64, f64), usize, ModelParams)> = None;

    for epoch in 1..=cfg.epochs {
        let mut shuffle = rng::derive(cfg.seed, &[2, epoch as u64]);
        let order = batch_order(train_set.len(), cfg.batch_size, &mut shuffle, false)?;
        let mut total = 0.0;
        for idx in &order {
            let batch: Vec<&MixedSample> = idx.iter().map(|&i| &train_set[i]).collect();
            let (loss, grads) = batch_gradients(&params, &model, &batch, &mut dropout_rng)?;
            total += loss * batch.len() as f64;
            let lr = lr_at_step(cfg, state.step);
            adam_update(&mut params, &grads, &mut state, lr, cfg)?;
        }
        let (val_loss, val_accuracy) = evaluate(&params, &model, val_set)?;
        let record = EpochRecord {
            epoch,
            train_loss: total / train_set.len() as f64,
            val_loss,
            val_accuracy,
            lr: lr_at_step(cfg, state.step),
        };
        on_epoch(&record);
        history.push(record);

        let score = if val_set.is_empty() { (f64::INFINITY, 0.0) } else { (val_accuracy, val_loss) };
        let improves = match &best {
            None => true,
            Some((b, _, _)) => score.0 > b.0 || (score.0 == b.0 && score.1 < b.1) || val_set.is_empty(),
        };
        if improves {
            best = Some((score, epoch, params.clone()));
        }
    }

    Ok(match best {
        Some((_, best_epoch, params)) => TrainOutcome {
            params,
            history,
            best_epoch,
        },
        None => TrainOutcome {
            params,
            history,
            best_epoch: 0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, FusionMode, ImageDims, Tubelet};
    use crate::Tensor;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn lr_schedule() {
        let c = TrainConfig::default();
        assert_eq!(lr_at_step(&c, 0), 1e-4);
        assert!(close(lr_at_step(&c, 100_000), 9e-5, 1e-18));
        assert!(close(lr_at_step(&c, 50_000), 1e-4 * 0.9f64.sqrt(), 1e-18));
        assert!(close(lr_at_step(&c, 50_000), 9.4868e-5, 1e-9));
        assert!(lr_at_step(&c, 1) < lr_at_step(&c, 0));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = |f: fn(&mut TrainConfig)| {
            let mut c = TrainConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.epochs = 0));
        assert!(bad(|c| c.batch_size = 0));
        assert!(bad(|c| c.initial_lr = 0.0));
        assert!(bad(|c| c.decay_rate = 1.5));
        assert!(bad(|c| c.dropout = 1.0));
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[1.0, 0.0], 0).unwrap(), 0.0);
        assert!(close(cross_entropy(&[0.5, 0.5], 1).unwrap(), core::f64::consts::LN_2, 1e-15));
        assert!(close(cross_entropy(&[0.0, 1.0], 0).unwrap(), 27.631021115928547, 1e-9));
        assert!(cross_entropy(&[0.5, 0.5], 2).is_err());
    }

    fn tiny() -> ModelConfig {
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
            ..ModelConfig::default()
        }
    }

    fn samples(n: usize) -> Vec<MixedSample> {
        (0..n)
            .map(|i| {
                let label = if i % 2 == 0 { Class::Cn } else { Class::Ad };
                let v = if label == Class::Ad { 0.8 } else { 0.2 };
                MixedSample {
                    subject_id: format!("s{i}"),
                    label,
                    tabular: alloc::vec![v, 1.0 - v, 1.0, 0.0],
                    images: alloc::vec![Tensor::full(&[2, 4, 4, 1], v + 0.01 * i as f64)],
                }
            })
            .collect()
    }

    #[test]
    fn adam_examples() {
        let cfg = tiny();
        let mut params = init_params(&cfg, 1).unwrap();
        let before = params.clone();
        let zeros = params.map(|t| Tensor::zeros(t.shape()));
        let mut state = OptimizerState::new(&params);
        let tc = TrainConfig::default();
        for _ in 0..3 {
            adam_update(&mut params, &zeros, &mut state, 0.1, &tc).unwrap();
        }
        assert_eq!(params, before);
        assert_eq!(state.step, 3);

        // one scalar parameter: theta=0, g=1, lr=0.1 → -0.1
        let mut p = params.map(|t| Tensor::zeros(t.shape()));
        let mut g = p.clone();
        g.head.bias.data_mut()[0] = 1.0;
        let mut s = OptimizerState::new(&p);
        adam_update(&mut p, &g, &mut s, 0.1, &tc).unwrap();
        assert!(close(p.head.bias.data()[0], -0.1, 1e-7));
        assert_eq!(p.head.bias.data()[1], 0.0);
    }

    #[test]
    fn zero_weights_predict_cn() {
        let cfg = tiny();
        let zeros = ModelParams::zeros(&cfg).unwrap();
        let set = samples(5);
        let preds = predict(&zeros, &cfg, &set).unwrap();
        assert_eq!(preds.len(), 5);
        for p in &preds {
            assert!(close(p.prob_ad, 0.5, 1e-12));
            assert_eq!(p.predicted, Class::Cn);
        }
        assert_eq!(preds, predict(&zeros, &cfg, &set).unwrap());
    }

    #[test]
    fn zero_epochs_is_identity_and_training_is_deterministic() {
        let cfg = tiny();
        let init = init_params(&cfg, 2).unwrap();
        let set = samples(8);
        let tc = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let out = train(&cfg, &init, &set, &set, &tc).unwrap();
        assert_eq!(out.params, init);
        assert!(out.history.is_empty());

        let tc = TrainConfig {
            epochs: 3,
            batch_size: 3,
            initial_lr: 1e-2,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train(&cfg, &init, &set, &set[..4], &tc).unwrap();
        let b = train(&cfg, &init, &set, &set[..4], &tc).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 3);
    }

    #[test]
    fn one_small_step_reduces_batch_loss() {
        let mut cfg = tiny();
        cfg.mode = FusionMode::Mixed;
        let mut params = init_params(&cfg, 3).unwrap();
        let set = samples(6);
        let batch: Vec<&MixedSample> = set.iter().collect();
        let mut r = rng::seeded(0);
        let (before, grads) = batch_gradients(&params, &cfg, &batch, &mut r).unwrap();
        // plain gradient step
        let mut flat = params.flatten();
        for (p, g) in flat.iter_mut().zip(grads.flatten()) {
            *p -= 1e-3 * g;
        }
        params.assign_flat(&flat).unwrap();
        let (after, _) = batch_gradients(&params, &cfg, &batch, &mut r).unwrap();
        assert!(after < before, "{after} >= {before}");
    }
}
