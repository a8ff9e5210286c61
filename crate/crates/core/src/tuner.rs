//! Hyperband: random search with successive-halving early stopping.
//!
//! The resource unit is training epochs. Every rung retrains from scratch,
//! so a trial's score depends only on its config, the resource and the seed.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{config_err, Error, Result};
use crate::math;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub enum Dimension {
    LogUniform { lo: f64, hi: f64 },
    Uniform { lo: f64, hi: f64 },
    Choice(Vec<f64>),
}

impl Dimension {
    fn validate(&self, name: &str) -> Result<()> {
        match self {
            Dimension::LogUniform { lo, hi } if !(*lo > 0.0 && lo < hi) => {
                Err(config_err(format!("{name}: log-uniform needs 0 < lo < hi")))
            }
            Dimension::Uniform { lo, hi } if !(lo < hi) => {
                Err(config_err(format!("{name}: uniform needs lo < hi")))
            }
            Dimension::Choice(c) if c.is_empty() => Err(config_err(format!("{name}: empty choice set"))),
            _ => Ok(()),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Dimension::LogUniform { lo, hi } => {
                let u: f64 = rng.random();
                let v = math::exp(math::ln(*lo) + u * (math::ln(*hi) - math::ln(*lo)));
                v.clamp(*lo, *hi)
            }
            Dimension::Uniform { lo, hi } => lo + rng.random::<f64>() * (hi - lo),
            Dimension::Choice(c) => c[rng.random_range(0..c.len())],
        }
    }
}

/// A concrete assignment, by dimension name.
pub type Config = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub dims: Vec<(String, Dimension)>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            dims: alloc::vec![
                ("initial_lr".into(), Dimension::LogUniform { lo: 1e-5, hi: 1e-3 }),
                ("dropout".into(), Dimension::Choice(alloc::vec![0.1, 0.2, 0.3])),
                ("batch_size".into(), Dimension::Choice(alloc::vec![4.0, 6.0, 8.0])),
                ("tubelet_t".into(), Dimension::Choice(alloc::vec![5.0, 25.0])),
            ],
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(config_err("search space has no dimensions"));
        }
        let mut names = alloc::collections::BTreeSet::new();
        for (name, d) in &self.dims {
            if !names.insert(name) {
                return Err(config_err(format!("duplicate dimension {name}")));
            }
            d.validate(name)?;
        }
        Ok(())
    }
}

/// Samples every dimension independently, in declaration order.
pub fn sample_config<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> Config {
    space
        .dims
        .iter()
        .map(|(name, d)| (name.clone(), d.sample(rng)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub configs: usize,
    pub resource: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bracket {
    pub s: u32,
    pub configs: usize,
    pub initial_resource: u64,
    pub rounds: Vec<Round>,
}

impl Bracket {
    /// Σ configs·resource over the rounds.
    pub fn budget(&self) -> u64 {
        self.rounds.iter().map(|r| r.configs as u64 * r.resource).sum()
    }
}

/// Largest `s` with `eta^s <= max_resource`.
pub fn s_max(max_resource: u64, eta: u64) -> u32 {
    let mut s = 0;
    let mut p = eta;
    while p <= max_resource {
        s += 1;
        p = match p.checked_mul(eta) {
            Some(v) => v,
            None => break,
        };
    }
    s
}

fn check_budget(max_resource: u64, eta: u64) -> Result<()> {
    if max_resource == 0 {
        return Err(config_err("maximum resource must be at least 1"));
    }
    if eta < 2 {
        return Err(config_err(format!("eta must be at least 2, got {eta}")));
    }
    Ok(())
}

/// Resource `R · eta^(i − s)` rounded to whole epochs, at least 1.
fn rung_resource(max_resource: u64, eta: u64, s: u32, i: u32) -> u64 {
    let r = max_resource as f64 * math::powf(eta as f64, f64::from(i) - f64::from(s));
    (math::round(r) as u64).max(1)
}

/// Brackets `s = s_max..=0`: `n = ceil((s_max + 1) / (s + 1) · eta^s)`
/// configs starting at resource `R · eta^(−s)`, each later round keeping
/// `floor(n_i / eta)` of them at `eta` times the resource.
pub fn bracket_schedule(max_resource: u64, eta: u64) -> Result<Vec<Bracket>> {
    check_budget(max_resource, eta)?;
    let top = s_max(max_resource, eta);
    Ok((0..=top)
        .rev()
        .map(|s| {
            let scale = f64::from(top + 1) / f64::from(s + 1);
            let n = math::ceil(scale * math::powf(eta as f64, f64::from(s)) - 1e-9) as usize;
            let mut rounds = Vec::with_capacity(s as usize + 1);
            let mut configs = n;
            for i in 0..=s {
                rounds.push(Round {
                    configs,
                    resource: rung_resource(max_resource, eta, s, i),
                });
                configs = (configs / eta as usize).max(1);
            }
            Bracket {
                s,
                configs: n,
                initial_resource: rung_resource(max_resource, eta, s, 0),
                rounds,
            }
        })
        .collect())
}

/// One evaluation of one config at one resource level.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Identifies the config; stable across rounds.
    pub trial_id: usize,
    pub bracket: u32,
    pub round: u32,
    pub resource: u64,
    pub score: f64,
    pub config: Config,
}

/// Scores a rung. Implementations may evaluate the trials in any order or
/// concurrently but must return scores in input order.
pub trait Objective {
    fn evaluate(&mut self, trials: &[(usize, &Config)], resource: u64) -> Result<Vec<f64>>;
}

impl<F> Objective for F
where
    F: FnMut(&Config, u64, usize) -> Result<f64>,
{
    fn evaluate(&mut self, trials: &[(usize, &Config)], resource: u64) -> Result<Vec<f64>> {
        trials.iter().map(|&(id, c)| self(c, resource, id)).collect()
    }
}

/// Evaluates `configs` (with their trial ids) starting at `r0`, keeping the
/// best `floor(n / eta)` (at least one, ties to the lower id) and
/// multiplying the resource by `eta` until it would exceed `max_resource`.
/// Returns every evaluation in order.
pub fn successive_halving<O: Objective + ?Sized>(
    configs: &[(usize, Config)],
    objective: &mut O,
    r0: u64,
    eta: u64,
    max_resource: u64,
    bracket: u32,
) -> Result<Vec<TrialResult>> {
    check_budget(max_resource, eta)?;
    if configs.is_empty() {
        return Err(Error::Empty("successive halving configs"));
    }
    let mut alive: Vec<&(usize, Config)> = configs.iter().collect();
    let mut resource = r0.max(1);
    let mut log = Vec::new();
    for round in 0u32.. {
        let batch: Vec<(usize, &Config)> = alive.iter().map(|(id, c)| (*id, c)).collect();
        let scores = objective.evaluate(&batch, resource)?;
        if scores.len() != batch.len() {
            return Err(config_err("objective returned the wrong number of scores"));
        }
        let mut ranked: Vec<(f64, &(usize, Config))> = scores.iter().copied().zip(alive.iter().copied()).collect();
        for (score, (id, c)) in &ranked {
            log.push(TrialResult {
                trial_id: *id,
                bracket,
                round,
                resource,
                score: *score,
                config: c.clone(),
            });
        }
        let next = resource.saturating_mul(eta);
        if next > max_resource {
            break;
        }
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1 .0.cmp(&b.1 .0)));
        let keep = (ranked.len() / eta as usize).max(1);
        alive = ranked.into_iter().take(keep).map(|(_, t)| t).collect();
        alive.sort_by_key(|t| t.0);
        resource = next;
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbandOutcome {
    pub best: TrialResult,
    /// Every evaluation, brackets in schedule order.
    pub log: Vec<TrialResult>,
}

/// Highest score; ties go to the lower trial id, then the earlier entry.
pub fn best_trial(log: &[TrialResult]) -> Option<&TrialResult> {
    log.iter().reduce(|best, t| {
        if t.score > best.score || (t.score == best.score && t.trial_id < best.trial_id) {
            t
        } else {
            best
        }
    })
}

/// Runs every bracket of [`bracket_schedule`]. Configs are sampled from one
/// stream seeded by `seed` and numbered in sampling order.
pub fn hyperband_run<O: Objective + ?Sized>(
    space: &SearchSpace,
    objective: &mut O,
    max_resource: u64,
    eta: u64,
    seed: u64,
) -> Result<HyperbandOutcome> {
    space.validate()?;
    let schedule = bracket_schedule(max_resource, eta)?;
    let mut sampler = rng::seeded(seed);
    let mut next_id = 0;
    let mut log = Vec::new();
    for b in &schedule {
        let configs: Vec<(usize, Config)> = (0..b.configs)
            .map(|_| {
                next_id += 1;
                (next_id - 1, sample_config(space, &mut sampler))
            })
            .collect();
        log.extend(successive_halving(
            &configs,
            objective,
            b.initial_resource,
            eta,
            max_resource,
            b.s,
        )?);
    }
    let best = best_trial(&log).cloned().ok_or(Error::Empty("trial log"))?;
    Ok(HyperbandOutcome { best, log })
}
