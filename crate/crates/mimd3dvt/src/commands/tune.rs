use std::path::PathBuf;

use clap::{Args, ValueEnum};
use mimd_core::data::{stratified_split, Class, MixedSample, Preprocessor, RawSample, SplitRatios};
use mimd_core::model::init_params;
use mimd_core::rng;
use mimd_core::trainer::train;
use mimd_core::tuner::{hyperband_run, Config, Dimension, Objective, SearchSpace};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{DataArgs, Prepared};
use super::with_jobs;
use crate::config::PipelineConfig;
use crate::error::{usage, Error, Result};
use crate::formats::reports::trials_csv;
use crate::formats::run_manifest::RunRecorder;
use crate::formats::{read_json, write_file, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveKind {
    /// Closed-form score peaking at initial_lr = 3e-4; needs no data.
    Toy,
    /// Best validation accuracy after training for `resource` epochs.
    Train,
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    /// Search space JSON: a list of {name, kind, ...} entries.
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// Maximum resource (epochs) per trial.
    #[arg(long, default_value_t = 27)]
    pub max_resource: u64,
    #[arg(long, default_value_t = 3)]
    pub eta: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ObjectiveKind::Train)]
    pub objective: ObjectiveKind,
    #[arg(long)]
    pub instances: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "mixed")]
    pub mode: String,
    #[arg(long, default_value = "")]
    pub rois: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

/// One entry of the `--space` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: DimensionKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DimensionKind {
    LogUniform { lo: f64, hi: f64 },
    Uniform { lo: f64, hi: f64 },
    Choice { values: Vec<f64> },
}

pub fn space_from_specs(specs: Vec<DimensionSpec>) -> SearchSpace {
    SearchSpace {
        dims: specs
            .into_iter()
            .map(|s| {
                let d = match s.kind {
                    DimensionKind::LogUniform { lo, hi } => Dimension::LogUniform { lo, hi },
                    DimensionKind::Uniform { lo, hi } => Dimension::Uniform { lo, hi },
                    DimensionKind::Choice { values } => Dimension::Choice(values),
                };
                (s.name, d)
            })
            .collect(),
    }
}

pub fn space_to_specs(space: &SearchSpace) -> Vec<DimensionSpec> {
    space
        .dims
        .iter()
        .map(|(name, d)| DimensionSpec {
            name: name.clone(),
            kind: match d {
                Dimension::LogUniform { lo, hi } => DimensionKind::LogUniform { lo: *lo, hi: *hi },
                Dimension::Uniform { lo, hi } => DimensionKind::Uniform { lo: *lo, hi: *hi },
                Dimension::Choice(v) => DimensionKind::Choice { values: v.clone() },
            },
        })
        .collect()
}

pub fn toy_score(config: &Config) -> f64 {
    let lr = config.get("initial_lr").copied().unwrap_or(3e-4);
    (-(lr / 3e-4).ln().abs()).exp()
}

/// Trains each trial on one fixed stratified split; every rung retrains
/// from scratch with the same initial weights.
struct TrainObjective {
    base: PipelineConfig,
    prepared: Prepared,
    train_set: Vec<MixedSample>,
    val_set: Vec<MixedSample>,
    init_seed: u64,
    train_seed: u64,
}

impl TrainObjective {
    fn score(&self, config: &Config, resource: u64) -> Result<f64> {
        let mut cfg = self.base.clone();
        for (k, v) in config {
            cfg.apply_override(k, *v)?;
        }
        cfg.epochs = usize::try_from(resource).map_err(|_| usage("resource too large"))?;
        cfg.validate()?;
        let model = cfg.model_config(self.prepared.mode, self.prepared.data.rois.len());
        let init = init_params(&model, self.init_seed)?;
        let outcome = train(&model, &init, &self.train_set, &self.val_set, &cfg.train_config(self.train_seed))?;
        Ok(outcome.history[outcome.best_epoch - 1].val_accuracy)
    }
}

impl Objective for TrainObjective {
    fn evaluate(&mut self, trials: &[(usize, &Config)], resource: u64) -> mimd_core::Result<Vec<f64>> {
        let this = &*self;
        let scores: Result<Vec<f64>> = trials.par_iter().map(|(_, c)| this.score(c, resource)).collect();
        scores.map_err(|e| match e {
            Error::Core(c) => c,
            other => mimd_core::Error::Config(other.to_string()),
        })
    }
}

fn train_objective(args: &TuneArgs, run: &mut RunRecorder) -> Result<TrainObjective> {
    let (Some(instances), Some(manifest)) = (&args.instances, &args.manifest) else {
        return Err(usage("--objective train needs --instances and --manifest"));
    };
    let data_args = DataArgs {
        instances: instances.clone(),
        manifest: manifest.clone(),
        config: args.config.clone(),
        mode: args.mode.clone(),
        rois: args.rois.clone(),
    };
    data_args.record_inputs(run);
    let prepared = data_args.prepare(args.seed)?;
    let base = prepared.config.clone();
    let labels: Vec<Class> = prepared.data.samples.iter().map(|s| s.label).collect();
    let ratios = SplitRatios {
        train: base.split[0],
        val: base.split[1],
        test: base.split[2],
    };
    let split = stratified_split(&labels, ratios, &mut rng::derive(args.seed, &[0x7e5e]))?;
    let pick = |idx: &[usize]| -> Vec<RawSample> { idx.iter().map(|&i| prepared.data.samples[i].clone()).collect() };
    let train_raw = pick(&split.train);
    let prep = Preprocessor::fit(&train_raw)?;
    let [init_seed, train_seed] = rng::derive_seeds(args.seed, &[0x7e5e, 1]);
    Ok(TrainObjective {
        base,
        train_set: prep.apply_all(&train_raw),
        val_set: prep.apply_all(&pick(&split.val)),
        init_seed,
        train_seed,
        prepared,
    })
}

pub fn run(args: &TuneArgs) -> Result<String> {
    let space = match &args.space {
        Some(p) => space_from_specs(read_json(p)?),
        None => SearchSpace::default(),
    };
    space.validate()?;
    let mut run = RunRecorder::new(
        "tune",
        Some(args.seed),
        serde_json::json!({
            "space": space_to_specs(&space),
            "max_resource": args.max_resource,
            "eta": args.eta,
            "objective": format!("{:?}", args.objective).to_lowercase(),
        }),
    );
    if let Some(p) = &args.space {
        run.input(p);
    }

    let outcome = match args.objective {
        ObjectiveKind::Toy => {
            let mut f = |c: &Config, _r: u64, _id: usize| Ok(toy_score(c));
            hyperband_run(&space, &mut f, args.max_resource, args.eta, args.seed)?
        }
        ObjectiveKind::Train => {
            let mut obj = train_objective(args, &mut run)?;
            with_jobs(args.jobs, || {
                hyperband_run(&space, &mut obj, args.max_resource, args.eta, args.seed)
            })??
        }
    };

    let out = &args.out;
    let trials_path = out.join("trials.csv");
    write_file(&trials_path, trials_csv(&outcome.log).as_bytes())?;
    run.output(&trials_path);
    let best_path = out.join("best_config.json");
    write_json(
        &best_path,
        &serde_json::json!({
            "trial_id": outcome.best.trial_id,
            "score": outcome.best.score,
            "resource": outcome.best.resource,
            "config": outcome.best.config,
        }),
    )?;
    run.output(&best_path);
    run.finish(out)?;

    let config: Vec<String> = outcome.best.config.iter().map(|(k, v)| format!("{k}={v}")).collect();
    Ok(format!(
        "{} evaluations; best trial {} scored {:.4} at resource {}: {}\n",
        outcome.log.len(),
        outcome.best.trial_id,
        outcome.best.score,
        outcome.best.resource,
        config.join(" ")
    ))
}
