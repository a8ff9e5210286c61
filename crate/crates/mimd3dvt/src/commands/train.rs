use std::path::{Path, PathBuf};

use clap::Args;
use mimd_core::data::{stratified_split, Class, Preprocessor, RawSample, SplitRatios};
use mimd_core::metrics::{score_predictions, CvSummary, FoldReport};
use mimd_core::model::{init_params, FusionMode};
use mimd_core::rng;
use mimd_core::trainer::{predict, train_with};

use super::{save_model, split_list, with_jobs, ModelMeta};
use crate::config::{parse_mode, PipelineConfig};
use crate::dataset::{load_samples, LoadedData};
use crate::error::Result;
use crate::formats::reports::{self, MetricsJson};
use crate::formats::run_manifest::RunRecorder;
use crate::formats::{write_file, write_json};

/// Flags shared by `train`, `cv` and the training objective of `tune`.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Instance CSV from `select`.
    #[arg(long)]
    pub instances: PathBuf,
    /// Subject manifest (JSON lines).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Pipeline config JSON; omitted keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// mixed or image-only.
    #[arg(long, default_value = "mixed")]
    pub mode: String,
    /// Comma-separated ROI branches (default: every ROI in the instance CSV).
    #[arg(long, default_value = "")]
    pub rois: String,
}

pub struct Prepared {
    pub config: PipelineConfig,
    pub mode: FusionMode,
    pub data: LoadedData,
}

impl DataArgs {
    pub fn prepare(&self, seed: u64) -> Result<Prepared> {
        let mode = parse_mode(&self.mode)?;
        let config = PipelineConfig::load(self.config.as_deref())?;
        let data = load_samples(&self.manifest, &self.instances, &split_list(&self.rois), &config, seed)?;
        Ok(Prepared { config, mode, data })
    }

    pub fn record_inputs(&self, run: &mut RunRecorder) {
        run.input(&self.manifest);
        run.input(&self.instances);
        if let Some(c) = &self.config {
            run.input(c);
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output model directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

const SPLIT_STREAM: u64 = 0x5911;

/// Writes the per-fold artefacts shared by `train` and `cv`.
pub fn write_fold_outputs(dir: &Path, report: &FoldReport, run: &mut RunRecorder) -> Result<()> {
    let files = [
        ("history.csv", reports::history_csv(&report.history)),
        ("roc.csv", reports::roc_csv(&report.roc)),
        ("predictions.csv", reports::predictions_csv(&report.predictions)),
    ];
    for (name, text) in files {
        let path = dir.join(name);
        write_file(&path, text.as_bytes())?;
        run.output(path);
    }
    Ok(())
}

pub fn run(args: &TrainArgs) -> Result<String> {
    let prepared = args.data.prepare(args.seed)?;
    let Prepared { config, mode, data } = &prepared;
    let mut run = RunRecorder::new("train", Some(args.seed), serde_json::to_value(config).expect("config JSON"));
    args.data.record_inputs(&mut run);

    let labels: Vec<Class> = data.samples.iter().map(|s| s.label).collect();
    let ratios = SplitRatios {
        train: config.split[0],
        val: config.split[1],
        test: config.split[2],
    };
    let split = stratified_split(&labels, ratios, &mut rng::derive(args.seed, &[SPLIT_STREAM]))?;
    let pick = |idx: &[usize]| -> Vec<RawSample> { idx.iter().map(|&i| data.samples[i].clone()).collect() };
    let (train_raw, val_raw, test_raw) = (pick(&split.train), pick(&split.val), pick(&split.test));

    let prep = Preprocessor::fit(&train_raw)?;
    let model = config.model_config(*mode, data.rois.len());
    let [init_seed, train_seed] = rng::derive_seeds(args.seed, &[SPLIT_STREAM, 1]);
    let init = init_params(&model, init_seed)?;
    let train_cfg = config.train_config(train_seed);

    let mut log = String::new();
    let outcome = with_jobs(args.jobs, || {
        train_with(
            &model,
            &init,
            &prep.apply_all(&train_raw),
            &prep.apply_all(&val_raw),
            &train_cfg,
            |e| {
                log.push_str(&format!(
                    "epoch {:>4}  train_loss {:.4}  val_loss {:.4}  val_acc {:.4}\n",
                    e.epoch, e.train_loss, e.val_loss, e.val_accuracy
                ))
            },
        )
    })??;

    let predictions = predict(&outcome.params, &model, &prep.apply_all(&test_raw))?;
    let mut report = score_predictions(0, predictions, outcome.params, prep)?;
    report.history = outcome.history;
    report.best_epoch = outcome.best_epoch;

    let out = &args.out;
    let mut meta = ModelMeta::new(*mode, &data.rois, args.seed, &report.preprocessor);
    meta.best_epoch = report.best_epoch;
    meta.test_subjects = test_raw.iter().map(|s| s.subject_id.clone()).collect();
    for p in save_model(out, config, &meta, &report.params)? {
        run.output(p);
    }
    write_fold_outputs(out, &report, &mut run)?;
    let summary = CvSummary::from_folds(std::slice::from_ref(&report))?;
    let metrics_path = out.join("metrics.json");
    write_json(&metrics_path, &MetricsJson::new(std::slice::from_ref(&report), summary))?;
    run.output(&metrics_path);
    run.finish(out)?;

    log.push_str(&format!(
        "best epoch {}; test accuracy {:.4}, AUC {:.4} on {} subjects\n",
        report.best_epoch,
        report.accuracy,
        report.auc,
        test_raw.len()
    ));
    Ok(log)
}
