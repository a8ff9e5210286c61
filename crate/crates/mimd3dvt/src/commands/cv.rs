use std::path::PathBuf;

use clap::Args;
use mimd_core::data::Class;
use mimd_core::metrics::{cv_plan, run_fold, CvOptions, CvSummary, FoldReport};
use rayon::prelude::*;

use super::train::{write_fold_outputs, DataArgs};
use super::{save_model, with_jobs, ModelMeta};
use crate::error::Result;
use crate::formats::reports::MetricsJson;
use crate::formats::run_manifest::RunRecorder;
use crate::formats::write_json;

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 7)]
    pub folds: usize,
    /// Reserve a stratified test split before forming the folds.
    #[arg(long)]
    pub holdout_test: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Folds trained concurrently (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

pub const METRICS_FILE: &str = "metrics.json";

pub fn run(args: &CvArgs) -> Result<String> {
    let prepared = args.data.prepare(args.seed)?;
    let (config, mode, data) = (&prepared.config, prepared.mode, &prepared.data);
    let mut run = RunRecorder::new(
        "cv",
        Some(args.seed),
        serde_json::json!({
            "pipeline": config,
            "mode": args.data.mode,
            "rois": data.rois,
            "folds": args.folds,
            "holdout_test": args.holdout_test,
        }),
    );
    args.data.record_inputs(&mut run);

    let opts = CvOptions {
        folds: args.folds,
        holdout_test: args.holdout_test,
        test_ratio: config.split[2],
        inner_val_ratio: config.inner_val_ratio,
    };
    let labels: Vec<Class> = data.samples.iter().map(|s| s.label).collect();
    let plan = cv_plan(&labels, &opts, args.seed)?;
    let model = config.model_config(mode, data.rois.len());
    let train_cfg = config.train_config(args.seed);

    let reports: Vec<FoldReport> = with_jobs(args.jobs, || {
        (0..opts.folds)
            .into_par_iter()
            .map(|f| run_fold(&data.samples, &plan, f, &model, &train_cfg, &opts, args.seed))
            .collect::<mimd_core::Result<Vec<_>>>()
    })??;
    let summary = CvSummary::from_folds(&reports)?;

    let out = &args.out;
    let mut text = String::new();
    for r in &reports {
        let dir = out.join(format!("fold{}", r.fold));
        let mut meta = ModelMeta::new(mode, &data.rois, args.seed, &r.preprocessor);
        meta.best_epoch = r.best_epoch;
        meta.test_subjects = r.predictions.iter().map(|p| p.subject_id.clone()).collect();
        for p in save_model(&dir, config, &meta, &r.params)? {
            run.output(p);
        }
        write_fold_outputs(&dir, r, &mut run)?;
        text.push_str(&format!(
            "fold {}: accuracy {:.4}  AUC {:.4}  (tp {} fp {} tn {} fn {}, best epoch {})\n",
            r.fold, r.accuracy, r.auc, r.confusion.tp, r.confusion.fp, r.confusion.tn, r.confusion.fn_, r.best_epoch
        ));
    }
    let metrics_path = out.join(METRICS_FILE);
    write_json(&metrics_path, &MetricsJson::new(&reports, summary))?;
    run.output(&metrics_path);
    run.finish(out)?;

    text.push_str(&format!(
        "accuracy {}  AUC {}\n",
        summary.accuracy_text(),
        summary.auc_text()
    ));
    Ok(text)
}
