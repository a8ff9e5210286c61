use std::path::PathBuf;

use clap::{Args, ValueEnum};
use mimd_core::metrics::{score_predictions, CvSummary};
use mimd_core::trainer::predict;

use super::{load_model, with_jobs, CONFIG_FILE, META_FILE, WEIGHTS_FILE};
use crate::dataset::load_samples;
use crate::error::{usage, Result};
use crate::formats::reports::{roc_csv, roc_svg, MetricsJson};
use crate::formats::run_manifest::RunRecorder;
use crate::formats::{write_file, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalSplit {
    /// Every study subject in the manifest.
    All,
    /// Only the subjects the model recorded as held out.
    Test,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Model directory written by `train` or `cv`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output metrics JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub roc_csv: Option<PathBuf>,
    #[arg(long)]
    pub roc_svg: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EvalSplit::All)]
    pub split: EvalSplit,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

pub fn run(args: &EvalArgs) -> Result<String> {
    let saved = load_model(&args.model)?;
    let mut run = RunRecorder::new(
        "eval",
        Some(saved.meta.seed),
        serde_json::json!({ "split": format!("{:?}", args.split).to_lowercase() }),
    );
    for f in [CONFIG_FILE, META_FILE, WEIGHTS_FILE] {
        run.input(args.model.join(f));
    }
    run.input(&args.manifest);
    run.input(&args.instances);

    let data = load_samples(&args.manifest, &args.instances, &saved.meta.rois, &saved.config, saved.meta.seed)?;
    let mut raw = data.samples;
    if args.split == EvalSplit::Test {
        if saved.meta.test_subjects.is_empty() {
            return Err(usage("the model records no held-out subjects; use --split all"));
        }
        raw.retain(|s| saved.meta.test_subjects.contains(&s.subject_id));
        if raw.is_empty() {
            return Err(usage("none of the model's held-out subjects are in the manifest"));
        }
    }
    let prep = saved.meta.preprocessor()?;
    let samples = prep.apply_all(&raw);
    let predictions = with_jobs(args.jobs, || predict(&saved.params, &saved.model, &samples))??;
    let report = score_predictions(0, predictions, saved.params, prep)?;
    let summary = CvSummary::from_folds(std::slice::from_ref(&report))?;

    write_json(&args.out, &MetricsJson::new(std::slice::from_ref(&report), summary))?;
    run.output(&args.out);
    if let Some(p) = &args.roc_csv {
        write_file(p, roc_csv(&report.roc).as_bytes())?;
        run.output(p);
    }
    if let Some(p) = &args.roc_svg {
        write_file(p, roc_svg(&report.roc, report.auc, &saved.meta.mode).as_bytes())?;
        run.output(p);
    }
    run.finish_beside(&args.out)?;
    Ok(format!(
        "{} subjects: accuracy {:.4}  AUC {:.4}  (tp {} fp {} tn {} fn {})\n",
        raw.len(),
        report.accuracy,
        report.auc,
        report.confusion.tp,
        report.confusion.fp,
        report.confusion.tn,
        report.confusion.fn_
    ))
}
