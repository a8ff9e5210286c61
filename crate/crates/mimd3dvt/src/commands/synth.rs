use std::path::PathBuf;

use clap::Args;
use mimd_core::data::{synth_subject, Class, SynthConfig};
use rayon::prelude::*;
use serde_json::json;

use super::{split_list, with_jobs};
use crate::error::{usage, Result};
use crate::formats::run_manifest::RunRecorder;
use crate::formats::{manifest, volume};

pub const SUBJECTS_FILE: &str = "subjects.jsonl";

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 56)]
    pub subjects: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Volume size as D,H,W.
    #[arg(long, default_value = "48,64,64")]
    pub dims: String,
    /// Class signal strength in the ROI, from 0 (none) to 1 (separable).
    #[arg(long, default_value_t = 1.0)]
    pub separability: f64,
    /// Voxel noise standard deviation.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Comma-separated ROI names.
    #[arg(long, default_value = "hippocampus_left")]
    pub rois: String,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

fn parse_dims(s: &str) -> Result<[usize; 3]> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage(format!("--dims {s:?} must be D,H,W")))?;
    parts
        .try_into()
        .map_err(|_| usage(format!("--dims {s:?} must have three values")))
}

pub fn run(args: &SynthArgs) -> Result<String> {
    let cfg = SynthConfig {
        subjects: args.subjects,
        dims: parse_dims(&args.dims)?,
        separability: args.separability,
        noise: args.noise,
        rois: split_list(&args.rois),
    };
    cfg.validate()?;
    let mut run = RunRecorder::new(
        "synth",
        Some(args.seed),
        json!({
            "subjects": cfg.subjects,
            "dims": cfg.dims,
            "separability": cfg.separability,
            "noise": cfg.noise,
            "rois": cfg.rois,
        }),
    );

    let out = &args.out;
    let records = with_jobs(args.jobs, || {
        (0..cfg.subjects)
            .into_par_iter()
            .map(|i| {
                let s = synth_subject(&cfg, args.seed, i)?;
                volume::save_volume(&s.volume, out.join(&s.record.volume_path))?;
                for m in &s.masks {
                    volume::save_mask(m, out.join(&s.record.roi_masks[&m.name]))?;
                }
                Ok(s.record)
            })
            .collect::<Result<Vec<_>>>()
    })??;

    for r in &records {
        run.output(out.join(&r.volume_path));
        for path in r.roi_masks.values() {
            run.output(out.join(path));
        }
    }
    let manifest_path = out.join(SUBJECTS_FILE);
    manifest::save(&records, &manifest_path)?;
    run.output(&manifest_path);
    run.finish(out)?;

    let ad = records.iter().filter(|r| r.label().ok() == Some(Class::Ad)).count();
    Ok(format!(
        "wrote {} subjects ({} CN, {} AD) to {}\n",
        records.len(),
        records.len() - ad,
        ad,
        manifest_path.display()
    ))
}
