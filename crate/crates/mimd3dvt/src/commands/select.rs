use std::path::PathBuf;

use clap::Args;
use mimd_core::data::{select_instance, select_latest_visit, InstanceRecord};
use rayon::prelude::*;
use serde_json::json;

use super::{split_list, with_jobs};
use crate::dataset::resolve;
use crate::error::{runtime, usage, Result};
use crate::formats::run_manifest::RunRecorder;
use crate::formats::{instances, manifest, volume};

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    /// Subject manifest (JSON lines).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma-separated ROI names.
    #[arg(long)]
    pub roi: String,
    /// Slices per instance.
    #[arg(long, default_value_t = 25)]
    pub slices: usize,
    /// Output instance CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

pub fn run(args: &SelectArgs) -> Result<String> {
    let rois = split_list(&args.roi);
    if rois.is_empty() {
        return Err(usage("--roi needs at least one name"));
    }
    if args.slices == 0 {
        return Err(usage("--slices must be positive"));
    }
    let mut run = RunRecorder::new("select", None, json!({ "rois": rois, "slices": args.slices }));
    run.input(&args.manifest);
    let records = select_latest_visit(&manifest::load(&args.manifest)?);

    let rows: Vec<Vec<InstanceRecord>> = with_jobs(args.jobs, || {
        records
            .par_iter()
            .map(|r| {
                let class = r.label()?;
                rois.iter()
                    .map(|roi| {
                        let rel = r
                            .roi_masks
                            .get(roi)
                            .ok_or_else(|| runtime(format!("{}: no mask for ROI {roi}", r.subject_id)))?;
                        let path = resolve(&args.manifest, rel);
                        if !path.is_file() {
                            return Err(runtime(format!("{}: mask file {} is missing", r.subject_id, path.display())));
                        }
                        let mask = volume::load_mask(roi, &path)?;
                        let depth = mask.dims()[0];
                        if args.slices > depth {
                            return Err(usage(format!("--slices {} exceeds volume depth {depth}", args.slices)));
                        }
                        Ok(select_instance(&r.subject_id, class, &mask, args.slices)?)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let rows: Vec<InstanceRecord> = rows.into_iter().flatten().collect();

    instances::save(&rows, &args.out)?;
    run.output(&args.out);
    run.finish_beside(&args.out)?;
    Ok(format!("wrote {} instances to {}\n", rows.len(), args.out.display()))
}
