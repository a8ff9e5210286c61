//! Turns a subject manifest and an instance table into raw model samples.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use mimd_core::data::{
    balance_indices, crop_roi, select_latest_visit, InstanceRecord, RawSample, SubjectRecord,
};
use mimd_core::rng;
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{runtime, usage, Result};
use crate::formats::{instances, manifest, volume};

/// Stream id of the class-balancing draw.
const BALANCE_STREAM: u64 = 0xba1a;

/// Manifest paths are relative to the manifest's directory.
pub fn resolve(manifest_path: &Path, rel: &str) -> PathBuf {
    manifest_path.parent().unwrap_or(Path::new(".")).join(rel)
}

/// ROI names in the instance table, sorted.
pub fn instance_rois(rows: &[InstanceRecord]) -> Vec<String> {
    rows.iter()
        .map(|r| r.roi.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Latest visit per subject, undersampled to balanced classes.
pub fn study_subjects(records: &[SubjectRecord], seed: u64) -> Result<Vec<SubjectRecord>> {
    let latest = select_latest_visit(records);
    let labels = latest
        .iter()
        .map(SubjectRecord::label)
        .collect::<mimd_core::Result<Vec<_>>>()?;
    let keep = balance_indices(&labels, &mut rng::derive(seed, &[BALANCE_STREAM]))?;
    Ok(keep.into_iter().map(|i| latest[i].clone()).collect())
}

pub struct LoadedData {
    pub samples: Vec<RawSample>,
    pub rois: Vec<String>,
}

/// Loads each study subject's volume and crops every requested ROI
/// instance. An empty `rois` means every ROI in the instance table.
pub fn load_samples(
    manifest_path: &Path,
    instances_path: &Path,
    rois: &[String],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<LoadedData> {
    let records = manifest::load(manifest_path)?;
    let rows = instances::load(instances_path)?;
    let rois = if rois.is_empty() { instance_rois(&rows) } else { rois.to_vec() };
    if rois.is_empty() {
        return Err(usage("no ROIs requested and none in the instance table"));
    }
    let subjects = study_subjects(&records, seed)?;
    let table: BTreeMap<(&str, &str), &InstanceRecord> = rows
        .iter()
        .map(|r| ((r.subject_id.as_str(), r.roi.as_str()), r))
        .collect();
    for r in &rows {
        if r.slice_count != cfg.slice_number {
            return Err(usage(format!(
                "{}: instance has {} slices but the config expects {}",
                r.subject_id, r.slice_count, cfg.slice_number
            )));
        }
    }

    let samples = subjects
        .par_iter()
        .map(|subject| {
            let vol = volume::load_volume(resolve(manifest_path, &subject.volume_path))?;
            let crops = rois
                .iter()
                .map(|roi| {
                    let inst = table
                        .get(&(subject.subject_id.as_str(), roi.as_str()))
                        .ok_or_else(|| runtime(format!("{}: no instance for ROI {roi}", subject.subject_id)))?;
                    if inst.class != subject.label()? {
                        return Err(runtime(format!(
                            "{}: instance class {} disagrees with the manifest",
                            subject.subject_id, inst.class
                        )));
                    }
                    Ok(crop_roi(&vol, inst, cfg.crop(), cfg.channels)?)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RawSample::from_record(subject, crops)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedData { samples, rois })
}
