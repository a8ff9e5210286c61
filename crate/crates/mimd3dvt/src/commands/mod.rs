//! One module per subcommand. Each `run` returns the text to print.

pub mod compare;
pub mod cv;
pub mod eval;
pub mod select;
pub mod synth;
pub mod train;
pub mod tune;

use std::path::{Path, PathBuf};

use mimd_core::data::{MinMax, Preprocessor};
use mimd_core::model::{FusionMode, ModelConfig, ModelParams};
use serde::{Deserialize, Serialize};

use crate::config::{mode_name, parse_mode, PipelineConfig};
use crate::error::{runtime, Error, Result};
use crate::formats::{checkpoint, read_json, write_json};

/// Runs `f` on a pool of `jobs` threads; 0 keeps rayon's default pool.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| runtime(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(String::from)
        .collect()
}

/// `model.json`: what a saved model needs besides its weights and config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMeta {
    pub mode: String,
    pub rois: Vec<String>,
    pub seed: u64,
    pub age_range: [f64; 2],
    pub mmse_range: [f64; 2],
    pub intensity_range: [f64; 2],
    pub best_epoch: usize,
    /// Subjects held out from training, when known.
    pub test_subjects: Vec<String>,
}

impl ModelMeta {
    pub fn new(mode: FusionMode, rois: &[String], seed: u64, prep: &Preprocessor) -> Self {
        Self {
            mode: mode_name(mode).to_string(),
            rois: rois.to_vec(),
            seed,
            age_range: [prep.age.min, prep.age.max],
            mmse_range: [prep.mmse.min, prep.mmse.max],
            intensity_range: [prep.image.min, prep.image.max],
            best_epoch: 0,
            test_subjects: Vec::new(),
        }
    }

    pub fn preprocessor(&self) -> Result<Preprocessor> {
        let mm = |r: [f64; 2]| MinMax::new(r[0], r[1]).map_err(Error::from);
        Ok(Preprocessor {
            age: mm(self.age_range)?,
            mmse: mm(self.mmse_range)?,
            image: mm(self.intensity_range)?,
        })
    }
}

pub const CONFIG_FILE: &str = "config.json";
pub const META_FILE: &str = "model.json";
pub const WEIGHTS_FILE: &str = "weights.mwt";

/// Writes config, metadata and weights into `dir`; returns the paths.
pub fn save_model(
    dir: &Path,
    cfg: &PipelineConfig,
    meta: &ModelMeta,
    params: &ModelParams,
) -> Result<Vec<PathBuf>> {
    let paths = [dir.join(CONFIG_FILE), dir.join(META_FILE), dir.join(WEIGHTS_FILE)];
    write_json(&paths[0], cfg)?;
    write_json(&paths[1], meta)?;
    checkpoint::save(params, &paths[2])?;
    Ok(paths.to_vec())
}

pub struct SavedModel {
    pub config: PipelineConfig,
    pub meta: ModelMeta,
    pub model: ModelConfig,
    pub params: ModelParams,
}

pub fn load_model(dir: &Path) -> Result<SavedModel> {
    let config: PipelineConfig = read_json(dir.join(CONFIG_FILE))?;
    config.validate()?;
    let meta: ModelMeta = read_json(dir.join(META_FILE))?;
    let model = config.model_config(parse_mode(&meta.mode)?, meta.rois.len());
    let params = checkpoint::load(&model, dir.join(WEIGHTS_FILE))?;
    Ok(SavedModel {
        config,
        meta,
        model,
        params,
    })
}
