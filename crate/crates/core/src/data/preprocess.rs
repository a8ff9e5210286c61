//! Min-max scaling, one-hot encoding and sample assembly.
//!
//! Every fit happens on training data only; applying a fit to other splits
//! clamps into `[0, 1]`.

use alloc::string::String;
use alloc::vec::Vec;

use super::records::{Class, Gender, SubjectRecord};
use crate::error::{Error, Result};
use crate::model::{FusionMode, ModelInput};
use crate::tensor::Tensor;

/// Tabular feature count: scaled age, scaled MMSE, one-hot gender (2).
pub const TABULAR_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(max > min) {
            return Err(Error::ConstantFeature(min));
        }
        Ok(Self { min, max })
    }

    pub fn fit(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut it = values.into_iter().peekable();
        if it.peek().is_none() {
            return Err(Error::Empty("min-max fit values"));
        }
        let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        Self::new(lo, hi)
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

/// `(v - min) / (max - min)`, clamped to `[0, 1]`.
pub fn minmax_scale(values: &[f64], fit_min: f64, fit_max: f64) -> Result<Vec<f64>> {
    let fit = MinMax::new(fit_min, fit_max)?;
    Ok(values.iter().map(|&v| fit.apply(v)).collect())
}

/// F → `[1, 0]`, M → `[0, 1]`.
pub fn one_hot_gender(gender: &str) -> Result<[f64; 2]> {
    Ok(one_hot(gender.parse()?))
}

pub fn one_hot(gender: Gender) -> [f64; 2] {
    match gender {
        Gender::F => [1.0, 0.0],
        Gender::M => [0.0, 1.0],
    }
}

/// A subject before any scaling: raw demographics and one raw crop per ROI.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub subject_id: String,
    pub label: Class,
    pub age: f64,
    pub mmse: f64,
    pub gender: Gender,
    /// `T×H×W×C` per ROI branch, raw intensities.
    pub crops: Vec<Tensor>,
}

impl RawSample {
    pub fn from_record(record: &SubjectRecord, crops: Vec<Tensor>) -> Result<Self> {
        Ok(Self {
            subject_id: record.subject_id.clone(),
            label: record.label()?,
            age: record.age,
            mmse: f64::from(record.mmse),
            gender: record.gender,
            crops,
        })
    }
}

/// A fully preprocessed model input with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSample {
    pub subject_id: String,
    pub label: Class,
    /// `[age, mmse, F, M]`, all in `[0, 1]`.
    pub tabular: Vec<f64>,
    pub images: Vec<Tensor>,
}

impl MixedSample {
    pub fn input(&self, mode: FusionMode) -> ModelInput<'_> {
        ModelInput {
            tabular: match mode {
                FusionMode::Mixed => Some(&self.tabular),
                FusionMode::ImageOnly => None,
            },
            images: &self.images,
        }
    }
}

/// Scaling statistics fitted on a training split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preprocessor {
    pub age: MinMax,
    pub mmse: MinMax,
    pub image: MinMax,
}

impl Preprocessor {
    pub fn fit(train: &[RawSample]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("training samples"));
        }
        Ok(Self {
            age: MinMax::fit(train.iter().map(|s| s.age))?,
            mmse: MinMax::fit(train.iter().map(|s| s.mmse))?,
            image: MinMax::fit(
                train
                    .iter()
                    .flat_map(|s| s.crops.iter().flat_map(|c| c.data().iter().copied())),
            )?,
        })
    }

    pub fn tabular(&self, s: &RawSample) -> Vec<f64> {
        let g = one_hot(s.gender);
        alloc::vec![self.age.apply(s.age), self.mmse.apply(s.mmse), g[0], g[1]]
    }

    pub fn apply(&self, s: &RawSample) -> MixedSample {
        let images = s
            .crops
            .iter()
            .map(|c| {
                let data = c.data().iter().map(|&v| self.image.apply(v)).collect();
                Tensor::new(c.shape().to_vec(), data).expect("shape preserved")
            })
            .collect();
        MixedSample {
            subject_id: s.subject_id.clone(),
            label: s.label,
            tabular: self.tabular(s),
            images,
        }
    }

    pub fn apply_all(&self, samples: &[RawSample]) -> Vec<MixedSample> {
        samples.iter().map(|s| self.apply(s)).collect()
    }
}
