//! Synthetic subjects standing in for registered MRI volumes.
//!
//! Each subject gets a noisy background volume and one solid ellipsoid per
//! configured ROI, with the matching binary mask. The class signal lives in
//! the ROI: AD ellipsoids are darker and smaller, both scaled by the
//! separability knob `s`. Demographics follow the study cohort shapes, so
//! MMSE stays informative even when `s = 0`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::instance::{DEFAULT_CROP, DEFAULT_SLICE_COUNT};
use super::records::{Cdr, Class, Gender, SubjectRecord, VisitDate};
use super::volume::{Hemisphere, RoiMask, Volume};
use crate::error::{config_err, Result};
use crate::math;
use crate::rng;

/// Extra room around the slice window and crop that the volume must have.
pub const MARGIN: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub subjects: usize,
    /// `(D, H, W)`.
    pub dims: [usize; 3],
    /// 0 = image classes identical, 1 = separable by mean ROI intensity.
    pub separability: f64,
    /// Voxel noise standard deviation.
    pub noise: f64,
    pub rois: Vec<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            subjects: 56,
            dims: [48, 64, 64],
            separability: 1.0,
            noise: 0.05,
            rois: alloc::vec![String::from("hippocampus_left")],
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let min = [
            DEFAULT_SLICE_COUNT + MARGIN,
            DEFAULT_CROP.0 + MARGIN,
            DEFAULT_CROP.1 + MARGIN,
        ];
        if self.dims.iter().zip(min).any(|(&d, m)| d < m) {
            return Err(config_err(format!(
                "dims {:?} smaller than minimum {min:?}",
                self.dims
            )));
        }
        if !(0.0..=1.0).contains(&self.separability) {
            return Err(config_err(format!(
                "separability {} outside [0, 1]",
                self.separability
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(config_err(format!("noise {} must be non-negative", self.noise)));
        }
        if self.subjects == 0 {
            return Err(config_err("at least one subject is required"));
        }
        if self.rois.is_empty() {
            return Err(config_err("at least one ROI is required"));
        }
        let mut seen = alloc::collections::BTreeSet::new();
        for r in &self.rois {
            if r.is_empty() || !r.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(config_err(format!("ROI name {r:?} must be [A-Za-z0-9_]+")));
            }
            if !seen.insert(r) {
                return Err(config_err(format!("duplicate ROI {r:?}")));
            }
        }
        Ok(())
    }
}

/// One generated subject. Paths in `record` are relative to the dataset root.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSubject {
    pub record: SubjectRecord,
    pub volume: Volume,
    /// In `SynthConfig::rois` order.
    pub masks: Vec<RoiMask>,
}

pub fn subject_id(i: usize) -> String {
    format!("sub-{i:04}")
}

pub fn volume_path(id: &str) -> String {
    format!("volumes/{id}.miv")
}

pub fn mask_path(id: &str, roi: &str) -> String {
    format!("masks/{id}_{roi}.miv")
}

/// Class of subject `i`: alternating, starting with CN.
pub fn class_of(i: usize) -> Class {
    if i.is_multiple_of(2) {
        Class::Cn
    } else {
        Class::Ad
    }
}

struct Ellipsoid {
    centre: [f64; 3],
    radii: [f64; 3],
}

impl Ellipsoid {
    fn contains(&self, z: usize, y: usize, x: usize) -> bool {
        let p = [z as f64, y as f64, x as f64];
        (0..3)
            .map(|a| {
                let d = (p[a] - self.centre[a]) / self.radii[a];
                d * d
            })
            .sum::<f64>()
            <= 1.0
    }
}

fn base_name(roi: &str) -> &str {
    roi.strip_suffix("_left")
        .or_else(|| roi.strip_suffix("_right"))
        .unwrap_or(roi)
}

/// Nominal ROI centre: hemisphere picks the column, the base structure picks
/// row and depth.
fn nominal_centre(cfg: &SynthConfig, roi: &str) -> [f64; 3] {
    let [d, h, w] = cfg.dims.map(|v| v as f64);
    let mut bases: Vec<&str> = Vec::new();
    for r in &cfg.rois {
        let b = base_name(r);
        if !bases.contains(&b) {
            bases.push(b);
        }
    }
    let bi = bases.iter().position(|&b| b == base_name(roi)).unwrap_or(0);
    let col = match Hemisphere::from_roi_name(roi) {
        Some(Hemisphere::Left) => 0.3,
        Some(Hemisphere::Right) => 0.7,
        None => 0.5,
    };
    let row = [0.25, 0.5, 0.75][bi % 3];
    let depth = if bi % 2 == 0 { 0.4 } else { 0.6 };
    [d * depth, h * row, w * col]
}

fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, std: f64, lo: f64, hi: f64) -> f64 {
    let n = Normal::new(mean, std).expect("positive std");
    loop {
        let v = n.sample(rng);
        if (lo..=hi).contains(&v) {
            return v;
        }
    }
}

fn clipped_round<R: Rng + ?Sized>(rng: &mut R, mean: f64, std: f64, lo: f64, hi: f64) -> u32 {
    let v = Normal::new(mean, std).expect("positive std").sample(rng);
    math::round(v).clamp(lo, hi) as u32
}

/// Generates subject `i`; each subject draws from its own stream so subsets
/// can be generated independently.
pub fn synth_subject(cfg: &SynthConfig, seed: u64, i: usize) -> Result<SynthSubject> {
    cfg.validate()?;
    let mut rng = rng::derive(seed, &[i as u64]);
    let class = class_of(i);
    let ad = f64::from(u8::from(class == Class::Ad));
    let s = cfg.separability;
    let [depth, height, width] = cfg.dims;

    let noise = Normal::new(0.0, cfg.noise).map_err(|_| config_err("bad noise"))?;
    let mut voxels: Vec<f32> = (0..depth * height * width)
        .map(|_| (0.3 + noise.sample(&mut rng)).clamp(0.0, 1.0) as f32)
        .collect();

    let id = subject_id(i);
    let mut masks = Vec::with_capacity(cfg.rois.len());
    let mut roi_masks = BTreeMap::new();
    for roi in &cfg.rois {
        let nominal = nominal_centre(cfg, roi);
        let centre = nominal.map(|c| c + rng.random_range(-2.0..=2.0));
        let scale = 1.0 - 0.1 * s * ad + rng.random_range(-0.1..0.1);
        let radii = [
            depth as f64 * 0.2 * scale,
            height as f64 * 0.12 * scale,
            width as f64 * 0.1 * scale,
        ];
        let shape = Ellipsoid { centre, radii };
        let mean = 0.55 + rng.random_range(-0.14..0.14) - 0.3 * s * ad;
        let mut mask = alloc::vec![0u8; voxels.len()];
        let mut idx = 0;
        for z in 0..depth {
            for y in 0..height {
                for x in 0..width {
                    if shape.contains(z, y, x) {
                        mask[idx] = 1;
                        voxels[idx] = (mean + noise.sample(&mut rng)).clamp(0.0, 1.0) as f32;
                    }
                    idx += 1;
                }
            }
        }
        roi_masks.insert(roi.clone(), mask_path(&id, roi));
        masks.push(RoiMask::new(roi.clone(), cfg.dims, mask)?);
    }

    let (age_mean, mmse) = match class {
        Class::Cn => (74.36, clipped_round(&mut rng, 29.0, 1.0, 24.0, 30.0)),
        Class::Ad => (76.62, clipped_round(&mut rng, 20.0, 4.0, 0.0, 26.0)),
    };
    let age = truncated_normal(&mut rng, age_mean, 8.0, 55.0, 95.0);
    let gender = if rng.random::<bool>() { Gender::F } else { Gender::M };
    let cdr = match class {
        Class::Cn => Cdr::Zero,
        Class::Ad => [Cdr::One, Cdr::Two, Cdr::Three][rng.random_range(0..3)],
    };
    let visit_date = VisitDate::new(
        rng.random_range(2005..=2020),
        rng.random_range(1..=12),
        rng.random_range(1..=28),
    )?;

    Ok(SynthSubject {
        record: SubjectRecord {
            volume_path: volume_path(&id),
            subject_id: id,
            visit_date,
            age,
            mmse,
            gender,
            cdr,
            roi_masks,
        },
        volume: Volume::new(cfg.dims, voxels)?,
        masks,
    })
}

pub fn synth_generate(cfg: &SynthConfig, seed: u64) -> Result<Vec<SynthSubject>> {
    cfg.validate()?;
    (0..cfg.subjects).map(|i| synth_subject(cfg, seed, i)).collect()
}

/// Mean raw intensity inside the mask; the single feature used by the
/// separability oracle.
pub fn mean_roi_intensity(volume: &Volume, mask: &RoiMask) -> f64 {
    let (sum, n) = volume
        .voxels()
        .iter()
        .zip(mask.voxels())
        .filter(|(_, &m)| m != 0)
        .fold((0.0, 0usize), |(s, n), (&v, _)| (s + f64::from(v), n + 1));
    sum / n.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(subjects: usize, s: f64) -> SynthConfig {
        SynthConfig {
            subjects,
            dims: [33, 40, 40],
            separability: s,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn rejects_small_dims() {
        let cfg = SynthConfig {
            dims: [32, 64, 64],
            ..SynthConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(small(1, 1.5).validate().is_err());
    }

    #[test]
    fn deterministic_and_labelled() {
        let cfg = small(4, 1.0);
        let a = synth_generate(&cfg, 3).unwrap();
        assert_eq!(a, synth_generate(&cfg, 3).unwrap());
        assert_ne!(a[0].volume, synth_generate(&cfg, 4).unwrap()[0].volume);
        for (i, s) in a.iter().enumerate() {
            s.record.validate().unwrap();
            assert_eq!(s.record.label().unwrap(), class_of(i));
            assert!(s.masks[0].count() > 0);
            let m = s.record.mmse;
            match class_of(i) {
                Class::Cn => assert!((24..=30).contains(&m)),
                Class::Ad => assert!(m <= 26),
            }
        }
    }

    #[test]
    fn threshold_oracle_separates_at_full_separability() {
        let cfg = small(40, 1.0);
        let subjects = synth_generate(&cfg, 11).unwrap();
        let (mut cn_min, mut ad_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for (i, s) in subjects.iter().enumerate() {
            let f = mean_roi_intensity(&s.volume, &s.masks[0]);
            match class_of(i) {
                Class::Cn => cn_min = cn_min.min(f),
                Class::Ad => ad_max = ad_max.max(f),
            }
        }
        assert!(ad_max < cn_min, "{ad_max} >= {cn_min}");
    }
}
