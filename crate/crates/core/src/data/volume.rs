use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// A `D×H×W` intensity grid (slice, row, column), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    voxels: Vec<f32>,
}

impl Volume {
    pub fn new(dims: [usize; 3], voxels: Vec<f32>) -> Result<Self> {
        check_dims(dims, voxels.len())?;
        Ok(Self { dims, voxels })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxels(&self) -> &[f32] {
        &self.voxels
    }

    pub fn voxels_mut(&mut self) -> &mut [f32] {
        &mut self.voxels
    }

    pub fn into_voxels(self) -> Vec<f32> {
        self.voxels
    }

    pub fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[2] + x
    }

    pub fn get(&self, z: usize, y: usize, x: usize) -> f32 {
        self.voxels[self.index(z, y, x)]
    }

    /// `(min, max)` of the raw intensities.
    pub fn intensity_range(&self) -> (f32, f32) {
        self.voxels
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hemisphere {
    Left,
    Right,
}

impl Hemisphere {
    /// Hemisphere implied by an ROI name suffix (`_left` / `_right`).
    pub fn from_roi_name(name: &str) -> Option<Self> {
        if name.ends_with("_left") {
            Some(Hemisphere::Left)
        } else if name.ends_with("_right") {
            Some(Hemisphere::Right)
        } else {
            None
        }
    }
}

/// Binary ROI mask aligned with a [`Volume`].
#[derive(Debug, Clone, PartialEq)]
pub struct RoiMask {
    pub name: String,
    pub hemisphere: Option<Hemisphere>,
    dims: [usize; 3],
    voxels: Vec<u8>,
}

impl RoiMask {
    pub fn new(name: impl Into<String>, dims: [usize; 3], voxels: Vec<u8>) -> Result<Self> {
        check_dims(dims, voxels.len())?;
        if voxels.iter().any(|&v| v > 1) {
            return Err(invalid("mask values must be 0 or 1"));
        }
        let name = name.into();
        Ok(Self {
            hemisphere: Hemisphere::from_roi_name(&name),
            name,
            dims,
            voxels,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxels(&self) -> &[u8] {
        &self.voxels
    }

    pub fn into_voxels(self) -> Vec<u8> {
        self.voxels
    }

    pub fn is_set(&self, z: usize, y: usize, x: usize) -> bool {
        self.voxels[(z * self.dims[1] + y) * self.dims[2] + x] != 0
    }

    /// Number of set pixels in each slice.
    pub fn slice_counts(&self) -> Vec<usize> {
        let plane = self.dims[1] * self.dims[2];
        self.voxels
            .chunks_exact(plane)
            .map(|s| s.iter().filter(|&&v| v != 0).count())
            .collect()
    }

    pub fn count(&self) -> usize {
        self.voxels.iter().filter(|&&v| v != 0).count()
    }
}

fn check_dims(dims: [usize; 3], len: usize) -> Result<()> {
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| invalid("volume dimensions overflow"))?;
    if dims.contains(&0) || n != len {
        return Err(invalid(format!("dims {dims:?} do not hold {len} voxels")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_validation_and_counts() {
        assert!(RoiMask::new("x", [1, 2, 2], alloc::vec![0, 2, 0, 0]).is_err());
        let m = RoiMask::new("fornix_right", [2, 2, 2], alloc::vec![1, 0, 0, 1, 0, 0, 0, 1]).unwrap();
        assert_eq!(m.hemisphere, Some(Hemisphere::Right));
        assert_eq!(m.slice_counts(), alloc::vec![2, 1]);
        assert!(Volume::new([2, 2, 2], alloc::vec![0.0; 7]).is_err());
    }

    #[test]
    fn intensity_range() {
        let v = Volume::new([1, 1, 3], alloc::vec![0.5, -1.0, 2.0]).unwrap();
        assert_eq!(v.intensity_range(), (-1.0, 2.0));
    }
}
