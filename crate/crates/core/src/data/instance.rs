//! ROI instance selection: which slices to keep and where to crop.
//!
//! The slice window is the contiguous run of `slice_count` slices holding the
//! most mask voxels. The in-plane crop centre is the per-axis statistical mode
//! of the per-slice mask centroids, so a few atypical slices cannot drag the
//! crop off the structure.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::records::Class;
use super::volume::{RoiMask, Volume};
use crate::error::{invalid, Error, Result};
use crate::math;
use crate::tensor::Tensor;

/// Default slices per instance.
pub const DEFAULT_SLICE_COUNT: usize = 25;
/// Default in-plane crop size.
pub const DEFAULT_CROP: (usize, usize) = (32, 32);

/// One selected 3D ROI crop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceRecord {
    pub subject_id: String,
    pub class: Class,
    pub roi: String,
    pub slice_start: usize,
    pub slice_count: usize,
    /// `(row, column)` crop centre.
    pub centroid: (usize, usize),
}

impl InstanceRecord {
    /// Checks the slice window against the volume depth and the centroid
    /// against the plane.
    pub fn validate(&self, dims: [usize; 3], crop: (usize, usize)) -> Result<()> {
        if self.slice_count == 0 || self.slice_start + self.slice_count > dims[0] {
            return Err(invalid(format!(
                "{}: slices {}..{} outside depth {}",
                self.subject_id,
                self.slice_start,
                self.slice_start + self.slice_count,
                dims[0]
            )));
        }
        if crop.0 > dims[1] || crop.1 > dims[2] {
            return Err(invalid(format!(
                "crop {crop:?} larger than plane {}x{}",
                dims[1], dims[2]
            )));
        }
        if self.centroid.0 >= dims[1] || self.centroid.1 >= dims[2] {
            return Err(invalid(format!(
                "{}: centroid {:?} outside plane",
                self.subject_id, self.centroid
            )));
        }
        Ok(())
    }
}

/// Start of the length-`window` slice run with the largest mask mass;
/// ties resolve to the smallest start.
pub fn slice_window_select(mask: &RoiMask, window: usize) -> Result<usize> {
    best_window(&mask.slice_counts(), window)
}

pub(crate) fn best_window(counts: &[usize], window: usize) -> Result<usize> {
    if window == 0 || counts.len() < window {
        return Err(invalid(format!(
            "volume depth {} smaller than slice window {window}",
            counts.len()
        )));
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::Empty("ROI mask"));
    }
    let mut sum: usize = counts[..window].iter().sum();
    let (mut best, mut best_start) = (sum, 0);
    for start in 1..=counts.len() - window {
        sum = sum + counts[start + window - 1] - counts[start - 1];
        if sum > best {
            best = sum;
            best_start = start;
        }
    }
    Ok(best_start)
}

/// Most frequent value; ties resolve to the smallest.
pub(crate) fn mode(values: &[usize]) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &v in values {
        *counts.entry(v).or_default() += 1;
    }
    let mut best: Option<(usize, usize)> = None;
    for (v, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((v, c));
        }
    }
    best.map(|(v, _)| v)
}

/// Half-up rounded centroid `(row, column)` of each slice's mask pixels.
/// Slices without mask pixels yield `None`.
pub fn slice_centroids(mask: &RoiMask, slice_start: usize, slice_count: usize) -> Result<Vec<Option<(usize, usize)>>> {
    let [depth, height, width] = mask.dims();
    if slice_count == 0 || slice_start + slice_count > depth {
        return Err(invalid(format!(
            "slice window {slice_start}..{} outside depth {depth}",
            slice_start + slice_count
        )));
    }
    let mut out = Vec::with_capacity(slice_count);
    for z in slice_start..slice_start + slice_count {
        let (mut n, mut sy, mut sx) = (0usize, 0usize, 0usize);
        for y in 0..height {
            for x in 0..width {
                if mask.is_set(z, y, x) {
                    n += 1;
                    sy += y;
                    sx += x;
                }
            }
        }
        out.push((n > 0).then(|| {
            let round = |s: usize| math::floor(s as f64 / n as f64 + 0.5) as usize;
            (round(sy), round(sx))
        }));
    }
    Ok(out)
}

/// Per-axis statistical mode of the per-slice centroids in the window.
pub fn modal_centroid(mask: &RoiMask, slice_start: usize, slice_count: usize) -> Result<(usize, usize)> {
    let centroids: Vec<(usize, usize)> = slice_centroids(mask, slice_start, slice_count)?
        .into_iter()
        .flatten()
        .collect();
    mode_of_centroids(&centroids).ok_or(Error::Empty("slices with ROI pixels in window"))
}

/// Per-axis mode of a centroid list.
pub fn mode_of_centroids(centroids: &[(usize, usize)]) -> Option<(usize, usize)> {
    let rows: Vec<usize> = centroids.iter().map(|c| c.0).collect();
    let cols: Vec<usize> = centroids.iter().map(|c| c.1).collect();
    Some((mode(&rows)?, mode(&cols)?))
}

/// Selects the slice window and modal centroid for one subject's ROI.
pub fn select_instance(
    subject_id: &str,
    class: Class,
    mask: &RoiMask,
    slice_count: usize,
) -> Result<InstanceRecord> {
    let slice_start = slice_window_select(mask, slice_count)?;
    let centroid = modal_centroid(mask, slice_start, slice_count)?;
    Ok(InstanceRecord {
        subject_id: String::from(subject_id),
        class,
        roi: mask.name.clone(),
        slice_start,
        slice_count,
        centroid,
    })
}

/// Top-left corner of a `size`-long window centred at `centre` and shifted
/// to lie inside `0..extent`.
pub fn clamp_window(centre: usize, size: usize, extent: usize) -> usize {
    let start = centre as i64 - (size / 2) as i64;
    start.clamp(0, (extent - size) as i64) as usize
}

/// Crops `slice_count × crop.0 × crop.1` around the instance centroid and
/// replicates the grey level over `channels`. Windows near a border are
/// shifted inward, never padded.
pub fn crop_roi(
    volume: &Volume,
    instance: &InstanceRecord,
    crop: (usize, usize),
    channels: usize,
) -> Result<Tensor> {
    let dims = volume.dims();
    if channels == 0 {
        return Err(invalid("channel count must be positive"));
    }
    instance.validate(dims, crop)?;
    let r0 = clamp_window(instance.centroid.0, crop.0, dims[1]);
    let c0 = clamp_window(instance.centroid.1, crop.1, dims[2]);
    let mut out = Vec::with_capacity(instance.slice_count * crop.0 * crop.1 * channels);
    for z in instance.slice_start..instance.slice_start + instance.slice_count {
        for y in r0..r0 + crop.0 {
            let row = volume.index(z, y, c0);
            for &v in &volume.voxels()[row..row + crop.1] {
                for _ in 0..channels {
                    out.push(f64::from(v));
                }
            }
        }
    }
    Tensor::new(
        alloc::vec![instance.slice_count, crop.0, crop.1, channels],
        out,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn window_examples() {
        // counts 100 - |s - 30| for s = 0..60, window 25 → centred on 30
        let counts: Vec<usize> = (0..=60).map(|s: i64| (100 - (s - 30).abs()) as usize).collect();
        // brute force oracle
        let brute = (0..=counts.len() - 25)
            .map(|s| (counts[s..s + 25].iter().sum::<usize>(), s))
            .fold((0, 0), |best, (m, s)| if m > best.0 { (m, s) } else { best });
        assert_eq!(brute.1, 18);
        assert_eq!(best_window(&counts, 25).unwrap(), 18);

        let mut spike = vec![0usize; 40];
        spike[17] = 9;
        assert_eq!(best_window(&spike, 1).unwrap(), 17);

        assert_eq!(best_window(&[3; 30], 25).unwrap(), 0);
        assert!(best_window(&[0; 30], 25).is_err());
        assert!(best_window(&[1; 10], 25).is_err());
    }

    #[test]
    fn mode_examples() {
        assert_eq!(mode_of_centroids(&[(10, 12); 5]), Some((10, 12)));
        assert_eq!(mode_of_centroids(&[(3, 4), (3, 4), (5, 6)]), Some((3, 4)));
        assert_eq!(mode(&[3, 3, 5, 5]), Some(3));
        assert_eq!(mode(&[5, 5, 3, 3]), Some(3));
        assert_eq!(mode(&[]), None);
    }

    fn square_mask(dims: [usize; 3], slices: core::ops::Range<usize>, rows: core::ops::Range<usize>, cols: core::ops::Range<usize>) -> RoiMask {
        let mut v = vec![0u8; dims.iter().product()];
        for z in slices {
            for y in rows.clone() {
                for x in cols.clone() {
                    v[(z * dims[1] + y) * dims[2] + x] = 1;
                }
            }
        }
        RoiMask::new("hippocampus_left", dims, v).unwrap()
    }

    #[test]
    fn centroid_rounds_half_up() {
        // rows 4..6 → mean 4.5 → 5; cols 2..5 → mean 3
        let m = square_mask([3, 10, 10], 0..3, 4..6, 2..5);
        assert_eq!(modal_centroid(&m, 0, 3).unwrap(), (5, 3));
        let empty = RoiMask::new("x", [3, 4, 4], vec![0; 48]).unwrap();
        assert!(modal_centroid(&empty, 0, 3).is_err());
    }

    #[test]
    fn crop_examples() {
        let dims = [25, 64, 64];
        let vol = Volume::new(dims, (0..25 * 64 * 64).map(|i| (i % 64) as f32 / 64.0).collect()).unwrap();
        let mut inst = InstanceRecord {
            subject_id: "s".into(),
            class: Class::Cn,
            roi: "r".into(),
            slice_start: 0,
            slice_count: 25,
            centroid: (16, 16),
        };
        assert_eq!(clamp_window(16, 32, 64), 0);
        let c = crop_roi(&vol, &inst, (32, 32), 3).unwrap();
        assert_eq!(c.shape(), &[25, 32, 32, 3]);
        assert_eq!(c.at(&[0, 0, 5, 2]), 5.0 / 64.0);

        inst.centroid = (5, 5);
        assert_eq!(clamp_window(5, 32, 64), 0);
        let d = crop_roi(&vol, &inst, (32, 32), 3).unwrap();
        assert_eq!(c, d);

        inst.centroid = (63, 63);
        assert_eq!(clamp_window(63, 32, 64), 32);

        let small = Volume::new([25, 16, 16], vec![0.0; 25 * 256]).unwrap();
        inst.centroid = (8, 8);
        assert!(crop_roi(&small, &inst, (32, 32), 3).is_err());
    }

    #[test]
    fn select_instance_combines_window_and_centroid() {
        let m = square_mask([40, 48, 48], 10..20, 20..26, 30..34);
        let inst = select_instance("s1", Class::Ad, &m, 25).unwrap();
        assert_eq!(inst.slice_start, 0);
        assert_eq!(inst.centroid, (23, 32));
        inst.validate(m.dims(), (32, 32)).unwrap();
    }
}
