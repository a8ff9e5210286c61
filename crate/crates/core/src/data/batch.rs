use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::preprocess::MixedSample;
use super::records::Class;
use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

/// Shuffled batch index lists for one epoch. The last partial batch is kept
/// unless `drop_last`.
pub fn batch_order<R: Rng + ?Sized>(
    n: usize,
    batch_size: usize,
    rng: &mut R,
    drop_last: bool,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(invalid("batch size must be at least 1"));
    }
    if n == 0 {
        return Err(Error::Empty("instances"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Ok(order
        .chunks(batch_size)
        .filter(|c| !drop_last || c.len() == batch_size)
        .map(<[usize]>::to_vec)
        .collect())
}

/// A batch with a shared leading dimension `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedBatch {
    /// `B × F`.
    pub tabular: Tensor,
    /// Per branch, `B × T × H × W × C`.
    pub images: Vec<Tensor>,
    pub labels: Vec<Class>,
}

impl MixedBatch {
    pub fn from_samples(samples: &[&MixedSample]) -> Result<Self> {
        let first = samples.first().ok_or(Error::Empty("batch samples"))?;
        let features = first.tabular.len();
        let branches = first.images.len();
        let mut tabular = Vec::with_capacity(samples.len() * features);
        let mut images: Vec<Vec<f64>> = alloc::vec![Vec::new(); branches];
        for s in samples {
            if s.tabular.len() != features || s.images.len() != branches {
                return Err(invalid("samples in a batch must share their layout"));
            }
            tabular.extend_from_slice(&s.tabular);
            for (b, img) in s.images.iter().enumerate() {
                if img.shape() != first.images[b].shape() {
                    return Err(invalid("image shapes differ within a batch"));
                }
                images[b].extend_from_slice(img.data());
            }
        }
        let b = samples.len();
        let tabular = if features == 0 {
            Tensor::zeros(&[b, 1])
        } else {
            Tensor::new(alloc::vec![b, features], tabular)?
        };
        let images = images
            .into_iter()
            .enumerate()
            .map(|(i, data)| {
                let mut shape = alloc::vec![b];
                shape.extend_from_slice(first.images[i].shape());
                Tensor::new(shape, data)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            tabular,
            images,
            labels: samples.iter().map(|s| s.label).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Seeded shuffle of `samples` into batches of `batch_size`.
pub fn build_batches<R: Rng + ?Sized>(
    samples: &[MixedSample],
    batch_size: usize,
    rng: &mut R,
    drop_last: bool,
) -> Result<Vec<MixedBatch>> {
    batch_order(samples.len(), batch_size, rng, drop_last)?
        .iter()
        .map(|idx| {
            let refs: Vec<&MixedSample> = idx.iter().map(|&i| &samples[i]).collect();
            MixedBatch::from_samples(&refs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn batch_sizes_and_permutation() {
        let b = batch_order(14, 6, &mut rng::seeded(1), false).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), [6, 6, 2]);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..14).collect::<Vec<_>>());
        assert_eq!(b, batch_order(14, 6, &mut rng::seeded(1), false).unwrap());
        let d = batch_order(14, 6, &mut rng::seeded(1), true).unwrap();
        assert_eq!(d.len(), 2);
        assert!(batch_order(0, 6, &mut rng::seeded(1), false).is_err());
        assert!(batch_order(3, 0, &mut rng::seeded(1), false).is_err());
    }

    #[test]
    fn batches_stack_samples() {
        let sample = |v: f64, label| MixedSample {
            subject_id: "s".into(),
            label,
            tabular: alloc::vec![v; 4],
            images: alloc::vec![Tensor::full(&[2, 2, 2, 1], v)],
        };
        let samples = [sample(0.0, Class::Cn), sample(1.0, Class::Ad), sample(0.5, Class::Cn)];
        let batches = build_batches(&samples, 2, &mut rng::seeded(0), false).unwrap();
        assert_eq!(batches.len(), 2);
        assert_eq!(batches[0].tabular.shape(), &[2, 4]);
        assert_eq!(batches[0].images[0].shape(), &[2, 2, 2, 2, 1]);
        assert_eq!(batches.iter().map(MixedBatch::len).sum::<usize>(), 3);
    }
}
