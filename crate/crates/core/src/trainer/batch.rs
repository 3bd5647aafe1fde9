//! Seeded epoch batching with fixed-length crops.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::nnet::model::features_to_input;
use crate::nnet::Tensor;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Positions of the batch members in the training set.
    pub members: Vec<usize>,
    pub labels: Vec<usize>,
    pub input: Tensor<f32>,
}

/// Training-set order for one epoch, shuffled by `(seed, epoch)`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[rng::tag::SHUFFLE, epoch as u64]));
    order
}

/// Cuts `m` to exactly `crop` frames. Longer inputs take a window at an
/// offset drawn from `rng`; shorter ones are zero-padded with half the
/// padding before and the rest after.
pub fn crop_or_pad(m: &FeatureMatrix, crop: usize, rng: &mut rng::Rng) -> FeatureMatrix {
    let d = m.dims;
    let values = if m.frames >= crop {
        let start = rng.random_range(0..=m.frames - crop);
        m.values[start * d..(start + crop) * d].to_vec()
    } else {
        let before = (crop - m.frames) / 2;
        let mut v = vec![0.0; crop * d];
        v[before * d..(before + m.frames) * d].copy_from_slice(&m.values);
        v
    };
    FeatureMatrix {
        values,
        frames: crop,
        dims: d,
        utterance_id: m.utterance_id.clone(),
    }
}

/// Batches for one epoch. Crop offsets come from a stream keyed by
/// `(seed, epoch, position in the training set)`. The final short batch is
/// kept.
pub fn make_batches(
    features: &[FeatureMatrix],
    labels: &[usize],
    crop_frames: usize,
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<Vec<Batch>> {
    if features.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} feature matrices but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if batch_size == 0 || crop_frames == 0 {
        return Err(Error::Config("batch_size and crop_frames must be positive".into()));
    }
    let order = epoch_order(features.len(), seed, epoch);
    order
        .chunks(batch_size)
        .map(|members| {
            let crops: Vec<FeatureMatrix> = members
                .iter()
                .map(|&i| {
                    let mut r = rng::stream(seed, &[rng::tag::CROP, epoch as u64, i as u64]);
                    crop_or_pad(&features[i], crop_frames, &mut r)
                })
                .collect();
            let refs: Vec<&FeatureMatrix> = crops.iter().collect();
            Ok(Batch {
                members: members.to_vec(),
                labels: members.iter().map(|&i| labels[i]).collect(),
                input: features_to_input(&refs)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(frames: usize, dims: usize, id: &str) -> FeatureMatrix {
        let values = (0..frames * dims).map(|v| v as f32 + 1.0).collect();
        FeatureMatrix::new(values, frames, dims, id).unwrap()
    }

    #[test]
    fn batch_sizes_keep_final_short_batch() {
        let feats: Vec<_> = (0..100).map(|i| mat(10, 2, &format!("u{i}"))).collect();
        let labels = vec![0; 100];
        let sizes: Vec<usize> = make_batches(&feats, &labels, 8, 32, 1, 0)
            .unwrap()
            .iter()
            .map(|b| b.members.len())
            .collect();
        assert_eq!(sizes, [32, 32, 32, 4]);
    }

    #[test]
    fn short_utterance_is_padded_symmetrically() {
        let m = mat(98, 3, "a");
        let out = crop_or_pad(&m, 300, &mut rng::stream(0, &[]));
        assert_eq!(out.frames, 300);
        assert!(out.values[..101 * 3].iter().all(|&v| v == 0.0));
        assert!(out.values[(101 + 98) * 3..].iter().all(|&v| v == 0.0));
        assert_eq!(&out.values[101 * 3..(101 + 98) * 3], &m.values[..]);
    }

    #[test]
    fn long_utterance_is_cropped_to_contiguous_window() {
        let m = mat(50, 2, "a");
        let out = crop_or_pad(&m, 20, &mut rng::stream(3, &[]));
        let start = (out.values[0] as usize - 1) / 2;
        assert!(start + 20 <= 50);
        assert_eq!(&out.values[..], &m.values[start * 2..(start + 20) * 2]);
    }

    #[test]
    fn same_seed_and_epoch_same_batches() {
        let feats: Vec<_> = (0..20).map(|i| mat(30 + i, 2, &format!("u{i}"))).collect();
        let labels: Vec<usize> = (0..20).map(|i| i % 3).collect();
        let a = make_batches(&feats, &labels, 16, 6, 9, 2).unwrap();
        let b = make_batches(&feats, &labels, 16, 6, 9, 2).unwrap();
        let c = make_batches(&feats, &labels, 16, 6, 9, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let mut seen: Vec<usize> = a.iter().flat_map(|b| b.members.clone()).collect();
        seen.sort();
        assert_eq!(seen, (0..20).collect::<Vec<_>>());
    }
}
