use rand::Rng as _;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::nets::DataRange;
use crate::rng::{self, stream};

/// `classes` isotropic Gaussian clusters in `[0,1]^dim`, `per_class` samples
/// each, clipped to the unit cube. Centroids are drawn uniformly from
/// `[0.1, 0.9]^dim`; both centroids and samples are fixed by `seed`.
/// Samples are ordered class by class.
pub fn synth_blobs(classes: usize, dim: usize, per_class: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 || dim < 2 {
        return Err(Error::Config(format!("blobs need C >= 2 and n >= 2, got C={classes}, n={dim}")));
    }
    if per_class == 0 {
        return Err(Error::Config("blobs need at least one sample per class".into()));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::Config(format!("spread must be non-negative, got {spread}")));
    }
    let mut rng = rng::rng(seed, &[stream::DATA]);
    let centroids: Vec<Vec<f64>> =
        (0..classes).map(|_| (0..dim).map(|_| rng.random_range(0.1..0.9)).collect()).collect();
    let mut values = Vec::with_capacity(classes * per_class * dim);
    let mut labels = Vec::with_capacity(classes * per_class);
    for (c, centroid) in centroids.iter().enumerate() {
        for _ in 0..per_class {
            for &mu in centroid {
                let noise: f64 = rng.sample(StandardNormal);
                values.push((mu + spread * noise).clamp(0.0, 1.0));
            }
            labels.push(c);
        }
    }
    let samples = Tensor::from_parts(vec![classes * per_class, dim], values);
    let ds = Dataset::new(samples, labels, classes, DataRange::ZeroOne)?;
    let side = (dim as f64).sqrt() as usize;
    if side * side == dim {
        ds.with_spatial(side, side)
    } else {
        Ok(ds)
    }
}

/// Per-class means of a dataset, `[C][n]`. Reads labels.
pub fn class_centroids(ds: &Dataset) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; ds.dim()]; ds.classes()];
    let mut counts = vec![0usize; ds.classes()];
    for (row, &l) in ds.samples().rows().zip(ds.eval_labels()) {
        sums[l].iter_mut().zip(row).for_each(|(s, v)| *s += v);
        counts[l] += 1;
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_spread_gives_centroids() {
        let ds = synth_blobs(3, 5, 4, 0.0, 11).unwrap();
        for c in 0..3 {
            let first = ds.sample(c * 4).to_vec();
            for k in 1..4 {
                assert_eq!(ds.sample(c * 4 + k), first.as_slice());
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(synth_blobs(4, 16, 10, 0.05, 3).unwrap(), synth_blobs(4, 16, 10, 0.05, 3).unwrap());
        assert_ne!(synth_blobs(4, 16, 10, 0.05, 3).unwrap(), synth_blobs(4, 16, 10, 0.05, 4).unwrap());
    }

    #[test]
    fn rejects_degenerate_sizes() {
        assert!(synth_blobs(1, 4, 10, 0.1, 0).is_err());
        assert!(synth_blobs(2, 1, 10, 0.1, 0).is_err());
    }

    #[test]
    fn values_in_unit_range_and_square_is_spatial() {
        let ds = synth_blobs(4, 64, 20, 0.5, 1).unwrap();
        assert!(ds.samples().values().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(ds.spatial(), Some((8, 8)));
    }

    /// Nearest-centroid oracle on held-out draws.
    #[test]
    fn nearest_centroid_oracle_separates_blobs() {
        let ds = synth_blobs(4, 16, 500, 0.05, 21).unwrap();
        let (train, test) = ds.split(0.5, 2).unwrap();
        let centroids = class_centroids(&train);
        let labels = test.eval_labels();
        let correct = test
            .samples()
            .rows()
            .zip(labels)
            .filter(|(row, &l)| {
                let d = |c: &Vec<f64>| c.iter().zip(row.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                let best = (0..4).min_by(|&a, &b| d(&centroids[a]).total_cmp(&d(&centroids[b]))).unwrap();
                best == l
            })
            .count();
        assert!(correct as f64 / test.len() as f64 >= 0.99);
    }
}
