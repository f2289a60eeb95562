//! Datasets: IDX parsing, synthetic blobs, augmentation and batching.
//!
//! Labels are quarantined: [`Dataset::labels`] counts every read so tests
//! can assert that no training path touches them. Accuracy evaluation goes
//! through a separate crate-private accessor counted on its own.

mod augment;
mod batch;
mod blobs;
mod idx;

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

pub use augment::{augment, AugmentFlags, Augmenter};
pub use batch::batches;
pub use blobs::{class_centroids, synth_blobs};
pub use idx::{parse_idx, read_idx_files, serialize_idx};

use rand::seq::SliceRandom;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::nets::DataRange;
use crate::rng::{self, stream};

pub struct Dataset {
    samples: Tensor,
    labels: Vec<usize>,
    classes: usize,
    range: DataRange,
    spatial: Option<(usize, usize)>,
    label_reads: AtomicUsize,
    eval_reads: AtomicUsize,
}

impl Clone for Dataset {
    fn clone(&self) -> Self {
        Self {
            samples: self.samples.clone(),
            labels: self.labels.clone(),
            classes: self.classes,
            range: self.range,
            spatial: self.spatial,
            label_reads: AtomicUsize::new(0),
            eval_reads: AtomicUsize::new(0),
        }
    }
}

impl std::fmt::Debug for Dataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dataset")
            .field("len", &self.len())
            .field("dim", &self.dim())
            .field("classes", &self.classes)
            .field("range", &self.range)
            .finish()
    }
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.samples == other.samples
            && self.labels == other.labels
            && self.classes == other.classes
            && self.range == other.range
            && self.spatial == other.spatial
    }
}

impl Dataset {
    /// `samples` is `[N, n]`; every value must lie in `range`.
    pub fn new(samples: Tensor, labels: Vec<usize>, classes: usize, range: DataRange) -> Result<Self> {
        if samples.rank() != 2 {
            return Err(Error::shape("dataset", format!("samples must be [N, n], got {:?}", samples.shape())));
        }
        if samples.shape()[0] != labels.len() {
            return Err(Error::shape(
                "dataset",
                format!("{} samples but {} labels", samples.shape()[0], labels.len()),
            ));
        }
        if classes < 1 {
            return Err(Error::Contract("dataset needs at least one class".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Contract(format!("label {bad} outside [0, {classes})")));
        }
        let (lo, hi) = range.bounds();
        if samples.values().iter().any(|v| *v < lo || *v > hi) {
            return Err(Error::Contract(format!("sample values outside [{lo}, {hi}]")));
        }
        Ok(Self {
            samples,
            labels,
            classes,
            range,
            spatial: None,
            label_reads: AtomicUsize::new(0),
            eval_reads: AtomicUsize::new(0),
        })
    }

    /// Declares the samples as `rows × cols` images.
    pub fn with_spatial(mut self, rows: usize, cols: usize) -> Result<Self> {
        if rows * cols != self.dim() {
            return Err(Error::shape("dataset", format!("{rows}x{cols} does not match dimension {}", self.dim())));
        }
        self.spatial = Some((rows, cols));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.samples.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.samples.shape()[1]
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn range(&self) -> DataRange {
        self.range
    }

    pub fn spatial(&self) -> Option<(usize, usize)> {
        self.spatial
    }

    pub fn samples(&self) -> &Tensor {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        self.samples.row(i)
    }

    /// Gathers the given sample indices into a `[m, n]` batch.
    pub fn gather(&self, indices: &[usize]) -> Tensor {
        let n = self.dim();
        let mut values = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            values.extend_from_slice(self.sample(i));
        }
        Tensor::from_parts(vec![indices.len(), n], values)
    }

    /// Ground-truth labels. Every call is counted; see [`Dataset::label_reads`].
    pub fn labels(&self) -> &[usize] {
        self.label_reads.fetch_add(1, Ordering::Relaxed);
        &self.labels
    }

    pub(crate) fn eval_labels(&self) -> &[usize] {
        self.eval_reads.fetch_add(1, Ordering::Relaxed);
        &self.labels
    }

    /// Reads of [`Dataset::labels`] outside evaluation.
    pub fn label_reads(&self) -> usize {
        self.label_reads.load(Ordering::Relaxed)
    }

    /// Label reads performed by evaluation code.
    pub fn eval_label_reads(&self) -> usize {
        self.eval_reads.load(Ordering::Relaxed)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::shape("subset", format!("index {bad} out of range")));
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let mut out = Self::new(self.gather(indices), labels, self.classes, self.range)?;
        out.spatial = self.spatial;
        Ok(out)
    }

    /// First `count` samples.
    pub fn take(&self, count: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..count.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Seeded shuffle split into `(train, test)` with `test_fraction` held out.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::Config(format!("test fraction {test_fraction} outside [0,1)")));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut rng::rng(seed, &[stream::SPLIT]));
        let n_test = ((self.len() as f64) * test_fraction).round() as usize;
        let (test, train) = idx.split_at(n_test);
        let mut train = train.to_vec();
        let mut test = test.to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train)?, self.subset(&test)?))
    }

    /// Maps values into another range (`[0,1] ↔ [-1,1]`).
    pub fn rescaled(&self, range: DataRange) -> Result<Self> {
        let map: fn(f64) -> f64 = match (self.range, range) {
            (a, b) if a == b => |v| v,
            (DataRange::ZeroOne, DataRange::SymmetricOne) => |v| (2.0 * v - 1.0).clamp(-1.0, 1.0),
            (DataRange::SymmetricOne, DataRange::ZeroOne) => |v| ((v + 1.0) / 2.0).clamp(0.0, 1.0),
            _ => unreachable!(),
        };
        let values = self.samples.values().iter().map(|&v| map(v)).collect();
        let samples = Tensor::from_parts(self.samples.shape().to_vec(), values);
        let mut out = Self::new(samples, self.labels.clone(), self.classes, range)?;
        out.spatial = self.spatial;
        Ok(out)
    }

    /// CSV export with header `index,label,v0..v{n-1}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = ["index".to_string(), "label".to_string()]
            .into_iter()
            .chain((0..self.dim()).map(|i| format!("v{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (i, (row, label)) in self.samples.rows().zip(self.labels()).enumerate() {
            let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{i},{label},{}", vals.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let samples = Tensor::matrix(4, 2, vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]).unwrap();
        Dataset::new(samples, vec![0, 1, 0, 1], 2, DataRange::ZeroOne).unwrap()
    }

    #[test]
    fn rejects_out_of_range_values() {
        let samples = Tensor::matrix(1, 2, vec![0.5, 1.5]).unwrap();
        assert!(Dataset::new(samples, vec![0], 2, DataRange::ZeroOne).is_err());
    }

    #[test]
    fn label_reads_are_counted() {
        let ds = tiny();
        assert_eq!(ds.label_reads(), 0);
        let _ = ds.samples();
        let _ = ds.gather(&[0, 2]);
        assert_eq!(ds.label_reads(), 0);
        let _ = ds.labels();
        assert_eq!(ds.label_reads(), 1);
    }

    #[test]
    fn csv_header_and_rows() {
        let ds = tiny();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("index,label,v0,v1"));
        assert_eq!(lines.next(), Some("0,0,0,0.1"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn split_partitions() {
        let ds = tiny();
        let (train, test) = ds.split(0.25, 3).unwrap();
        assert_eq!(train.len(), 3);
        assert_eq!(test.len(), 1);
    }

    #[test]
    fn rescale_roundtrip() {
        let ds = tiny();
        let sym = ds.rescaled(DataRange::SymmetricOne).unwrap();
        assert_eq!(sym.sample(0), &[-1.0, -0.8]);
        let back = sym.rescaled(DataRange::ZeroOne).unwrap();
        for (a, b) in back.samples().values().iter().zip(ds.samples().values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
