//! IDX (MNIST) files: big-endian magic `0x00000803` for `[N, rows, cols]`
//! unsigned-byte images and `0x00000801` for `[N]` labels.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::nets::DataRange;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Format(format!("{what}: truncated header")))
}

fn check_magic(bytes: &[u8], expected: u32, what: &str) -> Result<()> {
    let magic = read_u32(bytes, 0, what)?;
    if magic != expected {
        return Err(Error::Format(format!("{what}: unsupported magic 0x{magic:08x}")));
    }
    Ok(())
}

/// Parses an image/label IDX pair into a `[0,1]` dataset with `n = rows·cols`
/// and `C = max label + 1`.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    check_magic(images, IMAGES_MAGIC, "images")?;
    check_magic(labels, LABELS_MAGIC, "labels")?;
    let n = read_u32(images, 4, "images")? as usize;
    let rows = read_u32(images, 8, "images")? as usize;
    let cols = read_u32(images, 12, "images")? as usize;
    let n_labels = read_u32(labels, 4, "labels")? as usize;
    if n != n_labels {
        return Err(Error::Format(format!("{n} images but {n_labels} labels")));
    }
    if n == 0 || rows == 0 || cols == 0 {
        return Err(Error::Format("empty IDX payload".into()));
    }
    let dim = rows * cols;
    let pixels = &images[16..];
    if pixels.len() != n * dim {
        return Err(Error::Format(format!(
            "images: expected {} payload bytes, found {}",
            n * dim,
            pixels.len()
        )));
    }
    let label_bytes = &labels[8..];
    if label_bytes.len() != n {
        return Err(Error::Format(format!("labels: expected {n} payload bytes, found {}", label_bytes.len())));
    }
    let values = pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
    let labels: Vec<usize> = label_bytes.iter().map(|&b| b as usize).collect();
    let classes = labels.iter().max().map_or(1, |m| m + 1);
    Dataset::new(Tensor::from_parts(vec![n, dim], values), labels, classes, DataRange::ZeroOne)?
        .with_spatial(rows, cols)
}

/// Inverse of [`parse_idx`]; values are quantized to the nearest byte.
pub fn serialize_idx(ds: &Dataset) -> Result<(Vec<u8>, Vec<u8>)> {
    let (rows, cols) = ds.spatial().unwrap_or((1, ds.dim()));
    let ds01 = ds.rescaled(DataRange::ZeroOne)?;
    let n = u32::try_from(ds.len()).map_err(|_| Error::Format("too many samples".into()))?;
    let mut images = Vec::with_capacity(16 + ds.len() * ds.dim());
    images.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&n.to_be_bytes());
    images.extend_from_slice(&(rows as u32).to_be_bytes());
    images.extend_from_slice(&(cols as u32).to_be_bytes());
    images.extend(ds01.samples().values().iter().map(|v| (v * 255.0).round() as u8));
    let mut labels = Vec::with_capacity(8 + ds.len());
    labels.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&n.to_be_bytes());
    for &l in ds.labels() {
        labels.push(u8::try_from(l).map_err(|_| Error::Format(format!("label {l} exceeds a byte")))?);
    }
    Ok((images, labels))
}

pub fn read_idx_files(images: &Path, labels: &Path) -> Result<Dataset> {
    parse_idx(&fs::read(images)?, &fs::read(labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn image_header(n: u32, rows: u32, cols: u32) -> Vec<u8> {
        let mut v = vec![0, 0, 8, 3];
        v.extend_from_slice(&n.to_be_bytes());
        v.extend_from_slice(&rows.to_be_bytes());
        v.extend_from_slice(&cols.to_be_bytes());
        v
    }

    fn label_header(n: u32) -> Vec<u8> {
        let mut v = vec![0, 0, 8, 1];
        v.extend_from_slice(&n.to_be_bytes());
        v
    }

    #[test]
    fn parses_single_2x2() {
        let mut images = image_header(1, 2, 2);
        images.extend_from_slice(&[0, 255, 0, 255]);
        let mut labels = label_header(1);
        labels.push(0);
        let ds = parse_idx(&images, &labels).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.dim(), 4);
        assert_eq!(ds.sample(0), &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(ds.spatial(), Some((2, 2)));
    }

    #[test]
    fn rejects_unsupported_magic() {
        let mut images = vec![0, 0, 8, 2];
        images.extend_from_slice(&[0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 7]);
        let mut labels = label_header(1);
        labels.push(0);
        let err = parse_idx(&images, &labels).unwrap_err();
        assert!(err.to_string().contains("unsupported magic"));
    }

    #[test]
    fn rejects_truncated_and_mismatched() {
        let mut images = image_header(2, 2, 2);
        images.extend_from_slice(&[0; 7]);
        let mut labels = label_header(2);
        labels.extend_from_slice(&[0, 1]);
        assert!(parse_idx(&images, &labels).is_err());
        images.push(0);
        assert!(parse_idx(&images, &labels).is_ok());
        let mut short_labels = label_header(3);
        short_labels.extend_from_slice(&[0, 1, 1]);
        assert!(parse_idx(&images, &short_labels).is_err());
        assert!(parse_idx(&images[..10], &labels).is_err());
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_identity(
            n in 1usize..6, rows in 1usize..5, cols in 1usize..5,
            seed in any::<u64>(),
        ) {
            let mut x = seed | 1;
            let mut next = || { x ^= x << 13; x ^= x >> 7; x ^= x << 17; x };
            let pixels: Vec<u8> = (0..n * rows * cols).map(|_| next() as u8).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| (next() % 10) as u8).collect();
            labels[0] = 9;
            let mut img = image_header(n as u32, rows as u32, cols as u32);
            img.extend_from_slice(&pixels);
            let mut lab = label_header(n as u32);
            lab.extend_from_slice(&labels);
            let ds = parse_idx(&img, &lab).unwrap();
            let (img2, lab2) = serialize_idx(&ds).unwrap();
            prop_assert_eq!(&img2, &img);
            prop_assert_eq!(&lab2, &lab);
            prop_assert_eq!(parse_idx(&img2, &lab2).unwrap(), ds);
        }
    }
}
