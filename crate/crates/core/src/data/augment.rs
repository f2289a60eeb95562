use rand::Rng as _;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Spatial augmentation switches. `hflip` mirrors every row; `crop_pad > 0`
/// zero-pads by that many pixels and crops back at a random offset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AugmentFlags {
    pub hflip: bool,
    pub crop_pad: usize,
}

impl AugmentFlags {
    pub fn any(&self) -> bool {
        self.hflip || self.crop_pad > 0
    }
}

/// Augments one `rows × cols` image stored row-major in `x`.
pub fn augment(x: &[f64], spatial: Option<(usize, usize)>, flags: AugmentFlags, rng: &mut Rng) -> Result<Vec<f64>> {
    if !flags.any() {
        return Ok(x.to_vec());
    }
    let (rows, cols) = spatial
        .ok_or_else(|| Error::Contract("spatial augmentation requested on non-spatial data".into()))?;
    if rows * cols != x.len() {
        return Err(Error::shape("augment", format!("{rows}x{cols} image with {} values", x.len())));
    }
    let mut out = x.to_vec();
    if flags.hflip {
        out.chunks_mut(cols).for_each(|r| r.reverse());
    }
    if flags.crop_pad > 0 {
        let pad = flags.crop_pad as isize;
        let dy = rng.random_range(-(pad as i64)..=pad as i64) as isize;
        let dx = rng.random_range(-(pad as i64)..=pad as i64) as isize;
        let src = out.clone();
        for r in 0..rows as isize {
            for c in 0..cols as isize {
                let (sr, sc) = (r + dy, c + dx);
                let v = if sr >= 0 && sr < rows as isize && sc >= 0 && sc < cols as isize {
                    src[(sr as usize) * cols + sc as usize]
                } else {
                    0.0
                };
                out[(r as usize) * cols + c as usize] = v;
            }
        }
    }
    Ok(out)
}

/// Training-time augmenter: flips each sample with probability 1/2 and
/// applies a random crop.
#[derive(Clone, Copy, Debug)]
pub struct Augmenter {
    pub flags: AugmentFlags,
    pub spatial: Option<(usize, usize)>,
}

impl Augmenter {
    pub fn apply_batch(&self, batch: &Tensor, rng: &mut Rng) -> Result<Tensor> {
        if !self.flags.any() {
            return Ok(batch.clone());
        }
        let mut values = Vec::with_capacity(batch.len());
        for row in batch.rows() {
            let flags = AugmentFlags { hflip: self.flags.hflip && rng.random_bool(0.5), ..self.flags };
            values.extend(augment(row, self.spatial, flags, rng)?);
        }
        Ok(Tensor::from_parts(batch.shape().to_vec(), values))
    }
}
