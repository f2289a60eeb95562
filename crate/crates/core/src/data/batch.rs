use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// Splits `0..n` into consecutive batches of `m` (the last may be short),
/// after a seeded shuffle when `shuffle` is set.
pub fn batches(n: usize, m: usize, seed: u64, shuffle: bool) -> Result<Vec<Vec<usize>>> {
    if m == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    if m > n {
        return Err(Error::Config(format!("batch size {m} exceeds dataset size {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    if shuffle {
        idx.shuffle(&mut rng::rng(seed, &[stream::PERMUTE]));
    }
    Ok(idx.chunks(m).map(<[usize]>::to_vec).collect())
}
