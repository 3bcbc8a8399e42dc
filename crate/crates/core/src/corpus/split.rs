use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
}

/// Partition sizes for `n` items under `ratios`. Dev and test sizes are
/// `n·r/Σr` rounded half-up; train takes the remainder.
pub fn split_counts(n: usize, ratios: (usize, usize, usize)) -> Result<(usize, usize, usize)> {
    let total = ratios.0 + ratios.1 + ratios.2;
    if total == 0 {
        bail!(Config, "split ratios sum to zero");
    }
    let round = |r: usize| (2 * n * r + total) / (2 * total);
    let dev = round(ratios.1);
    let test = round(ratios.2);
    Ok((n - dev - test, dev, test))
}

/// Seeded random 8:1:1-style partition. Refuses fewer than 10 items.
pub fn split_dataset<T>(items: Vec<T>, ratios: (usize, usize, usize), seed: u64) -> Result<Split<T>> {
    if items.len() < 10 {
        bail!(Sizing, "need at least 10 instances to split, got {}", items.len());
    }
    let (n_train, n_dev, _) = split_counts(items.len(), ratios)?;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let mut take = |range: &[usize]| -> Vec<T> {
        range
            .iter()
            .map(|&i| slots[i].take().expect("index used once"))
            .collect()
    };
    let train = take(&order[..n_train]);
    let dev = take(&order[n_train..n_train + n_dev]);
    let test = take(&order[n_train + n_dev..]);
    Ok(Split { train, dev, test })
}
