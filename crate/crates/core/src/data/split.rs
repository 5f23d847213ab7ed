//! Seeded train/test partitioning.
//!
//! Algorithm `splitmix64-fisher-yates-v1`, fixed so partitions reproduce in
//! any language:
//!
//! 1. Seed a SplitMix64 generator with the 64-bit seed. Each draw adds
//!    `0x9E3779B97F4A7C15` to the state (wrapping) and mixes with
//!    `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`,
//!    `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`, `z ^ (z >> 31)`.
//! 2. Start from the identity permutation of `0..n` and, for `i` from `n - 1`
//!    down to `1`, swap positions `i` and `j = (draw * (i + 1)) >> 64`
//!    (128-bit product).
//! 3. The first `round(fraction * n)` positions form the training set; both
//!    sets are then sorted back into input order.

use serde::{Deserialize, Serialize};

use super::table::ObservationTable;
use crate::error::{Error, Result};

pub const SPLIT_ALGORITHM: &str = "splitmix64-fisher-yates-v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform-ish integer in `0..bound` by multiply-shift.
    pub fn below(&mut self, bound: u64) -> u64 {
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }
}

pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = SplitMix64::new(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Row indices of the training and test parts.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "train fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    if n < 5 {
        return Err(Error::Parameter(format!("need at least 5 records to split, got {n}")));
    }
    let n_train = (spec.train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Parameter(format!(
            "fraction {} leaves an empty partition of {n} records",
            spec.train_fraction
        )));
    }
    let perm = permutation(n, spec.seed);
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(table: &ObservationTable, spec: &SplitSpec) -> Result<(ObservationTable, ObservationTable)> {
    let (train, test) = split_indices(table.len(), spec)?;
    Ok((table.select_rows(&train), table.select_rows(&test)))
}
