use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, IqFrame};
use crate::seeds::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Indices into the input, each list in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified split by (class, SNR).
///
/// Each stratum of `n` frames sends `round(n · train_fraction)` of them to the
/// training side, clamped so both sides get at least one frame when `n ≥ 2`.
/// Which frames go where is a seeded shuffle per stratum.
pub fn split(frames: &[IqFrame], spec: &SplitSpec) -> Result<Split, DataError> {
    if frames.is_empty() {
        return Err(DataError::Split("no frames to split".into()));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(DataError::Split(format!(
            "train_fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    let mut strata: BTreeMap<(usize, i32), Vec<usize>> = BTreeMap::new();
    for (idx, f) in frames.iter().enumerate() {
        strata.entry((f.class_index, f.snr_db)).or_default().push(idx);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for ((class, snr), mut members) in strata {
        let n = members.len();
        let mut n_train = (n as f64 * spec.train_fraction).round() as usize;
        if n >= 2 {
            n_train = n_train.clamp(1, n - 1);
        }
        let seed = derive_seed(&[spec.seed, class as u64, snr as i64 as u64]);
        members.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}
