//! Synthetic labeled IQ frames over an SNR grid.

mod noise;
mod rrc;
mod scheme;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{write_dataset, DataError, DatasetHeader, IqFrame};
use crate::seeds::derive_seed;

pub use noise::{awgn, mean_power, GaussianSource};
pub use rrc::rrc_filter;
pub use scheme::{message, modulate, random_bits, Scheme, SchemeSpec, Shaping};

/// SNR value standing for "no noise"; it fits the dataset file's `i16` field.
pub const NOISELESS_SNR_DB: i32 = i16::MAX as i32;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("unknown modulation scheme `{0}`")]
    UnknownScheme(String),
    #[error("{bits} bits do not divide into symbols of {per_symbol} bits")]
    BitCount { bits: usize, per_symbol: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("signal has zero power, SNR is undefined")]
    ZeroPower,
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Maps an integer SNR to the value handed to [`awgn`].
pub fn snr_value(snr_db: i32) -> f64 {
    if snr_db == NOISELESS_SNR_DB {
        f64::INFINITY
    } else {
        snr_db as f64
    }
}

/// One labeled frame of `frame_length` samples.
///
/// Modulates enough random bits to cover the frame, a symbol of timing slack
/// and the shaping ramps, drops half the filter span at each end, adds noise
/// at `snr_db` relative to the remaining clean signal, and cuts a randomly
/// placed window. Everything is derived from `seed`.
pub fn generate_frame(
    spec: &SchemeSpec,
    frame_length: usize,
    snr_db: i32,
    class_index: usize,
    seed: u64,
) -> Result<IqFrame, SynthError> {
    if frame_length == 0 {
        return Err(SynthError::Parameter("frame_length must be positive".into()));
    }
    spec.validate()?;
    let sps = spec.samples_per_symbol;
    let trim = spec.transient();
    let needed = frame_length + sps + 2 * trim;
    let symbols = needed.div_ceil(sps);
    let bits = random_bits(symbols * spec.name.bits_per_symbol(), derive_seed(&[seed, 1]));
    let burst = modulate(spec, &bits, derive_seed(&[seed, 2]))?;
    let clean = &burst[trim..burst.len() - trim];
    let noisy = awgn(clean, snr_value(snr_db), derive_seed(&[seed, 3]))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 4]));
    let start = rng.random_range(0..=noisy.len() - frame_length);
    let window = &noisy[start..start + frame_length];
    Ok(IqFrame {
        i: window.iter().map(|s| s.re as f32).collect(),
        q: window.iter().map(|s| s.im as f32).collect(),
        class_index,
        snr_db,
    })
}

fn default_snr_grid() -> Vec<i32> {
    (-20..=18).step_by(2).collect()
}

fn default_frame_length() -> usize {
    128
}

/// What to synthesize: one class per scheme, every SNR of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub schemes: Vec<SchemeSpec>,
    #[serde(default = "default_snr_grid")]
    pub snr_grid_db: Vec<i32>,
    pub frames_per_class_per_snr: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_frame_length")]
    pub frame_length: usize,
}

impl DatasetSpec {
    pub fn new(schemes: &[Scheme], snr_grid_db: Vec<i32>, frames_per_class_per_snr: usize, master_seed: u64) -> Self {
        DatasetSpec {
            schemes: schemes.iter().map(|&s| SchemeSpec::new(s)).collect(),
            snr_grid_db,
            frames_per_class_per_snr,
            master_seed,
            frame_length: default_frame_length(),
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        self.schemes.iter().map(|s| s.name.name().to_string()).collect()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.schemes.is_empty() {
            return Err(SynthError::Parameter("no schemes".into()));
        }
        let names = self.class_names();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(SynthError::Parameter(format!("scheme {n} listed twice")));
            }
        }
        if self.snr_grid_db.is_empty() {
            return Err(SynthError::Parameter("empty SNR grid".into()));
        }
        if self.snr_grid_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SynthError::Parameter("SNR grid must be strictly increasing".into()));
        }
        if self.frames_per_class_per_snr == 0 {
            return Err(SynthError::Parameter("frames_per_class_per_snr must be positive".into()));
        }
        if self.frame_length == 0 {
            return Err(SynthError::Parameter("frame_length must be positive".into()));
        }
        for s in &self.schemes {
            s.validate()?;
        }
        Ok(())
    }

    pub fn total_frames(&self) -> usize {
        self.schemes.len() * self.snr_grid_db.len() * self.frames_per_class_per_snr
    }

    /// Seed of frame `index` in stratum (`class`, `snr`).
    pub fn frame_seed(&self, class: usize, snr_db: i32, index: usize) -> u64 {
        derive_seed(&[self.master_seed, class as u64, snr_db as i64 as u64, index as u64])
    }

    /// (class, snr, index) of the `n`-th frame in file order.
    fn coordinates(&self, n: usize) -> (usize, i32, usize) {
        let per_class = self.snr_grid_db.len() * self.frames_per_class_per_snr;
        let class = n / per_class;
        let rest = n % per_class;
        let snr = self.snr_grid_db[rest / self.frames_per_class_per_snr];
        (class, snr, rest % self.frames_per_class_per_snr)
    }
}

/// Every frame of `spec`, class-major, then SNR, then index.
///
/// Frames are independent, so `threads > 1` splits the work across scoped
/// threads; the result is identical for any thread count.
pub fn generate_frames(spec: &DatasetSpec, threads: usize) -> Result<Vec<IqFrame>, SynthError> {
    spec.validate()?;
    let total = spec.total_frames();
    let make = |n: usize| {
        let (class, snr, index) = spec.coordinates(n);
        generate_frame(&spec.schemes[class], spec.frame_length, snr, class, spec.frame_seed(class, snr, index))
    };
    let threads = threads.clamp(1, total.max(1));
    if threads == 1 {
        return (0..total).map(make).collect();
    }
    let chunk = total.div_ceil(threads);
    let parts: Vec<Result<Vec<IqFrame>, SynthError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let range = (t * chunk).min(total)..((t + 1) * chunk).min(total);
                scope.spawn(move || range.map(make).collect())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("generator thread panicked")).collect()
    });
    let mut frames = Vec::with_capacity(total);
    for part in parts {
        frames.extend(part?);
    }
    Ok(frames)
}

/// Generates `spec` and writes it to `out_path` in the dataset format.
pub fn generate_dataset(spec: &DatasetSpec, out_path: &Path, threads: usize) -> Result<DatasetHeader, SynthError> {
    let frames = generate_frames(spec, threads)?;
    let header = DatasetHeader::from_frames(spec.class_names(), spec.snr_grid_db.clone(), spec.frame_length, &frames)?;
    write_dataset(&header, &frames, out_path)?;
    Ok(header)
}
