//! Labeled IQ frames, the portable dataset file, and train/test handling.

mod batch;
mod format;
mod split;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use batch::batches;
pub use format::{read_dataset, write_dataset, FORMAT_VERSION, MAGIC};
pub use split::{split, Split, SplitSpec};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes {0:?}, not a dataset file")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("file truncated: {0}")]
    Truncated(String),
    #[error("record count mismatch: header declares {declared}, found {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("invalid frame: {0}")]
    Frame(String),
    #[error("invalid split: {0}")]
    Split(String),
}

/// One labeled `2×N` window of complex baseband samples.
#[derive(Debug, Clone, PartialEq)]
pub struct IqFrame {
    pub i: Vec<f32>,
    pub q: Vec<f32>,
    pub class_index: usize,
    pub snr_db: i32,
}

impl IqFrame {
    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    /// Mean of `i² + q²` over the frame.
    pub fn mean_power(&self) -> f64 {
        let total: f64 = self
            .i
            .iter()
            .zip(&self.q)
            .map(|(&a, &b)| (a as f64).powi(2) + (b as f64).powi(2))
            .sum();
        total / self.len().max(1) as f64
    }
}

/// Number of frames for one (class, SNR) stratum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumCount {
    pub class_index: usize,
    pub snr_db: i32,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub frame_length: usize,
    pub classes: Vec<String>,
    pub snr_grid_db: Vec<i32>,
    pub total_frames: usize,
    pub counts: Vec<StratumCount>,
}

impl DatasetHeader {
    /// Tallies `frames` into a header. Every frame must use a listed class and
    /// an SNR from the grid; strata are listed class-major in grid order.
    pub fn from_frames(
        classes: Vec<String>,
        snr_grid_db: Vec<i32>,
        frame_length: usize,
        frames: &[IqFrame],
    ) -> Result<Self, DataError> {
        let mut tally: BTreeMap<(usize, i32), usize> = BTreeMap::new();
        for f in frames {
            if f.class_index >= classes.len() {
                return Err(DataError::Frame(format!(
                    "class index {} with {} classes",
                    f.class_index,
                    classes.len()
                )));
            }
            if !snr_grid_db.contains(&f.snr_db) {
                return Err(DataError::Frame(format!("snr {} dB not in grid", f.snr_db)));
            }
            *tally.entry((f.class_index, f.snr_db)).or_default() += 1;
        }
        let counts = (0..classes.len())
            .flat_map(|c| snr_grid_db.iter().map(move |&s| (c, s)))
            .map(|(class_index, snr_db)| StratumCount {
                class_index,
                snr_db,
                count: tally.get(&(class_index, snr_db)).copied().unwrap_or(0),
            })
            .collect();
        let header = DatasetHeader {
            frame_length,
            classes,
            snr_grid_db,
            total_frames: frames.len(),
            counts,
        };
        header.validate()?;
        Ok(header)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.frame_length == 0 {
            return Err(DataError::Header("frame_length must be positive".into()));
        }
        let mut names: Vec<&String> = self.classes.iter().collect();
        names.sort();
        names.dedup();
        if names.len() != self.classes.len() {
            return Err(DataError::Header("class names must be unique".into()));
        }
        let sum: usize = self.counts.iter().map(|c| c.count).sum();
        if sum != self.total_frames {
            return Err(DataError::Header(format!(
                "stratum counts sum to {sum}, total_frames is {}",
                self.total_frames
            )));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn count(&self, class_index: usize, snr_db: i32) -> usize {
        self.counts
            .iter()
            .filter(|c| c.class_index == class_index && c.snr_db == snr_db)
            .map(|c| c.count)
            .sum()
    }
}

/// A header together with its frames, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub frames: Vec<IqFrame>,
}

impl Dataset {
    pub fn subset(&self, indices: &[usize]) -> Vec<IqFrame> {
        indices.iter().map(|&i| self.frames[i].clone()).collect()
    }
}
