use std::collections::BTreeMap;

use crate::data::IqFrame;
use crate::model::Model;

use super::TrainError;

/// Per-SNR `K×K` count matrices; rows are true labels, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnrConfusion {
    pub num_classes: usize,
    pub matrices: BTreeMap<i32, Vec<Vec<u64>>>,
}

impl SnrConfusion {
    pub fn new(num_classes: usize) -> Self {
        SnrConfusion {
            num_classes,
            matrices: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, snr_db: i32, truth: usize, predicted: usize) {
        let k = self.num_classes;
        self.matrices.entry(snr_db).or_insert_with(|| vec![vec![0; k]; k])[truth][predicted] += 1;
    }

    pub fn matrix(&self, snr_db: i32) -> Option<&Vec<Vec<u64>>> {
        self.matrices.get(&snr_db)
    }

    pub fn correct(&self, snr_db: i32) -> u64 {
        self.matrices
            .get(&snr_db)
            .map_or(0, |m| (0..self.num_classes).map(|i| m[i][i]).sum())
    }

    pub fn total(&self, snr_db: i32) -> u64 {
        self.matrices.get(&snr_db).map_or(0, |m| m.iter().flatten().sum())
    }

    pub fn grand_total(&self) -> u64 {
        self.matrices.keys().map(|&s| self.total(s)).sum()
    }

    /// Trace over total at one SNR.
    pub fn accuracy(&self, snr_db: i32) -> Option<f64> {
        let total = self.total(snr_db);
        (total > 0).then(|| self.correct(snr_db) as f64 / total as f64)
    }

    pub fn accuracy_by_snr(&self) -> BTreeMap<i32, f64> {
        self.matrices
            .keys()
            .filter_map(|&s| self.accuracy(s).map(|a| (s, a)))
            .collect()
    }

    pub fn overall_accuracy(&self) -> f64 {
        let correct: u64 = self.matrices.keys().map(|&s| self.correct(s)).sum();
        correct as f64 / self.grand_total().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub confusion: SnrConfusion,
    pub accuracy_by_snr: BTreeMap<i32, f64>,
    pub overall_accuracy: f64,
}

/// Tallies predictions from any batch predictor.
pub fn evaluate_with<F>(test_set: &[IqFrame], num_classes: usize, mut predict: F) -> Result<Evaluation, TrainError>
where
    F: FnMut(&[IqFrame]) -> Result<Vec<usize>, TrainError>,
{
    if test_set.is_empty() {
        return Err(TrainError::Data("empty test set".into()));
    }
    let mut confusion = SnrConfusion::new(num_classes);
    for chunk in test_set.chunks(EVAL_BATCH) {
        let predicted = predict(chunk)?;
        if predicted.len() != chunk.len() {
            return Err(TrainError::Data(format!(
                "predictor returned {} labels for {} frames",
                predicted.len(),
                chunk.len()
            )));
        }
        for (frame, &p) in chunk.iter().zip(&predicted) {
            if frame.class_index >= num_classes || p >= num_classes {
                return Err(TrainError::Data(format!(
                    "class index {} / prediction {p} outside {num_classes} classes",
                    frame.class_index
                )));
            }
            confusion.record(frame.snr_db, frame.class_index, p);
        }
    }
    Ok(Evaluation {
        accuracy_by_snr: confusion.accuracy_by_snr(),
        overall_accuracy: confusion.overall_accuracy(),
        confusion,
    })
}

const EVAL_BATCH: usize = 128;

/// Predicts every frame of `frames`, splitting the work over `threads`
/// scoped threads. The output does not depend on the thread count.
pub fn predict_all(model: &Model, frames: &[IqFrame], threads: usize) -> Result<Vec<usize>, TrainError> {
    let threads = threads.max(1);
    if threads == 1 || frames.len() <= EVAL_BATCH {
        let mut out = Vec::with_capacity(frames.len());
        for chunk in frames.chunks(EVAL_BATCH) {
            out.extend(model.predict_batch(chunk)?);
        }
        return Ok(out);
    }
    let per = frames.len().div_ceil(threads);
    let parts: Vec<Result<Vec<usize>, TrainError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = frames
            .chunks(per)
            .map(|part| scope.spawn(move || predict_all(model, part, 1)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation thread panicked")).collect()
    });
    let mut out = Vec::with_capacity(frames.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Confusion matrices and accuracy curve of `model` on `test_set`.
pub fn evaluate(model: &Model, test_set: &[IqFrame], threads: usize) -> Result<Evaluation, TrainError> {
    let predicted = predict_all(model, test_set, threads)?;
    let mut cursor = predicted.into_iter();
    evaluate_with(test_set, model.config.num_classes, |chunk| {
        Ok(cursor.by_ref().take(chunk.len()).collect())
    })
}
