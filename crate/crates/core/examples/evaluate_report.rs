//! Trains a small classifier for a few epochs, then writes per-SNR confusion
//! matrices and the accuracy-versus-SNR curve.

use std::path::{Path, PathBuf};

use modrec::data::{split, SplitSpec};
use modrec::synth::{generate_frames, DatasetSpec, Scheme};
use modrec::train::{emit_report, evaluate, train, TrainConfig};
use modrec::ModelConfig;

pub fn run_example(out_dir: &Path, per_stratum: usize, epochs: usize) -> (f64, Vec<PathBuf>) {
    let schemes = [Scheme::Bpsk, Scheme::Qpsk, Scheme::Cpfsk];
    let spec = DatasetSpec::new(&schemes, vec![-6, 4, 14], per_stratum, 5);
    let frames = generate_frames(&spec, 1).unwrap();
    let parts = split(&frames, &SplitSpec::default()).unwrap();
    let pick = |idx: &[usize]| idx.iter().map(|&i| frames[i].clone()).collect::<Vec<_>>();
    let (train_set, test_set) = (pick(&parts.train), pick(&parts.test));

    let model_cfg = ModelConfig {
        residual_channels: 8,
        lstm_hidden: 16,
        lstm_layers: 1,
        dense_sizes: vec![32],
        ..ModelConfig::with_classes(schemes.len())
    };
    let train_cfg = TrainConfig {
        epochs,
        batch_size: 32,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };
    let (model, history) = train(&model_cfg, &train_cfg, &train_set, &test_set).unwrap();
    for (n, loss) in history.train_loss.iter().enumerate() {
        println!("epoch {}: loss {loss:.4}, test acc {:.3}", n + 1, history.val_accuracy[n]);
    }

    let eval = evaluate(&model, &test_set, 1).unwrap();
    for (snr, acc) in &eval.accuracy_by_snr {
        println!("{snr:>4} dB: {acc:.3}");
    }
    let files = emit_report(&eval.confusion, &eval.accuracy_by_snr, &spec.class_names(), out_dir).unwrap();
    for f in &files {
        println!("wrote {}", f.display());
    }
    (eval.overall_accuracy, files)
}

fn main() {
    let dir = std::env::temp_dir().join("modrec-report-example");
    run_example(&dir, 60, 4);
}
