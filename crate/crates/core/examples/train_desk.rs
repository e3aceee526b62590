//! Desk-scale run: four digital schemes at +10 dB, default model and
//! training settings, stopping as soon as the held-out accuracy reaches 90%.
//!
//! ```text
//! cargo run --release --example train_desk -- [frames_per_class] [max_epochs]
//! ```

use std::ops::ControlFlow;
use std::time::Instant;

use modrec::data::{split, SplitSpec};
use modrec::synth::{generate_frames, DatasetSpec, Scheme};
use modrec::train::{train_with, TrainConfig};
use modrec::ModelConfig;

pub struct DeskRun {
    pub epochs: usize,
    pub test_accuracy: f64,
    pub seconds: f64,
}

pub fn run_example(frames_per_class: usize, max_epochs: usize, target: f64) -> DeskRun {
    let schemes = [Scheme::Bpsk, Scheme::Qpsk, Scheme::Qam16, Scheme::Cpfsk];
    let spec = DatasetSpec::new(&schemes, vec![10], frames_per_class, 7);
    let frames = generate_frames(&spec, 1).expect("generate");
    let parts = split(&frames, &SplitSpec::default()).expect("split");
    let pick = |idx: &[usize]| idx.iter().map(|&i| frames[i].clone()).collect::<Vec<_>>();
    let (train_set, test_set) = (pick(&parts.train), pick(&parts.test));

    let model_cfg = ModelConfig::with_classes(schemes.len());
    let train_cfg = TrainConfig {
        epochs: max_epochs,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let mut last = (0, 0.0);
    train_with(&model_cfg, &train_cfg, &train_set, &test_set, |rec, _| {
        println!(
            "epoch {:>2}  loss {:.4}  train {:.3}  test {:.3}  ({:.0} s)",
            rec.epoch,
            rec.train_loss,
            rec.train_accuracy,
            rec.val_accuracy,
            start.elapsed().as_secs_f64()
        );
        last = (rec.epoch, rec.val_accuracy);
        if rec.val_accuracy >= target {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })
    .expect("training");
    DeskRun {
        epochs: last.0,
        test_accuracy: last.1,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let frames = args.next().unwrap_or(1000);
    let epochs = args.next().unwrap_or(30);
    let run = run_example(frames, epochs, 0.90);
    println!(
        "test accuracy {:.3} after {} epochs in {:.0} s",
        run.test_accuracy, run.epochs, run.seconds
    );
}
