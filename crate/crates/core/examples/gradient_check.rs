//! Checks reverse-mode gradients against central finite differences, first
//! for a single op, then for every parameter of a small classifier.

use modrec::tensor::grad_check;
use modrec::{IqFrame, Model, ModelConfig, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_example(seeds: u64) -> Vec<f64> {
    let x = Tensor::new(&[2, 3], vec![0.3, -1.2, 0.8, 2.0, -0.4, 0.1]).unwrap();
    let softmax_err = grad_check(
        |t, v| {
            let s = t.softmax(t.tanh(v));
            let w = t.constant(Tensor::new(&[2, 3], vec![1.0, -2.0, 0.5, 0.7, 0.0, 3.0])?);
            Ok(t.sum(t.mul(s, w)?))
        },
        &x,
        1e-5,
    )
    .unwrap();
    println!("softmax(tanh(x)): max relative error {softmax_err:.2e}");

    let mut errors = vec![softmax_err];
    for seed in 0..seeds {
        let cfg = ModelConfig {
            frame_length: 16,
            residual_channels: 4,
            lstm_hidden: 8,
            dense_sizes: vec![8, 8],
            num_classes: 3,
            seed,
            ..ModelConfig::default()
        };
        let model = Model::new(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let frames: Vec<IqFrame> = (0..2)
            .map(|n| IqFrame {
                i: (0..16).map(|_| rng.random_range(-1.0..1.0)).collect(),
                q: (0..16).map(|_| rng.random_range(-1.0..1.0)).collect(),
                class_index: n % 3,
                snr_db: 0,
            })
            .collect();
        let err = model.gradient_check(&frames, 1e-5).unwrap();
        println!("model seed {seed}: {} parameters, max relative error {err:.2e}", model.param_count());
        errors.push(err);
    }
    errors
}

fn main() {
    let worst = run_example(3).into_iter().fold(0.0, f64::max);
    println!("worst {worst:.2e}");
}
