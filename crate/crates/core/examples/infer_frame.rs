//! Saves a model, loads it back with its class names, and classifies single
//! frames.

use std::path::Path;

use modrec::model::{load_model, save_params};
use modrec::synth::{generate_frame, Scheme, SchemeSpec};
use modrec::{Model, ModelConfig};

/// Returns `(true class, predicted class, probabilities)` per scheme.
#[allow(clippy::unnecessary_cast)] // `Real` may be f32
pub fn run_example(dir: &Path) -> Vec<(String, String, Vec<f64>)> {
    let schemes = [Scheme::Bpsk, Scheme::Qam16, Scheme::Am];
    let names: Vec<String> = schemes.iter().map(|s| s.name().to_string()).collect();
    let model = Model::new(ModelConfig {
        lstm_layers: 1,
        ..ModelConfig::with_classes(schemes.len())
    })
    .unwrap();
    let path = dir.join("example.params");
    save_params(&model, &names, &path).unwrap();
    let (loaded, classes) = load_model(&path).unwrap();
    assert_eq!(loaded, model);

    let mut out = Vec::new();
    for (c, &scheme) in schemes.iter().enumerate() {
        let frame = generate_frame(&SchemeSpec::new(scheme), 128, 10, c, 99).unwrap();
        let probs: Vec<f64> = loaded.forward(&frame).unwrap().iter().map(|&p| p as f64).collect();
        let predicted = classes[loaded.predict(&frame).unwrap()].clone();
        let listing: Vec<String> = classes.iter().zip(&probs).map(|(n, p)| format!("{n}={p:.3}")).collect();
        println!("{:>6} -> {predicted:<6} [{}]", scheme.name(), listing.join(" "));
        out.push((scheme.name().to_string(), predicted, probs));
    }
    out
}

fn main() {
    run_example(&std::env::temp_dir());
}
