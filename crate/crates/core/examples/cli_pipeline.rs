//! The command-line pipeline driven in-process: generate, inspect, train,
//! evaluate and classify one frame.

use std::path::Path;

use modrec::cli;

fn step(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("modrec").chain(args.iter().copied()), &mut out, &mut err);
    let text = String::from_utf8_lossy(&out).into_owned() + &String::from_utf8_lossy(&err);
    println!("$ modrec {}\n{text}", args.join(" "));
    (code, text)
}

/// Exit codes of every step, in order.
pub fn run_example(dir: &Path, epochs: usize) -> Vec<i32> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    std::fs::write(
        p("spec.json"),
        r#"{"schemes": [{"name": "BPSK"}, {"name": "QPSK"}, {"name": "PAM4"}],
           "snr_grid_db": [0, 10], "frames_per_class_per_snr": 40, "master_seed": 1, "frame_length": 64}"#,
    )
    .unwrap();
    std::fs::write(
        p("config.json"),
        r#"{"model": {"residual_channels": 8, "lstm_hidden": 8, "lstm_layers": 1, "dense_sizes": [16]},
           "train": {"batch_size": 16, "learning_rate": 0.003}}"#,
    )
    .unwrap();
    std::fs::write(
        p("frame.json"),
        serde_json::json!({
            "i": (0..64).map(|k| if (k / 8) % 2 == 0 { 1.0 } else { -1.0 }).collect::<Vec<f64>>(),
            "q": vec![0.0; 64],
        })
        .to_string(),
    )
    .unwrap();
    let epochs = epochs.to_string();
    let steps: Vec<Vec<String>> = vec![
        vec!["generate".into(), "--spec".into(), p("spec.json"), "--out".into(), p("data.iqds")],
        vec!["info".into(), "--data".into(), p("data.iqds")],
        vec![
            "train".into(), "--data".into(), p("data.iqds"), "--model-out".into(), p("model.params"),
            "--config".into(), p("config.json"), "--epochs".into(), epochs, "--report".into(), p("train"),
        ],
        vec![
            "eval".into(), "--data".into(), p("data.iqds"), "--model".into(), p("model.params"),
            "--report".into(), p("report"), "--config".into(), p("config.json"),
        ],
        vec!["infer".into(), "--model".into(), p("model.params"), "--frame".into(), p("frame.json")],
    ];
    steps
        .iter()
        .map(|s| step(&s.iter().map(String::as_str).collect::<Vec<_>>()).0)
        .collect()
}

fn main() {
    let dir = std::env::temp_dir().join("modrec-cli-example");
    std::fs::create_dir_all(&dir).unwrap();
    let codes = run_example(&dir, 3);
    println!("exit codes {codes:?}");
}
