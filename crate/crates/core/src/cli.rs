//! `modrec` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or file
//! format error, 3 numeric failure during training.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{read_dataset, split, DataError, Dataset, IqFrame, SplitSpec};
use crate::model::{load_model, save_params, ModelConfig, ModelError};
use crate::synth::{generate_dataset, DatasetSpec, SynthError};
use crate::train::{emit_report, evaluate, train, write_history, TrainConfig, TrainError};

#[derive(Debug, Parser)]
#[command(name = "modrec", version, about = "Synthesize IQ datasets, train and evaluate the modulation classifier")]
pub struct Cli {
    /// Worker threads for frame generation and evaluation (1 = bit-reproducible).
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Increase log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset from a JSON dataset spec.
    Generate(GenerateArgs),
    /// Train a model on the training split of a dataset.
    Train(TrainArgs),
    /// Evaluate a model and write confusion matrices and the accuracy curve.
    Eval(EvalArgs),
    /// Classify a single frame given as JSON `{"i": [...], "q": [...]}`.
    Infer(InferArgs),
    /// Print a dataset header.
    Info(InfoArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Dataset spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Output dataset file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset file.
    #[arg(long)]
    pub data: PathBuf,
    /// Where to write the trained parameters.
    #[arg(long)]
    pub model_out: PathBuf,
    /// Run config (JSON with optional `model`, `train`, `split` sections).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override `train.epochs`.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Override `train.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override `model.seed`.
    #[arg(long)]
    pub model_seed: Option<u64>,
    /// Directory for history.csv and the effective config.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset file.
    #[arg(long)]
    pub data: PathBuf,
    /// Parameter file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory for the report.
    #[arg(long)]
    pub report: PathBuf,
    /// Run config; its `split` section selects the held-out frames.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Evaluate every frame of the file instead of the held-out split.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Parameter file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Frame file (JSON).
    #[arg(long)]
    pub frame: PathBuf,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    /// Dataset file.
    #[arg(long)]
    pub data: PathBuf,
}

/// Run configuration file. `model.num_classes` and `model.frame_length` are
/// taken from the dataset header.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameFile {
    i: Vec<f32>,
    q: Vec<f32>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Split(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Data(d) => d.into(),
            SynthError::UnknownScheme(_) | SynthError::Parameter(_) | SynthError::BitCount { .. } => {
                CliError::Usage(e.to_string())
            }
            SynthError::ZeroPower => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Model(m) => m.into(),
            TrainError::NonFinite(_) => CliError::Numeric(e.to_string()),
            TrainError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn load_run_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    path.map_or_else(|| Ok(RunConfig::default()), read_json)
}

fn held_out(data: &Dataset, spec: &SplitSpec) -> Result<(Vec<IqFrame>, Vec<IqFrame>), CliError> {
    let parts = split(&data.frames, spec)?;
    Ok((data.subset(&parts.train), data.subset(&parts.test)))
}

/// Parses `argv` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "modrec: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let threads = cli.threads.max(1);
    let emit = |out: &mut dyn Write, text: String| -> Result<(), CliError> {
        out.write_all(text.as_bytes()).map_err(|e| CliError::Data(e.to_string()))
    };
    match &cli.command {
        Command::Generate(a) => {
            let spec: DatasetSpec = read_json(&a.spec)?;
            let header = generate_dataset(&spec, &a.out, threads)?;
            emit(out, format!("wrote {} frames to {}\n", header.total_frames, a.out.display()))
        }
        Command::Info(a) => {
            let data = read_dataset(&a.data)?;
            emit(out, describe(&data))
        }
        Command::Train(a) => {
            let data = read_dataset(&a.data)?;
            let mut cfg = load_run_config(a.config.as_deref())?;
            if let Some(e) = a.epochs {
                cfg.train.epochs = e;
            }
            if let Some(s) = a.seed {
                cfg.train.seed = s;
            }
            if let Some(s) = a.model_seed {
                cfg.model.seed = s;
            }
            cfg.model.num_classes = data.header.num_classes();
            cfg.model.frame_length = data.header.frame_length;
            let (train_set, test_set) = held_out(&data, &cfg.split)?;
            let (model, history) = train(&cfg.model, &cfg.train, &train_set, &test_set)?;
            save_params(&model, &data.header.classes, &a.model_out)?;
            if let Some(dir) = &a.report {
                fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
                write_json(&cfg, &dir.join("effective_config.json"))?;
                write_history(&history, &dir.join("history.csv"))?;
            }
            let last = history.val_accuracy.last().copied();
            emit(
                out,
                format!(
                    "trained {} epochs on {} frames; held-out accuracy {}\n",
                    history.epochs(),
                    train_set.len(),
                    last.map_or("n/a".to_string(), |a| format!("{a:.4}"))
                ),
            )
        }
        Command::Eval(a) => {
            let data = read_dataset(&a.data)?;
            let (model, classes) = load_model(&a.model)?;
            let cfg = load_run_config(a.config.as_deref())?;
            if model.config.num_classes != data.header.num_classes() {
                return Err(CliError::Data(format!(
                    "model has {} classes, dataset has {}",
                    model.config.num_classes,
                    data.header.num_classes()
                )));
            }
            let classes = if classes.is_empty() { data.header.classes.clone() } else { classes };
            let test_set = if a.all { data.frames.clone() } else { held_out(&data, &cfg.split)?.1 };
            let result = evaluate(&model, &test_set, threads)?;
            emit_report(&result.confusion, &result.accuracy_by_snr, &classes, &a.report)?;
            let effective = RunConfig {
                model: model.config.clone(),
                ..cfg
            };
            write_json(&effective, &a.report.join("effective_config.json"))?;
            let mut text = format!("overall accuracy {:.4} on {} frames\n", result.overall_accuracy, test_set.len());
            for (snr, acc) in &result.accuracy_by_snr {
                text.push_str(&format!("  {snr:>4} dB  {acc:.4}\n"));
            }
            emit(out, text)
        }
        Command::Infer(a) => {
            let (model, classes) = load_model(&a.model)?;
            let frame: FrameFile = read_json(&a.frame)?;
            let frame = IqFrame {
                i: frame.i,
                q: frame.q,
                class_index: 0,
                snr_db: 0,
            };
            let probs = model.forward(&frame)?;
            let best = crate::model::argmax(&probs);
            let name = |k: usize| classes.get(k).cloned().unwrap_or_else(|| format!("class{k}"));
            let mut text = format!("{} {:.6}\n", name(best), probs[best]);
            let listing: Vec<String> = probs.iter().enumerate().map(|(k, p)| format!("{}={p:.6}", name(k))).collect();
            text.push_str(&listing.join(" "));
            text.push('\n');
            emit(out, text)
        }
    }
}

fn describe(data: &Dataset) -> String {
    let h = &data.header;
    let mut s = format!(
        "frame_length: {}\nclasses: {}\nsnr_grid_db: {}\ntotal_frames: {}\ncounts:\n",
        h.frame_length,
        h.classes.join(", "),
        h.snr_grid_db.iter().map(i32::to_string).collect::<Vec<_>>().join(", "),
        h.total_frames
    );
    for (k, name) in h.classes.iter().enumerate() {
        let per: Vec<String> = h
            .counts
            .iter()
            .filter(|c| c.class_index == k)
            .map(|c| format!("{}dB:{}", c.snr_db, c.count))
            .collect();
        let total: usize = h.counts.iter().filter(|c| c.class_index == k).map(|c| c.count).sum();
        s.push_str(&format!("  {name}: {total} ({})\n", per.join(" ")));
    }
    s
}
