use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{SnrConfusion, TrainError, TrainHistory};

fn csv_err(e: csv::Error) -> TrainError {
    TrainError::Report(e.to_string())
}

pub fn confusion_file_name(snr_db: i32) -> String {
    format!("confusion_{snr_db}.csv")
}

/// Writes one confusion CSV per SNR, the accuracy curve as CSV and as an SVG
/// line chart. Returns the written paths.
pub fn emit_report(
    confusion: &SnrConfusion,
    accuracy_by_snr: &BTreeMap<i32, f64>,
    class_names: &[String],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, TrainError> {
    if confusion.matrices.is_empty() || accuracy_by_snr.is_empty() {
        return Err(TrainError::Report("nothing to report".into()));
    }
    if class_names.len() != confusion.num_classes {
        return Err(TrainError::Report(format!(
            "{} class names for {} classes",
            class_names.len(),
            confusion.num_classes
        )));
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for (&snr, matrix) in &confusion.matrices {
        let path = out_dir.join(confusion_file_name(snr));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(class_names.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (name, row) in class_names.iter().zip(matrix) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        written.push(path);
    }

    let curve = out_dir.join("accuracy_vs_snr.csv");
    let mut w = csv::Writer::from_path(&curve).map_err(csv_err)?;
    w.write_record(["snr_db", "accuracy"]).map_err(csv_err)?;
    for (snr, acc) in accuracy_by_snr {
        w.write_record([snr.to_string(), acc.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    written.push(curve);

    let svg = out_dir.join("accuracy_vs_snr.svg");
    fs::write(&svg, accuracy_svg(accuracy_by_snr))?;
    written.push(svg);
    Ok(written)
}

/// Reads a confusion CSV back into class names and counts.
pub fn read_confusion_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<u64>>), TrainError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let classes: Vec<String> = r.headers().map_err(csv_err)?.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<u64>().map_err(|e| TrainError::Report(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((classes, rows))
}

/// Line chart of accuracy against SNR.
pub fn accuracy_svg(accuracy_by_snr: &BTreeMap<i32, f64>) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let (lo, hi) = match (accuracy_by_snr.keys().next(), accuracy_by_snr.keys().last()) {
        (Some(&lo), Some(&hi)) => (lo as f64, hi as f64),
        _ => (0.0, 1.0),
    };
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x = |snr: f64| M + (snr - lo) / span * (W - 2.0 * M);
    let y = |acc: f64| H - M - acc.clamp(0.0, 1.0) * (H - 2.0 * M);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"  <rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"  <line x1="{M}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - M,
        W - M,
        H - M
    );
    let _ = writeln!(s, r#"  <line x1="{M}" y1="{M}" x2="{M}" y2="{}" stroke="black"/>"#, H - M);
    for tick in 0..=4 {
        let acc = tick as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"  <text x="{}" y="{:.1}" font-size="11" text-anchor="end">{acc:.2}</text>"#,
            M - 6.0,
            y(acc) + 4.0
        );
    }
    for &snr in accuracy_by_snr.keys() {
        let _ = writeln!(
            s,
            r#"  <text x="{:.1}" y="{}" font-size="11" text-anchor="middle">{snr}</text>"#,
            x(snr as f64),
            H - M + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"  <text x="{}" y="{}" font-size="13" text-anchor="middle">SNR (dB)</text>"#,
        W / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        s,
        r#"  <text x="14" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {})">accuracy</text>"#,
        H / 2.0,
        H / 2.0
    );
    let points: Vec<String> = accuracy_by_snr
        .iter()
        .map(|(&snr, &acc)| format!("{:.2},{:.2}", x(snr as f64), y(acc)))
        .collect();
    let _ = writeln!(
        s,
        r#"  <polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
        points.join(" ")
    );
    for (&snr, &acc) in accuracy_by_snr {
        let _ = writeln!(
            s,
            r#"  <circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#,
            x(snr as f64),
            y(acc)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// `epoch,train_loss,train_acc,val_acc`, one row per epoch starting at 1.
pub fn write_history(history: &TrainHistory, path: &Path) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["epoch", "train_loss", "train_acc", "val_acc"]).map_err(csv_err)?;
    for (n, ((loss, train), val)) in history
        .train_loss
        .iter()
        .zip(&history.train_accuracy)
        .zip(&history.val_accuracy)
        .enumerate()
    {
        w.write_record([(n + 1).to_string(), loss.to_string(), train.to_string(), val.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
