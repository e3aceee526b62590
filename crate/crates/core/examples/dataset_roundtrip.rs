//! Writes a synthesized dataset to disk, reads it back, and splits it into
//! stratified train/test index sets.

use std::path::Path;

use modrec::data::{read_dataset, split, SplitSpec};
use modrec::synth::{generate_dataset, DatasetSpec, Scheme};

pub struct RoundTrip {
    pub bytes: u64,
    pub identical: bool,
    pub train: usize,
    pub test: usize,
}

pub fn run_example(dir: &Path, per_stratum: usize) -> RoundTrip {
    let spec = DatasetSpec::new(&[Scheme::Bpsk, Scheme::Qam16, Scheme::Fm], vec![-10, 0, 10], per_stratum, 42);
    let path = dir.join("example.iqds");
    let header = generate_dataset(&spec, &path, 1).unwrap();
    let bytes = std::fs::metadata(&path).unwrap().len();
    println!("wrote {} frames of {} samples ({bytes} bytes)", header.total_frames, header.frame_length);

    let loaded = read_dataset(&path).unwrap();
    let regenerated = modrec::synth::generate_frames(&spec, 1).unwrap();
    let identical = loaded.header == header
        && loaded.frames.len() == regenerated.len()
        && loaded.frames.iter().zip(&regenerated).all(|(a, b)| {
            a.class_index == b.class_index
                && a.snr_db == b.snr_db
                && a.i.iter().chain(&a.q).map(|v| v.to_bits()).eq(b.i.iter().chain(&b.q).map(|v| v.to_bits()))
        });
    println!("read back bit-identical: {identical}");
    for c in &loaded.header.counts {
        println!("  {:>6} @ {:>3} dB: {}", loaded.header.classes[c.class_index], c.snr_db, c.count);
    }

    let parts = split(&loaded.frames, &SplitSpec::default()).unwrap();
    println!("split: {} train / {} test", parts.train.len(), parts.test.len());
    RoundTrip {
        bytes,
        identical,
        train: parts.train.len(),
        test: parts.test.len(),
    }
}

fn main() {
    let dir = std::env::temp_dir().join("modrec-dataset-example");
    std::fs::create_dir_all(&dir).unwrap();
    run_example(&dir, 25);
}
