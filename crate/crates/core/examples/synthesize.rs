//! Synthesizes labeled frames and measures their signal-to-noise ratio
//! against a noiseless copy drawn from the same seed.

use modrec::synth::{generate_frame, Scheme, SchemeSpec, NOISELESS_SNR_DB};

/// Mean measured SNR (dB) per requested SNR, averaged over `frames` frames.
pub fn run_example(scheme: Scheme, snrs: &[i32], frames: usize) -> Vec<(i32, f64)> {
    let spec = SchemeSpec::new(scheme);
    let mut out = Vec::new();
    for &snr in snrs {
        let (mut signal, mut noise) = (0.0, 0.0);
        for n in 0..frames as u64 {
            let noisy = generate_frame(&spec, 128, snr, 0, n).unwrap();
            let clean = generate_frame(&spec, 128, NOISELESS_SNR_DB, 0, n).unwrap();
            for k in 0..128 {
                let (ci, cq) = (clean.i[k] as f64, clean.q[k] as f64);
                signal += ci * ci + cq * cq;
                noise += (noisy.i[k] as f64 - ci).powi(2) + (noisy.q[k] as f64 - cq).powi(2);
            }
        }
        let measured = 10.0 * (signal / noise).log10();
        println!("{} at {snr:>3} dB: measured {measured:.2} dB", scheme.name());
        out.push((snr, measured));
    }
    out
}

fn main() {
    for scheme in [Scheme::Qpsk, Scheme::Cpfsk, Scheme::Am] {
        run_example(scheme, &[-10, 0, 10], 200);
    }
}
