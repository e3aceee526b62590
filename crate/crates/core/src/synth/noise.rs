use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SynthError;

/// Standard normal samples by the Box–Muller transform over a ChaCha8
/// stream, so a seed fixes the sequence regardless of who else draws
/// random numbers.
pub struct GaussianSource {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianSource {
    pub fn new(seed: u64) -> Self {
        GaussianSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Two independent standard normals.
    pub fn next_pair(&mut self) -> (f64, f64) {
        // u1 in (0, 1] keeps the logarithm finite
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        (r * theta.cos(), r * theta.sin())
    }

    pub fn next_std(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (a, b) = self.next_pair();
        self.spare = Some(b);
        a
    }
}

pub fn mean_power(signal: &[Complex64]) -> f64 {
    signal.iter().map(|s| s.norm_sqr()).sum::<f64>() / signal.len().max(1) as f64
}

/// Adds circular complex white Gaussian noise at `snr_db` relative to the
/// measured signal power: per-sample noise variance `P / 10^(snr/10)`, half
/// in I and half in Q. `f64::INFINITY` returns the signal unchanged.
pub fn awgn(signal: &[Complex64], snr_db: f64, seed: u64) -> Result<Vec<Complex64>, SynthError> {
    if signal.is_empty() {
        return Err(SynthError::ZeroPower);
    }
    if snr_db == f64::INFINITY {
        return Ok(signal.to_vec());
    }
    if snr_db.is_nan() {
        return Err(SynthError::Parameter("snr is NaN".into()));
    }
    let power = mean_power(signal);
    if power <= 0.0 || !power.is_finite() {
        return Err(SynthError::ZeroPower);
    }
    let noise_power = power / 10f64.powf(snr_db / 10.0);
    let sigma = (noise_power / 2.0).sqrt();
    let mut gauss = GaussianSource::new(seed);
    Ok(signal
        .iter()
        .map(|&s| {
            let (a, b) = gauss.next_pair();
            s + Complex64::new(sigma * a, sigma * b)
        })
        .collect())
}
