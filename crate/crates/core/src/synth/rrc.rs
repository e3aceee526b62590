use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::SynthError;

/// Root-raised-cosine taps, `span · sps + 1` long, symmetric, unit energy.
///
/// `rolloff ∈ (0, 1]`, `span ≥ 2` symbols, `sps ≥ 2` samples per symbol.
/// The removable singularities at `t = 0` and `t = ±T/(4β)` take their
/// closed-form limits.
pub fn rrc_filter(rolloff: f64, span: usize, sps: usize) -> Result<Vec<f64>, SynthError> {
    if !(rolloff > 0.0 && rolloff <= 1.0) {
        return Err(SynthError::Parameter(format!("rrc rolloff {rolloff} outside (0, 1]")));
    }
    if span < 2 {
        return Err(SynthError::Parameter(format!("rrc span {span} below 2 symbols")));
    }
    if sps < 2 {
        return Err(SynthError::Parameter(format!("rrc needs at least 2 samples per symbol, got {sps}")));
    }
    let beta = rolloff;
    let len = span * sps + 1;
    let centre = (len - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..len)
        .map(|n| {
            // time in symbol periods
            let t = (n as f64 - centre) / sps as f64;
            if t.abs() < 1e-12 {
                1.0 - beta + 4.0 * beta / PI
            } else if (1.0 - (4.0 * beta * t).powi(2)).abs() < 1e-10 {
                let a = PI / (4.0 * beta);
                beta * FRAC_1_SQRT_2 * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos())
            } else {
                let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
                let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
                num / den
            }
        })
        .collect();
    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let norm = energy.sqrt();
    taps.iter_mut().for_each(|h| *h /= norm);
    Ok(taps)
}
