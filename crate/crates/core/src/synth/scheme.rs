use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::noise::GaussianSource;
use super::rrc::rrc_filter;
use super::SynthError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "BPSK")]
    Bpsk,
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "PSK8")]
    Psk8,
    #[serde(rename = "QAM16")]
    Qam16,
    #[serde(rename = "PAM4")]
    Pam4,
    #[serde(rename = "CPFSK")]
    Cpfsk,
    #[serde(rename = "AM")]
    Am,
    #[serde(rename = "FM")]
    Fm,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::Bpsk,
        Scheme::Qpsk,
        Scheme::Psk8,
        Scheme::Qam16,
        Scheme::Pam4,
        Scheme::Cpfsk,
        Scheme::Am,
        Scheme::Fm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Bpsk => "BPSK",
            Scheme::Qpsk => "QPSK",
            Scheme::Psk8 => "PSK8",
            Scheme::Qam16 => "QAM16",
            Scheme::Pam4 => "PAM4",
            Scheme::Cpfsk => "CPFSK",
            Scheme::Am => "AM",
            Scheme::Fm => "FM",
        }
    }

    /// Bits consumed per symbol. Analog schemes take one (ignored) bit per
    /// message interval so callers size every scheme the same way.
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Scheme::Bpsk | Scheme::Cpfsk | Scheme::Am | Scheme::Fm => 1,
            Scheme::Qpsk | Scheme::Pam4 => 2,
            Scheme::Psk8 => 3,
            Scheme::Qam16 => 4,
        }
    }

    pub fn is_linear(self) -> bool {
        !matches!(self, Scheme::Cpfsk | Scheme::Am | Scheme::Fm)
    }

    /// Unit-average-power constellation indexed by the symbol's bit pattern
    /// (first bit most significant). Empty for non-linear schemes.
    pub fn constellation(self) -> Vec<Complex64> {
        let n = 1usize << self.bits_per_symbol();
        match self {
            Scheme::Bpsk => vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            Scheme::Qpsk => (0..n)
                .map(|v| {
                    let s = std::f64::consts::FRAC_1_SQRT_2;
                    Complex64::new(s * bit_sign(v >> 1), s * bit_sign(v & 1))
                })
                .collect(),
            Scheme::Psk8 => (0..n)
                .map(|v| Complex64::from_polar(1.0, 2.0 * PI * gray_decode(v) as f64 / 8.0))
                .collect(),
            Scheme::Qam16 => (0..n)
                .map(|v| Complex64::new(gray_level4(v >> 2), gray_level4(v & 3)) / 10f64.sqrt())
                .collect(),
            Scheme::Pam4 => (0..n).map(|v| Complex64::new(gray_level4(v) / 5f64.sqrt(), 0.0)).collect(),
            Scheme::Cpfsk | Scheme::Am | Scheme::Fm => Vec::new(),
        }
    }
}

fn bit_sign(bit: usize) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Position of a Gray code word in the binary-reflected sequence.
fn gray_decode(mut g: usize) -> usize {
    let mut b = 0;
    while g != 0 {
        b ^= g;
        g >>= 1;
    }
    b
}

/// Gray-coded 4-level amplitude: 00 → −3, 01 → −1, 11 → +1, 10 → +3.
fn gray_level4(bits: usize) -> f64 {
    [-3.0, -1.0, 1.0, 3.0][gray_decode(bits)]
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|sch| sch.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| SynthError::UnknownScheme(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shaping {
    Rrc,
    None,
}

/// How one class is synthesized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub name: Scheme,
    #[serde(default = "default_sps")]
    pub samples_per_symbol: usize,
    #[serde(default = "default_shaping")]
    pub shaping: Shaping,
    #[serde(default = "default_rolloff")]
    pub rrc_rolloff: f64,
    #[serde(default = "default_span")]
    pub rrc_span: usize,
    /// CPFSK/FM: peak phase step per sample is `π · modulation_index / samples_per_symbol`.
    #[serde(default = "default_index")]
    pub modulation_index: f64,
}

fn default_sps() -> usize {
    8
}
fn default_shaping() -> Shaping {
    Shaping::Rrc
}
fn default_rolloff() -> f64 {
    0.35
}
fn default_span() -> usize {
    6
}
fn default_index() -> f64 {
    0.5
}

impl SchemeSpec {
    pub fn new(name: Scheme) -> Self {
        SchemeSpec {
            name,
            samples_per_symbol: default_sps(),
            shaping: default_shaping(),
            rrc_rolloff: default_rolloff(),
            rrc_span: default_span(),
            modulation_index: default_index(),
        }
    }

    pub fn unshaped(name: Scheme, samples_per_symbol: usize) -> Self {
        SchemeSpec {
            samples_per_symbol,
            shaping: Shaping::None,
            ..SchemeSpec::new(name)
        }
    }

    /// Largest per-sample phase step of CPFSK and FM.
    pub fn max_phase_step(&self) -> f64 {
        PI * self.modulation_index / self.samples_per_symbol as f64
    }

    /// Samples lost to pulse-shaping ramps at each end of a modulated burst.
    pub fn transient(&self) -> usize {
        if self.name.is_linear() && self.shaping == Shaping::Rrc {
            self.rrc_span * self.samples_per_symbol / 2
        } else {
            0
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.samples_per_symbol == 0 {
            return Err(SynthError::Parameter("samples_per_symbol must be positive".into()));
        }
        if !(self.modulation_index > 0.0 && self.modulation_index.is_finite()) {
            return Err(SynthError::Parameter("modulation_index must be positive".into()));
        }
        if self.name.is_linear() && self.shaping == Shaping::Rrc {
            rrc_filter(self.rrc_rolloff, self.rrc_span, self.samples_per_symbol)?;
        }
        Ok(())
    }
}

/// Maps bits to complex baseband samples, `samples_per_symbol` per symbol.
///
/// Linear schemes place Gray-mapped constellation points and pulse-shape them
/// (root-raised-cosine, or a rectangular hold for `Shaping::None`); the
/// filter delay is removed so the output has exactly
/// `symbols × samples_per_symbol` samples. CPFSK integrates ±1 frequency
/// steps, FM integrates a seeded band-limited message, AM modulates that
/// message onto the envelope; AM/FM ignore the bit values.
pub fn modulate(spec: &SchemeSpec, bits: &[u8], seed: u64) -> Result<Vec<Complex64>, SynthError> {
    spec.validate()?;
    let per = spec.name.bits_per_symbol();
    if !bits.len().is_multiple_of(per) {
        return Err(SynthError::BitCount {
            bits: bits.len(),
            per_symbol: per,
        });
    }
    if let Some(&b) = bits.iter().find(|&&b| b > 1) {
        return Err(SynthError::Parameter(format!("bit value {b}")));
    }
    let sps = spec.samples_per_symbol;
    let symbols = bits.len() / per;
    let len = symbols * sps;
    match spec.name {
        Scheme::Cpfsk => {
            let step = spec.max_phase_step();
            let mut phase = 0.0;
            let mut out = Vec::with_capacity(len);
            for &b in bits {
                let dir = bit_sign(b as usize);
                for _ in 0..sps {
                    phase += dir * step;
                    out.push(Complex64::from_polar(1.0, phase));
                }
            }
            Ok(out)
        }
        Scheme::Fm => {
            let msg = message(len, sps, seed);
            let step = spec.max_phase_step();
            let mut phase = 0.0;
            Ok(msg
                .iter()
                .map(|m| {
                    phase += step * m;
                    Complex64::from_polar(1.0, phase)
                })
                .collect())
        }
        Scheme::Am => {
            let msg = message(len, sps, seed);
            let env: Vec<f64> = msg.iter().map(|m| 1.0 + 0.5 * m).collect();
            let power = env.iter().map(|e| e * e).sum::<f64>() / len.max(1) as f64;
            let norm = power.sqrt().max(f64::MIN_POSITIVE);
            Ok(env.into_iter().map(|e| Complex64::new(e / norm, 0.0)).collect())
        }
        _ => {
            let points = spec.name.constellation();
            let syms: Vec<Complex64> = bits
                .chunks_exact(per)
                .map(|c| points[c.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)])
                .collect();
            Ok(match spec.shaping {
                Shaping::None => syms.iter().flat_map(|&s| std::iter::repeat_n(s, sps)).collect(),
                Shaping::Rrc => shape_rrc(&syms, spec)?,
            })
        }
    }
}

fn shape_rrc(symbols: &[Complex64], spec: &SchemeSpec) -> Result<Vec<Complex64>, SynthError> {
    let sps = spec.samples_per_symbol;
    let taps = rrc_filter(spec.rrc_rolloff, spec.rrc_span, sps)?;
    // unit-energy taps on a zero-stuffed sequence leave power 1/sps
    let gain = (sps as f64).sqrt();
    let delay = (taps.len() - 1) / 2;
    let len = symbols.len() * sps;
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (k, &s) in symbols.iter().enumerate() {
        let centre = k * sps;
        for (j, &tap) in taps.iter().enumerate() {
            let pos = centre + j;
            if pos >= delay && pos - delay < len {
                out[pos - delay] += s * (tap * gain);
            }
        }
    }
    Ok(out)
}

/// Band-limited random message in `[−1, 1]`: white Gaussian noise through a
/// Hann-windowed sinc low-pass with cutoff `0.5 / sps` cycles per sample,
/// scaled to unit peak.
pub fn message(len: usize, sps: usize, seed: u64) -> Vec<f64> {
    if len == 0 {
        return Vec::new();
    }
    let half = 2 * sps.max(1);
    let cutoff = 0.5 / sps.max(1) as f64;
    let taps: Vec<f64> = (0..=2 * half)
        .map(|n| {
            let t = n as f64 - half as f64;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let window = 0.5 - 0.5 * (2.0 * PI * n as f64 / (2 * half) as f64).cos();
            sinc * window
        })
        .collect();
    let mut gauss = GaussianSource::new(seed);
    let raw: Vec<f64> = (0..len + taps.len() - 1).map(|_| gauss.next_std()).collect();
    let filtered: Vec<f64> = (0..len)
        .map(|i| taps.iter().enumerate().map(|(j, t)| t * raw[i + j]).sum())
        .collect();
    let peak = filtered.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return filtered;
    }
    filtered.into_iter().map(|v| v / peak).collect()
}

/// Uniform random bits from a seeded generator.
pub fn random_bits(count: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random::<bool>() as u8).collect()
}
