//! Symbol alphabets, the root-raised-cosine pulse, and the power of shaped
//! bursts for every scheme.

use modrec::synth::{mean_power, modulate, random_bits, rrc_filter, Scheme, SchemeSpec};

pub struct SchemePower {
    pub scheme: Scheme,
    pub constellation_power: Option<f64>,
    pub shaped_power: f64,
}

pub fn run_example(symbols: usize) -> Vec<SchemePower> {
    let taps = rrc_filter(0.35, 6, 8).unwrap();
    let energy: f64 = taps.iter().map(|t| t * t).sum();
    println!("rrc(0.35, span 6, 8 sps): {} taps, energy {energy:.6}, peak {:.4}", taps.len(), taps[taps.len() / 2]);

    let mut out = Vec::new();
    for scheme in Scheme::ALL {
        let points = scheme.constellation();
        let constellation_power =
            (!points.is_empty()).then(|| points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64);
        let spec = SchemeSpec::new(scheme);
        let bits = random_bits(symbols * scheme.bits_per_symbol(), 11);
        let burst = modulate(&spec, &bits, 12).unwrap();
        let trim = spec.transient();
        let shaped_power = mean_power(&burst[trim..burst.len() - trim]);
        match constellation_power {
            Some(p) => println!("{:>6}: {:>2} points, power {p:.15}, shaped {shaped_power:.4}", scheme.name(), points.len()),
            None => println!("{:>6}: analog, shaped {shaped_power:.4}", scheme.name()),
        }
        out.push(SchemePower {
            scheme,
            constellation_power,
            shaped_power,
        });
    }
    out
}

fn main() {
    run_example(4096);
}
