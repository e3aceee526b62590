#![allow(dead_code)]

use modrec::tensor::{Real, Tape, Tensor, TensorError, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: Real = 1e-5;
pub const GRAD_TOL: Real = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_values(len: usize, seed: u64) -> Vec<Real> {
    let mut r = rng(seed);
    (0..len).map(|_| r.random_range(-1.0..1.0)).collect()
}

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    Tensor::new(shape, random_values(shape.iter().product(), seed)).unwrap()
}

/// Random values kept at least `margin` away from zero, for ReLU inputs.
pub fn off_kink_tensor(shape: &[usize], seed: u64, margin: Real) -> Tensor {
    let mut r = rng(seed);
    let data = (0..shape.iter().product())
        .map(|_| {
            let v: Real = r.random_range(margin..1.0);
            if r.random::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// `Σ y ⊙ w` with fixed random `w`: turns any output into a scalar whose
/// gradient touches every element.
pub fn project(tape: &Tape, y: Var, seed: u64) -> Result<Var, TensorError> {
    let w = tape.constant(random_tensor(&tape.shape(y), seed ^ 0x5eed));
    Ok(tape.sum(tape.mul(y, w)?))
}

pub fn assert_close(actual: &[Real], expected: &[Real], tol: Real) {
    assert_eq!(actual.len(), expected.len(), "length");
    for (i, (a, e)) in actual.iter().zip(expected).enumerate() {
        assert!((a - e).abs() <= tol, "element {i}: {a} vs {e}");
    }
}
