use super::{Real, Tape, Tensor, TensorError, Var};

/// Compares the tape gradient of a scalar function against central finite
/// differences and returns `maxᵢ |analytic − numeric| / max(1, |numeric|)`.
///
/// `f` builds its graph on the tape it is handed; every evaluation gets a
/// fresh tape. Keep inputs of ReLU-containing functions away from the kink.
pub fn grad_check<F>(f: F, x: &Tensor, eps: Real) -> Result<Real, TensorError>
where
    F: Fn(&Tape, Var) -> Result<Var, TensorError>,
{
    let tape = Tape::new();
    let input = tape.leaf(x.clone());
    let loss = f(&tape, input)?;
    tape.backward(loss)?;
    let analytic = tape.grad(input);

    let eval = |point: Tensor| -> Result<Real, TensorError> {
        let tape = Tape::new();
        let v = tape.constant(point);
        let out = f(&tape, v)?;
        let value = tape.data(out)[0];
        Ok(value)
    };

    let mut worst: Real = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let err = (analytic.data()[i] - numeric).abs() / numeric.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
