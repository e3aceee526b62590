mod common;

use common::*;
use modrec::tensor::{grad_check, Activation, Real, Tape, Tensor, TensorError};
use proptest::prelude::*;

fn naive_matmul(a: &[Real], b: &[Real], m: usize, k: usize, n: usize) -> Vec<Real> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            for p in 0..k {
                out[i * n + j] += a[i * k + p] * b[p * n + j];
            }
        }
    }
    out
}

fn transpose(a: &[Real], rows: usize, cols: usize) -> Vec<Real> {
    let mut t = vec![0.0; a.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}

#[allow(clippy::too_many_arguments)]
fn naive_conv(
    x: &[Real],
    kernel: &[Real],
    bias: &[Real],
    (cin, t): (usize, usize),
    (cout, width): (usize, usize),
    stride: usize,
    pad: usize,
) -> Vec<Real> {
    let tout = (t + 2 * pad - width) / stride + 1;
    let mut out = vec![0.0; cout * tout];
    for o in 0..cout {
        for s in 0..tout {
            let mut acc = bias[o];
            for c in 0..cin {
                for j in 0..width {
                    let pos = (s * stride + j) as isize - pad as isize;
                    if pos >= 0 && (pos as usize) < t {
                        acc += kernel[(o * cin + c) * width + j] * x[c * t + pos as usize];
                    }
                }
            }
            out[o * tout + s] = acc;
        }
    }
    out
}

#[test]
fn matmul_two_by_two() {
    let tape = Tape::new();
    let a = tape.constant(Tensor::matrix(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
    let b = tape.constant(Tensor::matrix(&[vec![5.0, 6.0], vec![7.0, 8.0]]));
    let c = tape.matmul(a, b).unwrap();
    assert_eq!(tape.shape(c), vec![2, 2]);
    assert_eq!(&*tape.data(c), &[19.0, 22.0, 43.0, 50.0]);
}

#[test]
fn matmul_rejects_mismatched_extents() {
    let tape = Tape::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]));
    let b = tape.constant(Tensor::zeros(&[2, 3]));
    assert!(matches!(tape.matmul(a, b), Err(TensorError::Shape { .. })));
    assert!(tape.matmul_nt(a, b).is_ok());
}

#[test]
fn vector_times_matrix_keeps_vector_rank() {
    let tape = Tape::new();
    let v = tape.constant(Tensor::vector(&[1.0, -1.0]));
    let m = tape.constant(Tensor::matrix(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]));
    let y = tape.matmul(v, m).unwrap();
    assert_eq!(tape.shape(y), vec![3]);
    assert_eq!(&*tape.data(y), &[-3.0, -3.0, -3.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matmul_matches_triple_loop(m in 1usize..9, k in 1usize..9, n in 1usize..9, seed in any::<u64>()) {
        let a = random_tensor(&[m, k], seed);
        let b = random_tensor(&[k, n], seed.wrapping_add(1));
        let expected = naive_matmul(a.data(), b.data(), m, k, n);
        let tape = Tape::new();
        let (va, vb) = (tape.constant(a.clone()), tape.constant(b.clone()));
        let c = tape.matmul(va, vb).unwrap();
        assert_close(&tape.data(c), &expected, 1e-12);

        let bt = Tensor::new(&[n, k], transpose(b.data(), k, n)).unwrap();
        let vbt = tape.constant(bt);
        let c2 = tape.matmul_nt(va, vbt).unwrap();
        assert_close(&tape.data(c2), &expected, 1e-12);
    }

    #[test]
    fn conv_matches_direct_loop(
        cin in 1usize..4, cout in 1usize..4, half in 0usize..3,
        t in 5usize..14, stride in 1usize..4, pad in 0usize..3, batch in 1usize..4,
        seed in any::<u64>(),
    ) {
        let width = 2 * half + 1;
        let x = random_tensor(&[batch, cin, t], seed);
        let k = random_tensor(&[cout, cin, width], seed ^ 1);
        let b = random_tensor(&[cout], seed ^ 2);
        let tape = Tape::new();
        let y = tape
            .conv1d(tape.constant(x.clone()), tape.constant(k.clone()), tape.constant(b.clone()), stride, pad)
            .unwrap();
        let tout = (t + 2 * pad - width) / stride + 1;
        prop_assert_eq!(tape.shape(y), vec![batch, cout, tout]);
        let mut expected = Vec::new();
        for item in x.data().chunks(cin * t) {
            expected.extend(naive_conv(item, k.data(), b.data(), (cin, t), (cout, width), stride, pad));
        }
        assert_close(&tape.data(y), &expected, 1e-12);
    }

    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..6, cols in 1usize..12, seed in any::<u64>(), shift in -500.0f64..500.0) {
        let mut x = random_tensor(&[rows, cols], seed);
        x.data_mut().iter_mut().for_each(|v| *v = *v * 30.0 + shift as Real);
        let tape = Tape::new();
        let p = tape.softmax(tape.constant(x.clone()));
        for (row, src) in tape.data(p).chunks(cols).zip(x.data().chunks(cols)) {
            let sum: Real = row.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            let max = src.iter().copied().fold(Real::NEG_INFINITY, Real::max);
            let z: Real = src.iter().map(|v| (v - max).exp()).sum();
            for (pv, sv) in row.iter().zip(src) {
                prop_assert!((pv - (sv - max).exp() / z).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn unbatched_conv_keeps_rank() {
    let tape = Tape::new();
    let x = tape.constant(Tensor::new(&[1, 5], vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap());
    let k = tape.constant(Tensor::new(&[1, 1, 3], vec![1.0, 0.0, -1.0]).unwrap());
    let b = tape.constant(Tensor::vector(&[0.5]));
    let y = tape.conv1d(x, k, b, 1, 1).unwrap();
    assert_eq!(tape.shape(y), vec![1, 5]);
    // cross-correlation: y[s] = x[s-1] - x[s+1] + 0.5, zero padded
    assert_eq!(&*tape.data(y), &[-1.5, -1.5, -1.5, -1.5, 4.5]);
}

#[test]
fn conv_shape_errors() {
    let tape = Tape::new();
    let x = tape.constant(Tensor::zeros(&[2, 4]));
    let k = tape.constant(Tensor::zeros(&[1, 3, 3]));
    let b = tape.constant(Tensor::zeros(&[1]));
    assert!(tape.conv1d(x, k, b, 1, 0).is_err());
    let k = tape.constant(Tensor::zeros(&[1, 2, 7]));
    assert!(tape.conv1d(x, k, b, 1, 0).is_err());
    let k = tape.constant(Tensor::zeros(&[1, 2, 3]));
    assert!(tape.conv1d(x, k, b, 0, 0).is_err());
}

#[test]
fn activation_values_and_slopes() {
    let tape = Tape::new();
    let x = tape.leaf(Tensor::vector(&[1.0]));
    let s = tape.sigmoid(x);
    assert!((tape.data(s)[0] - 0.731_058_578_630_004_9).abs() < 1e-15);
    let loss = tape.sum(s);
    tape.backward(loss).unwrap();
    assert!((tape.grad(x).data()[0] - 0.196_611_933_241_481_85).abs() < 1e-15);

    let tape = Tape::new();
    let x = tape.leaf(Tensor::vector(&[-2.0, 0.0, 3.0]));
    let loss = tape.sum(tape.relu(x));
    tape.backward(loss).unwrap();
    assert_eq!(tape.data(loss)[0], 3.0);
    assert_eq!(tape.grad(x).data(), &[0.0, 0.0, 1.0]);

    let tape = Tape::new();
    let x = tape.leaf(Tensor::vector(&[0.5]));
    let loss = tape.sum(tape.tanh(x));
    tape.backward(loss).unwrap();
    let t = (0.5 as Real).tanh();
    assert!((tape.grad(x).data()[0] - (1.0 - t * t)).abs() < 1e-15);

    assert_eq!(Activation::Relu.apply(-1.0), 0.0);
    assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
}

#[test]
fn backward_twice_gives_identical_gradients() {
    let tape = Tape::new();
    let w = tape.leaf(random_tensor(&[3, 4], 1));
    let x = tape.constant(random_tensor(&[2, 4], 2));
    let h = tape.tanh(tape.matmul_nt(x, w).unwrap());
    let loss = tape.cross_entropy(h, &[0, 2]).unwrap();
    tape.backward(loss).unwrap();
    let first = tape.grad(w);
    tape.backward(loss).unwrap();
    assert_eq!(first.data(), tape.grad(w).data());
    tape.zero_grads();
    assert!(tape.grad(w).data().iter().all(|&g| g == 0.0));
}

#[test]
fn shared_input_accumulates_gradient() {
    let tape = Tape::new();
    let x = tape.leaf(Tensor::vector(&[3.0]));
    let y = tape.mul(x, x).unwrap();
    let loss = tape.sum(tape.add(y, x).unwrap());
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(x).data(), &[7.0]);
}

#[test]
fn non_scalar_loss_is_rejected() {
    let tape = Tape::new();
    let x = tape.leaf(Tensor::zeros(&[2]));
    assert!(matches!(tape.backward(x), Err(TensorError::NonScalarLoss(_))));
}

#[test]
fn constants_receive_no_gradient() {
    let tape = Tape::new();
    let c = tape.constant(Tensor::vector(&[1.0, 2.0]));
    let w = tape.leaf(Tensor::vector(&[3.0, 4.0]));
    let loss = tape.sum(tape.mul(c, w).unwrap());
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(w).data(), &[1.0, 2.0]);
    assert_eq!(tape.grad(c).data(), &[0.0, 0.0]);
}

#[test]
fn time_major_layout() {
    let (b, c, t) = (2, 3, 4);
    let x: Vec<Real> = (0..b * c * t).map(|v| v as Real).collect();
    let tape = Tape::new();
    let y = tape.to_time_major(tape.constant(Tensor::new(&[b, c, t], x.clone()).unwrap())).unwrap();
    assert_eq!(tape.shape(y), vec![t * b, c]);
    let y = tape.data(y);
    for bi in 0..b {
        for ci in 0..c {
            for ti in 0..t {
                assert_eq!(y[(ti * b + bi) * c + ci], x[(bi * c + ci) * t + ti]);
            }
        }
    }
}

#[test]
fn cross_entropy_matches_log_softmax() {
    let logits = random_tensor(&[3, 5], 9);
    let labels = [4, 0, 2];
    let tape = Tape::new();
    let loss = tape.cross_entropy(tape.constant(logits.clone()), &labels).unwrap();
    let mut expected = 0.0;
    for (row, &l) in logits.data().chunks(5).zip(&labels) {
        let z: Real = row.iter().map(|v| v.exp()).sum();
        expected -= (row[l].exp() / z).ln();
    }
    assert!((tape.data(loss)[0] - expected / 3.0).abs() < 1e-14);
    assert!(matches!(
        tape.cross_entropy(tape.constant(logits), &[0, 5, 1]),
        Err(TensorError::LabelOutOfRange { label: 5, classes: 5 })
    ));
}

#[test]
fn tensor_constructor_checks_length() {
    assert!(matches!(Tensor::new(&[2, 3], vec![0.0; 5]), Err(TensorError::DataLength { .. })));
    let t = Tensor::new(&[2, 3], (0..6).map(|v| v as Real).collect()).unwrap();
    assert_eq!(t.at(&[1, 2]), 5.0);
    assert_eq!(t.clone().reshape(&[3, 2]).unwrap().at(&[2, 0]), 4.0);
    assert!(t.reshape(&[4, 2]).is_err());
}

#[test]
fn grad_check_detects_a_wrong_gradient() {
    // relu'(0) is taken as 0, while the centred difference across the kink is 1/2.
    let x = Tensor::vector(&[0.0]);
    let err = grad_check(|t, v| Ok(t.sum(t.relu(v))), &x, 1e-3).unwrap();
    assert!((err - 0.5).abs() < 1e-12);
}

// ---- finite-difference checks of every op, ten seeds each ----

fn check_all_seeds(name: &str, op: impl Fn(&Tape, modrec::tensor::Var, u64) -> Result<modrec::tensor::Var, TensorError>, shape: &[usize]) {
    for seed in 0..10u64 {
        let x = off_kink_tensor(shape, seed, 0.05);
        let err = grad_check(|t, v| project(t, op(t, v, seed)?, seed), &x, EPS).unwrap();
        assert!(err < GRAD_TOL, "{name} seed {seed}: relative error {err:e}");
    }
}

#[test]
fn gradients_of_matmul() {
    check_all_seeds("matmul lhs", |t, v, s| t.matmul(v, t.constant(random_tensor(&[4, 3], s))), &[2, 4]);
    check_all_seeds("matmul rhs", |t, v, s| t.matmul(t.constant(random_tensor(&[2, 4], s)), v), &[4, 3]);
    check_all_seeds("matmul_nt rhs", |t, v, s| t.matmul_nt(t.constant(random_tensor(&[2, 4], s)), v), &[3, 4]);
    check_all_seeds("vector matmul", |t, v, s| t.matmul_nt(v, t.constant(random_tensor(&[3, 4], s))), &[4]);
}

#[test]
fn gradients_of_elementwise_ops() {
    check_all_seeds("add", |t, v, s| t.add(v, t.constant(random_tensor(&[3, 2], s))), &[3, 2]);
    check_all_seeds("mul", |t, v, _| t.mul(v, v), &[3, 2]);
    check_all_seeds("add_bias", |t, v, s| t.add_bias(v, t.constant(random_tensor(&[2], s))), &[3, 2]);
    check_all_seeds("add_bias on bias", |t, v, s| t.add_bias(t.constant(random_tensor(&[3, 2], s)), v), &[2]);
    check_all_seeds("scale", |t, v, _| Ok(t.scale(v, -2.5)), &[5]);
    check_all_seeds("relu", |t, v, _| Ok(t.relu(v)), &[6]);
    check_all_seeds("sigmoid", |t, v, _| Ok(t.sigmoid(v)), &[6]);
    check_all_seeds("tanh", |t, v, _| Ok(t.tanh(v)), &[6]);
    check_all_seeds("softmax", |t, v, _| Ok(t.softmax(v)), &[3, 4]);
}

#[test]
fn gradients_of_conv1d() {
    for (stride, pad) in [(1, 1), (2, 1), (1, 0), (3, 2)] {
        check_all_seeds(
            "conv input",
            |t, v, s| t.conv1d(v, t.constant(random_tensor(&[3, 2, 3], s)), t.constant(random_tensor(&[3], s + 1)), stride, pad),
            &[2, 2, 7],
        );
        check_all_seeds(
            "conv kernel",
            |t, v, s| t.conv1d(t.constant(random_tensor(&[2, 2, 7], s)), v, t.constant(random_tensor(&[3], s + 1)), stride, pad),
            &[3, 2, 3],
        );
        check_all_seeds(
            "conv bias",
            |t, v, s| t.conv1d(t.constant(random_tensor(&[2, 2, 7], s)), t.constant(random_tensor(&[3, 2, 3], s + 1)), v, stride, pad),
            &[3],
        );
    }
}

#[test]
fn gradients_of_shape_ops() {
    check_all_seeds("slice_cols", |t, v, _| t.slice_cols(v, 1, 2), &[3, 4]);
    check_all_seeds("concat_cols", |t, v, s| t.concat_cols(&[v, t.constant(random_tensor(&[3, 2], s)), v]), &[3, 4]);
    check_all_seeds("slice_rows", |t, v, _| t.slice_rows(v, 1, 2), &[4, 3]);
    check_all_seeds("concat_rows", |t, v, s| t.concat_rows(&[v, t.constant(random_tensor(&[1, 3], s)), v]), &[2, 3]);
    check_all_seeds("row_dot", |t, v, s| t.row_dot(v, t.constant(random_tensor(&[3, 4], s))), &[3, 4]);
    check_all_seeds("scale_rows scale", |t, v, s| t.scale_rows(v, t.constant(random_tensor(&[3, 4], s))), &[3, 1]);
    check_all_seeds("scale_rows input", |t, v, s| t.scale_rows(t.constant(random_tensor(&[3, 1], s)), v), &[3, 4]);
    check_all_seeds("to_time_major", |t, v, _| t.to_time_major(v), &[2, 3, 4]);
    check_all_seeds("reshape", |t, v, _| t.reshape(v, &[6, 2]), &[3, 4]);
}

#[test]
fn gradient_of_cross_entropy() {
    for seed in 0..10u64 {
        let x = random_tensor(&[4, 5], seed);
        let labels = [seed as usize % 5, 0, 4, 2];
        let err = grad_check(|t, v| t.cross_entropy(v, &labels), &x, EPS).unwrap();
        assert!(err < GRAD_TOL, "seed {seed}: {err:e}");
    }
}
