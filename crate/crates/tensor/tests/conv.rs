mod common;

use common::{brute_conv, brute_depthwise, full_kernel, random, rng};
use proptest::prelude::*;
use vfd_tensor::{Tape, Tensor, TensorError};

#[test]
fn ones_kernel_sums_window() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::full(&[1, 1, 3, 3], 1.0));
    let k = tape.constant(Tensor::full(&[1, 1, 3, 3], 1.0));
    let y = tape.conv2d(x, k, 1, 0).unwrap();
    assert_eq!(tape.shape(y), &[1, 1, 1, 1]);
    assert_eq!(tape.value(y).data(), &[9.0]);
}

#[test]
fn identity_kernel_reproduces_input() {
    let mut r = rng(1);
    for ks in [1, 3, 5] {
        let input = random(&mut r, &[2, 3, 7, 6]);
        let mut kernel = Tensor::zeros(&[3, 3, ks, ks]);
        for c in 0..3 {
            kernel.data_mut()[((c * 3 + c) * ks + ks / 2) * ks + ks / 2] = 1.0;
        }
        let mut tape = Tape::new();
        let x = tape.constant(input.clone());
        let k = tape.constant(kernel);
        let y = tape.conv2d(x, k, 1, (ks - 1) / 2).unwrap();
        assert_eq!(tape.value(y), &input);
    }
}

#[test]
fn conv_matches_six_loop_reference() {
    let mut r = rng(2);
    let input = random(&mut r, &[1, 2, 8, 8]);
    let kernel = random(&mut r, &[4, 2, 3, 3]);
    for (stride, pad) in [(1, 0), (1, 1), (2, 0), (2, 1), (3, 2)] {
        let mut tape = Tape::new();
        let x = tape.constant(input.clone());
        let k = tape.constant(kernel.clone());
        let y = tape.conv2d(x, k, stride, pad).unwrap();
        let reference = brute_conv(&input, &kernel, stride, pad);
        assert_eq!(tape.shape(y), reference.shape());
        assert!(tape.value(y).max_abs_diff(&reference) < 1e-12, "stride {stride} pad {pad}");
    }
}

#[test]
fn pointwise_and_strided_1x1_match_reference() {
    let mut r = rng(3);
    let input = random(&mut r, &[3, 5, 6, 7]);
    let kernel = random(&mut r, &[4, 5, 1, 1]);
    for stride in [1, 2] {
        let mut tape = Tape::new();
        let x = tape.constant(input.clone());
        let k = tape.constant(kernel.clone());
        let y = tape.conv2d(x, k, stride, 0).unwrap();
        assert!(tape.value(y).max_abs_diff(&brute_conv(&input, &kernel, stride, 0)) < 1e-12);
    }
}

#[test]
fn channel_mismatch_is_rejected() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::zeros(&[1, 3, 5, 5]));
    let k = tape.constant(Tensor::zeros(&[2, 2, 3, 3]));
    assert!(matches!(tape.conv2d(x, k, 1, 1), Err(TensorError::Shape { .. })));
    let dw = tape.constant(Tensor::zeros(&[2, 1, 3, 3]));
    assert!(matches!(tape.depthwise_conv2d(x, dw, 1, 1), Err(TensorError::Shape { .. })));
}

#[test]
fn separable_equals_composed_full_kernel() {
    let mut r = rng(4);
    let input = random(&mut r, &[2, 3, 9, 8]);
    let dw = random(&mut r, &[3, 1, 3, 3]);
    let pw = random(&mut r, &[5, 3, 1, 1]);
    let mut tape = Tape::new();
    let x = tape.constant(input.clone());
    let d = tape.constant(dw.clone());
    let p = tape.constant(pw.clone());
    let y = tape.separable_conv2d(x, d, p).unwrap();
    let reference = brute_conv(&input, &full_kernel(&dw, &pw), 1, 1);
    assert!(tape.value(y).max_abs_diff(&reference) < 1e-12);
}

#[test]
fn depthwise_matches_per_channel_reference() {
    let mut r = rng(7);
    let input = random(&mut r, &[2, 3, 9, 8]);
    let kernel = random(&mut r, &[3, 1, 3, 3]);
    for (stride, pad) in [(1, 1), (2, 1), (2, 0)] {
        let mut tape = Tape::new();
        let x = tape.constant(input.clone());
        let k = tape.constant(kernel.clone());
        let y = tape.depthwise_conv2d(x, k, stride, pad).unwrap();
        assert!(tape.value(y).max_abs_diff(&brute_depthwise(&input, &kernel, stride, pad)) < 1e-12);
    }
}

#[test]
fn separable_identity_and_annihilation() {
    let mut r = rng(5);
    let input = random(&mut r, &[1, 4, 6, 6]);
    let mut dw = Tensor::zeros(&[4, 1, 3, 3]);
    for c in 0..4 {
        dw.data_mut()[c * 9 + 4] = 1.0;
    }
    let mut pw = Tensor::zeros(&[4, 4, 1, 1]);
    for c in 0..4 {
        pw.data_mut()[c * 4 + c] = 1.0;
    }
    let mut tape = Tape::new();
    let x = tape.constant(input.clone());
    let d = tape.constant(dw);
    let p = tape.constant(pw);
    let y = tape.separable_conv2d(x, d, p).unwrap();
    assert_eq!(tape.value(y), &input);

    let zero = tape.constant(Tensor::zeros(&[2, 4, 1, 1]));
    let y = tape.separable_conv2d(x, d, zero).unwrap();
    assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
    assert_eq!(tape.shape(y), &[1, 2, 6, 6]);
}

#[test]
fn separable_channel_mismatch() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::zeros(&[1, 3, 5, 5]));
    let d = tape.constant(Tensor::zeros(&[3, 1, 3, 3]));
    let p = tape.constant(Tensor::zeros(&[2, 4, 1, 1]));
    assert!(tape.separable_conv2d(x, d, p).is_err());
}

#[test]
fn forward_is_deterministic() {
    let mut r = rng(6);
    let input = random(&mut r, &[2, 3, 10, 10]);
    let kernel = random(&mut r, &[4, 3, 3, 3]);
    let run = || {
        let mut tape = Tape::new();
        let x = tape.constant(input.clone());
        let k = tape.constant(kernel.clone());
        let y = tape.conv2d(x, k, 2, 1).unwrap();
        tape.value(y).clone()
    };
    assert_eq!(run().data(), run().data());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn conv_is_linear_in_input(seed in 0u64..10_000, a in -3.0f64..3.0, b in -3.0f64..3.0, stride in 1usize..3, pad in 0usize..2) {
        let mut r = rng(seed);
        let xs = random(&mut r, &[1, 2, 7, 7]);
        let ys = random(&mut r, &[1, 2, 7, 7]);
        let kernel = random(&mut r, &[3, 2, 3, 3]);
        let combo = Tensor::from_vec(xs.shape().to_vec(), xs.data().iter().zip(ys.data()).map(|(x, y)| a * x + b * y).collect()).unwrap();
        let mut tape = Tape::new();
        let k = tape.constant(kernel);
        let x = tape.constant(xs);
        let y = tape.constant(ys);
        let c = tape.constant(combo);
        let cx = tape.conv2d(x, k, stride, pad).unwrap();
        let cy = tape.conv2d(y, k, stride, pad).unwrap();
        let cc = tape.conv2d(c, k, stride, pad).unwrap();
        let lhs = tape.value(cc).data().to_vec();
        for (i, v) in lhs.iter().enumerate() {
            let rhs = a * tape.value(cx).data()[i] + b * tape.value(cy).data()[i];
            prop_assert!((v - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn forward_outputs_stay_finite(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let mut tape = Tape::new();
        let x = tape.constant(random(&mut r, &[2, 3, 6, 6]));
        let k = tape.constant(random(&mut r, &[2, 3, 3, 3]));
        let y = tape.conv2d(x, k, 1, 1).unwrap();
        let y = tape.max_pool2d(y, 3, 2, 1).unwrap();
        let y = tape.global_avg_pool(y).unwrap();
        prop_assert!(tape.value(y).is_finite());
    }
}
